"""Command-line entry point.

Subcommands: run (execute a scenario), bench (time the sonar ray-query
backends), gen (generate a world archive from a genspec), import-bathy
(convert an Esri ASCII grid to a world archive), schema (print the
bridge message schemas).

Exit codes are a stable contract: 0 success, 2 configuration or
validation error, 3 runtime fault. Log level comes from MARINER_LOG.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

log = logging.getLogger("mariner")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _setup_logging() -> None:
    level = os.environ.get("MARINER_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mariner",
        description="Headless marine robotics simulation core.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario")
    p_run.add_argument("--scenario", required=True, help="scenario JSON path")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--pgm", action="store_true",
                       help="also write sidescan waterfalls as PGM images")

    p_bench = sub.add_parser("bench", help="benchmark the sonar backends")
    p_bench.add_argument("--world", help="world archive (.zip); "
                         "defaults to a built-in desk-scale test world")
    p_bench.add_argument("--ticks", type=int, default=509)
    p_bench.add_argument("--rays-per-tick", type=int, default=64)
    p_bench.add_argument("--leaf-size", type=float, default=0.1)
    p_bench.add_argument("--json-out", help="also write the report as JSON")

    p_gen = sub.add_parser("gen", help="generate a world archive")
    p_gen.add_argument("--genspec", required=True, help="genspec JSON path")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True, help="archive path (.zip)")

    p_imp = sub.add_parser("import-bathy",
                           help="convert an Esri ASCII grid to a world archive")
    p_imp.add_argument("--asc", required=True, help="input .asc path")
    p_imp.add_argument("--out", required=True, help="archive path (.zip)")
    p_imp.add_argument("--cell-size", type=float, default=None,
                       help="override the header cellsize")

    sub.add_parser("schema", help="print the bridge message schemas")
    return parser


def _print_violations(violations) -> None:
    for v in violations:
        print(f"error: {v.path}: {v.message}", file=sys.stderr)


def cmd_run(args) -> int:
    from .engine import SimRun
    from .scenario import ScenarioError, load_scenario, validate

    try:
        config = load_scenario(args.scenario)
    except FileNotFoundError:
        print(f"error: scenario file not found: {args.scenario}",
              file=sys.stderr)
        return EXIT_CONFIG
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    violations = validate(config)
    if violations:
        _print_violations(violations)
        return EXIT_CONFIG
    base_dir = os.path.dirname(os.path.abspath(args.scenario))
    run = SimRun(config, args.out, base_dir=base_dir)
    report = run.run(write_pgm=args.pgm)
    print(f"executed {report.ticks_executed} ticks in "
          f"{report.wall_time:.3f} s wall time")
    for key in sorted(report.sensor_messages):
        print(f"  {key}: {report.sensor_messages[key]} messages")
    for evt in report.contact_events:
        print(f"  contact: agent {evt['agent']} at tick {evt['tick']}")
    return EXIT_OK


def _bench_world():
    """Built-in desk-scale benchmark world: gently rolling terrain about
    20 x 20 m with a handful of labeled props on the bottom."""
    from .scenario import GenSpec, PropClassSpec
    from .world import generate_world

    gen = GenSpec(
        terrain="hills", size_m=(20.0, 20.0), cell_size=0.5,
        base_depth=8.0, amplitude=1.5,
        prop_classes=[
            PropClassSpec(name="crate", class_id=2, size=0.8, shape="box"),
            PropClassSpec(name="marker", class_id=3, size=0.6, shape="pyramid"),
        ],
        density=3.0)
    return generate_world(gen, seed=7)


def _bench_rays(world, n_rays: int):
    """Deterministic downward-looking fan sweeping the world footprint,
    reused every tick as a fixed sonar workload."""
    from .accel import Ray

    (x0, x1), (y0, y1) = world.heightfield.extent
    cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
    span = min(x1 - x0, y1 - y0) * 0.45
    rays = []
    for i in range(n_rays):
        az = 2.0 * math.pi * i / n_rays
        tilt = 0.35 + 0.5 * (i % 16) / 16.0  # rad below horizontal
        d = np.array([math.cos(az) * math.cos(tilt),
                      math.sin(az) * math.cos(tilt),
                      math.sin(tilt)])
        origin = np.array([cx + 0.2 * span * math.cos(3 * az),
                           cy + 0.2 * span * math.sin(3 * az), 2.0])
        rays.append(Ray(origin=origin, direction=d, max_range=40.0))
    return rays


def cmd_bench(args) -> int:
    from .accel import AccelError, bench_backends
    from .archive import load_world

    if args.ticks < 1 or args.rays_per_tick < 1 or args.leaf_size <= 0:
        print("error: ticks and rays-per-tick must be >= 1, "
              "leaf-size positive", file=sys.stderr)
        return EXIT_CONFIG
    if args.world is not None:
        try:
            world = load_world(args.world)
        except FileNotFoundError:
            print(f"error: world archive not found: {args.world}",
                  file=sys.stderr)
            return EXIT_CONFIG
    else:
        world = _bench_world()
    rays = _bench_rays(world, args.rays_per_tick)
    try:
        report = bench_backends(world, rays, args.ticks,
                                leaf_size=args.leaf_size)
    except AccelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(report.to_text())
    if args.json_out:
        with open(args.json_out, "w") as fh:
            fh.write(report.to_json())
    return EXIT_OK


def cmd_gen(args) -> int:
    from .archive import save_world
    from .scenario import ScenarioError, _parse_genspec
    from .world import WorldError, generate_world

    try:
        with open(args.genspec, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        print(f"error: genspec file not found: {args.genspec}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"error: genspec syntax error at line {exc.lineno}: {exc.msg}",
              file=sys.stderr)
        return EXIT_CONFIG
    try:
        gen = _parse_genspec(doc, "$")
        world = generate_world(gen, args.seed)
    except (ScenarioError, WorldError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    save_world(world, args.out)
    print(f"wrote {args.out}: {world.heightfield.nx}x{world.heightfield.ny} "
          f"heightfield, {len(world.props)} props")
    return EXIT_OK


def cmd_import_bathy(args) -> int:
    from .archive import save_world
    from .world import World, WorldError, load_bathymetry

    try:
        hf = load_bathymetry(args.asc, cell_size=args.cell_size)
    except FileNotFoundError:
        print(f"error: bathymetry file not found: {args.asc}", file=sys.stderr)
        return EXIT_CONFIG
    except WorldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    save_world(World(heightfield=hf), args.out)
    print(f"wrote {args.out}: {hf.nx}x{hf.ny} heightfield")
    return EXIT_OK


def cmd_schema(args) -> int:
    from .bridge import SCHEMAS

    doc = {name: list(fields) for name, fields in sorted(SCHEMAS.items())}
    print(json.dumps(doc, indent=2))
    return EXIT_OK


_COMMANDS = {
    "run": cmd_run,
    "bench": cmd_bench,
    "gen": cmd_gen,
    "import-bathy": cmd_import_bathy,
    "schema": cmd_schema,
}


def main(argv=None) -> int:
    _setup_logging()
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:  # runtime faults after config validation
        log.exception("runtime fault")
        print(f"runtime fault: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
