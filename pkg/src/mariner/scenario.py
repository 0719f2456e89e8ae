"""Scenario configuration: parse, validate, default-fill, serialize.

A scenario is a strict-schema JSON document describing the world, the
agents (with full vehicle parameter ledgers), optional current and wave
fields, and the optional pub/sub bridge. Unknown fields are rejected
rather than ignored so that typos fail loudly and round-trips are exact.

Conventions fixed here once for the whole artifact: angles in radians,
positions in NED meters with z positive down.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields as dc_fields
from typing import Any

from .params import (
    AutopilotParams,
    ControlSurfaceParams,
    EnvironmentalParams,
    FinSpec,
    HydrodynamicParams,
    HydrostaticParams,
    PhysicalParams,
    VehicleParams,
    default_remus100_params,
)

DEFAULT_BRIDGE_PORT = 28510

SENSOR_KINDS = ("echo", "multibeam", "sidescan", "lidar", "imu", "dvl", "depth")
AGENT_MODELS = ("fossen_torpedo", "kinematic")
BACKENDS = ("octree", "raycast")


class ScenarioError(ValueError):
    """Raised for malformed scenario documents; message carries a path."""


@dataclass
class Violation:
    path: str
    message: str


@dataclass
class GenSpec:
    terrain: str = "flat"  # flat | hills
    size_m: tuple = (100.0, 100.0)
    cell_size: float = 1.0
    base_depth: float = 20.0
    amplitude: float = 0.0
    prop_classes: list = field(default_factory=list)  # of PropClassSpec
    density: float = 0.0  # props per 100 m^2


@dataclass
class PropClassSpec:
    name: str
    class_id: int
    size: float = 1.0  # m, characteristic edge length
    shape: str = "box"  # box | pyramid


@dataclass
class WorldSpec:
    kind: str  # flat | generate | bathymetry | archive
    depth: float = 20.0
    size_m: tuple = (100.0, 100.0)
    cell_size: float = 1.0
    origin: tuple = (0.0, 0.0)
    path: str | None = None  # bathymetry .asc or world archive .zip
    gen: GenSpec | None = None


@dataclass
class SensorSpec:
    name: str
    kind: str
    mount_pose: tuple = (0.0,) * 6
    rate_ticks: int = 1
    backend: str = "raycast"
    semantic: bool = False
    max_range: float = 50.0
    leaf_size: float = 0.1  # octree backend resolution
    # acoustic / lidar geometry
    n_beams: int = 1
    aperture: float = 2.0943951023931953  # rad, multibeam swath (120 deg)
    n_bins: int = 64
    tilt: float = 0.5235987755982988  # rad below horizontal, sidescan
    vertical_aperture: float = 0.7853981633974483  # rad, sidescan fan
    n_lasers: int = 16
    fov_vertical: float = 0.5235987755982988
    fov_horizontal: float = 6.283185307179586
    points_per_rotation: int = 360
    noise_std: float = 0.0  # additive Gaussian, nav-suite sensors


@dataclass
class CurrentSpec:
    kind: str  # constant | shear | grid
    vector: tuple = (0.0, 0.0, 0.0)
    surface_velocity: tuple = (0.0, 0.0, 0.0)
    decay_depth: float = 10.0
    path: str | None = None  # grid field file


@dataclass
class WaveComponentSpec:
    amplitude: float
    wavelength: float
    direction: tuple = (1.0, 0.0)
    phase: float = 0.0
    steepness: float = 0.0


@dataclass
class WaveSpec:
    components: list = field(default_factory=list)
    gravity: float = 9.81
    orbital_coupling: bool = False


@dataclass
class BridgeSpec:
    port: int = DEFAULT_BRIDGE_PORT
    topics: tuple = ("*",)


@dataclass
class AgentSpec:
    name: str
    model: str = "fossen_torpedo"
    params: VehicleParams = field(default_factory=default_remus100_params)
    initial_pose: tuple = (0.0,) * 6
    initial_velocity: tuple = (0.0,) * 6
    sensors: list = field(default_factory=list)
    per_agent_current: tuple | None = None


@dataclass
class ScenarioConfig:
    name: str
    ticks_per_sec: float
    duration_ticks: int
    world: WorldSpec
    agents: list = field(default_factory=list)
    current: CurrentSpec | None = None
    waves: WaveSpec | None = None
    bridge: BridgeSpec | None = None
    rng_seed: int = 0


# ---------------------------------------------------------------------------
# strict parsing helpers


def _require_dict(obj: Any, path: str) -> dict:
    if not isinstance(obj, dict):
        raise ScenarioError(f"{path}: expected an object, got {type(obj).__name__}")
    return obj


def _check_keys(obj: dict, allowed: set, path: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        name = sorted(unknown)[0]
        raise ScenarioError(f"{path}: unknown field {name!r}")


_MISSING = object()


def _get(obj: dict, key: str, typ, path: str, default=_MISSING):
    if key not in obj:
        if default is _MISSING:
            raise ScenarioError(f"{path}: missing required field {key!r}")
        return default
    val = obj[key]
    if typ is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ScenarioError(f"{path}.{key}: expected a number")
        return float(val)
    if typ is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ScenarioError(f"{path}.{key}: expected an integer")
        return val
    if typ is str and not isinstance(val, str):
        raise ScenarioError(f"{path}.{key}: expected a string")
    if typ is bool and not isinstance(val, bool):
        raise ScenarioError(f"{path}.{key}: expected a boolean")
    if typ is list and not isinstance(val, list):
        raise ScenarioError(f"{path}.{key}: expected an array")
    if typ is dict and not isinstance(val, dict):
        raise ScenarioError(f"{path}.{key}: expected an object")
    return val


def _vec(obj: dict, key: str, n: int, path: str, default=None):
    if key not in obj:
        if default is None:
            raise ScenarioError(f"{path}: missing required field {key!r}")
        return default
    val = obj[key]
    if (not isinstance(val, list) or len(val) != n
            or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in val)):
        raise ScenarioError(f"{path}.{key}: expected an array of {n} numbers")
    return tuple(float(x) for x in val)


def _enum(obj: dict, key: str, options, path: str, default=None):
    val = _get(obj, key, str, path, default)
    if val not in options:
        raise ScenarioError(f"{path}.{key}: must be one of {sorted(options)}")
    return val


# ---------------------------------------------------------------------------
# section parsers


def _parse_dataclass_overrides(obj: dict, proto, path: str):
    """Fill a flat numeric dataclass from a JSON object, starting from its
    defaults; used for the simple vehicle-parameter groups."""
    allowed = {f.name for f in dc_fields(type(proto))}
    _check_keys(obj, allowed, path)
    for f in dc_fields(type(proto)):
        if f.name not in obj:
            continue
        val = obj[f.name]
        cur = getattr(proto, f.name)
        if isinstance(cur, float):
            setattr(proto, f.name, _get(obj, f.name, float, path))
        elif isinstance(cur, tuple) and f.name == "inertia":
            if (not isinstance(val, list) or len(val) != 3
                    or any(not isinstance(r, list) or len(r) != 3 for r in val)):
                raise ScenarioError(f"{path}.inertia: expected a 3x3 array")
            setattr(proto, f.name, tuple(tuple(float(x) for x in r) for r in val))
        elif isinstance(cur, tuple):
            setattr(proto, f.name, _vec(obj, f.name, len(cur), path))
        elif cur is None and f.name == "per_agent_current":
            setattr(proto, f.name, _vec(obj, f.name, 3, path))
        else:
            raise ScenarioError(f"{path}.{f.name}: unsupported override")
    return proto


def _parse_fin(obj: dict, path: str) -> FinSpec:
    obj = _require_dict(obj, path)
    _check_keys(obj, {"name", "position", "lift_axis", "area",
                      "lift_coefficient", "time_constant", "max_deflection"}, path)
    return FinSpec(
        name=_get(obj, "name", str, path),
        position=_vec(obj, "position", 3, path),
        lift_axis=_vec(obj, "lift_axis", 3, path),
        area=_get(obj, "area", float, path, 0.00665),
        lift_coefficient=_get(obj, "lift_coefficient", float, path, 3.0),
        time_constant=_get(obj, "time_constant", float, path, 0.1),
        max_deflection=_get(obj, "max_deflection", float, path, 0.5236),
    )


def _parse_vehicle_params(obj: dict, path: str) -> VehicleParams:
    obj = _require_dict(obj, path)
    _check_keys(obj, set(PARAM_GROUPS), path)
    p = default_remus100_params()
    for group in ("environmental", "physical", "hydrodynamic", "hydrostatic",
                  "autopilot"):
        if group in obj:
            sub = _require_dict(obj[group], f"{path}.{group}")
            _parse_dataclass_overrides(sub, getattr(p, group), f"{path}.{group}")
    if "control_surfaces" in obj:
        sub = _require_dict(obj["control_surfaces"], f"{path}.control_surfaces")
        _check_keys(sub, {"fins", "thrust_coefficient", "prop_diameter",
                          "max_prop_speed"}, f"{path}.control_surfaces")
        cs = p.control_surfaces
        cs.thrust_coefficient = _get(sub, "thrust_coefficient", float,
                                     f"{path}.control_surfaces", cs.thrust_coefficient)
        cs.prop_diameter = _get(sub, "prop_diameter", float,
                                f"{path}.control_surfaces", cs.prop_diameter)
        cs.max_prop_speed = _get(sub, "max_prop_speed", float,
                                 f"{path}.control_surfaces", cs.max_prop_speed)
        if "fins" in sub:
            fins = _get(sub, "fins", list, f"{path}.control_surfaces")
            cs.fins = [_parse_fin(f, f"{path}.control_surfaces.fins[{i}]")
                       for i, f in enumerate(fins)]
    return p


PARAM_GROUPS = ("environmental", "physical", "hydrodynamic", "hydrostatic",
                "control_surfaces", "autopilot")


def _parse_sensor(obj: dict, path: str) -> SensorSpec:
    obj = _require_dict(obj, path)
    allowed = {f.name for f in dc_fields(SensorSpec)}
    _check_keys(obj, allowed, path)
    spec = SensorSpec(
        name=_get(obj, "name", str, path),
        kind=_enum(obj, "kind", SENSOR_KINDS, path),
    )
    spec.mount_pose = _vec(obj, "mount_pose", 6, path, spec.mount_pose)
    spec.rate_ticks = _get(obj, "rate_ticks", int, path, spec.rate_ticks)
    spec.backend = _enum(obj, "backend", BACKENDS, path, spec.backend)
    spec.semantic = _get(obj, "semantic", bool, path, spec.semantic)
    for name in ("max_range", "leaf_size", "aperture", "tilt",
                 "vertical_aperture", "fov_vertical", "fov_horizontal",
                 "noise_std"):
        setattr(spec, name, _get(obj, name, float, path, getattr(spec, name)))
    for name in ("n_beams", "n_bins", "n_lasers", "points_per_rotation"):
        setattr(spec, name, _get(obj, name, int, path, getattr(spec, name)))
    return spec


def _parse_agent(obj: dict, path: str) -> AgentSpec:
    obj = _require_dict(obj, path)
    _check_keys(obj, {"name", "model", "params", "initial_pose",
                      "initial_velocity", "sensors", "per_agent_current"}, path)
    agent = AgentSpec(
        name=_get(obj, "name", str, path),
        model=_enum(obj, "model", AGENT_MODELS, path, "fossen_torpedo"),
    )
    if "params" in obj:
        agent.params = _parse_vehicle_params(obj["params"], f"{path}.params")
    agent.initial_pose = _vec(obj, "initial_pose", 6, path, agent.initial_pose)
    agent.initial_velocity = _vec(obj, "initial_velocity", 6, path,
                                  agent.initial_velocity)
    if "per_agent_current" in obj:
        agent.per_agent_current = _vec(obj, "per_agent_current", 3, path)
    sensors = _get(obj, "sensors", list, path, [])
    agent.sensors = [_parse_sensor(s, f"{path}.sensors[{i}]")
                     for i, s in enumerate(sensors)]
    return agent


def _parse_genspec(obj: dict, path: str) -> GenSpec:
    obj = _require_dict(obj, path)
    _check_keys(obj, {"terrain", "size_m", "cell_size", "base_depth",
                      "amplitude", "prop_classes", "density"}, path)
    g = GenSpec()
    g.terrain = _enum(obj, "terrain", ("flat", "hills"), path, g.terrain)
    g.size_m = _vec(obj, "size_m", 2, path, g.size_m)
    g.cell_size = _get(obj, "cell_size", float, path, g.cell_size)
    g.base_depth = _get(obj, "base_depth", float, path, g.base_depth)
    g.amplitude = _get(obj, "amplitude", float, path, g.amplitude)
    g.density = _get(obj, "density", float, path, g.density)
    classes = _get(obj, "prop_classes", list, path, [])
    g.prop_classes = []
    for i, c in enumerate(classes):
        cpath = f"{path}.prop_classes[{i}]"
        c = _require_dict(c, cpath)
        _check_keys(c, {"name", "class_id", "size", "shape"}, cpath)
        g.prop_classes.append(PropClassSpec(
            name=_get(c, "name", str, cpath),
            class_id=_get(c, "class_id", int, cpath),
            size=_get(c, "size", float, cpath, 1.0),
            shape=_enum(c, "shape", ("box", "pyramid"), cpath, "box"),
        ))
    return g


def _parse_world(obj: dict, path: str) -> WorldSpec:
    obj = _require_dict(obj, path)
    _check_keys(obj, {"kind", "depth", "size_m", "cell_size", "origin",
                      "path", "gen"}, path)
    kind = _enum(obj, "kind", ("flat", "generate", "bathymetry", "archive"), path)
    w = WorldSpec(kind=kind)
    w.depth = _get(obj, "depth", float, path, w.depth)
    w.size_m = _vec(obj, "size_m", 2, path, w.size_m)
    w.cell_size = _get(obj, "cell_size", float, path, w.cell_size)
    w.origin = _vec(obj, "origin", 2, path, w.origin)
    if kind in ("bathymetry", "archive"):
        w.path = _get(obj, "path", str, path)
    if kind == "generate":
        w.gen = _parse_genspec(_get(obj, "gen", dict, path), f"{path}.gen")
    return w


def _parse_current(obj: dict, path: str) -> CurrentSpec:
    obj = _require_dict(obj, path)
    _check_keys(obj, {"kind", "vector", "surface_velocity", "decay_depth",
                      "path"}, path)
    kind = _enum(obj, "kind", ("constant", "shear", "grid"), path)
    c = CurrentSpec(kind=kind)
    c.vector = _vec(obj, "vector", 3, path, c.vector)
    c.surface_velocity = _vec(obj, "surface_velocity", 3, path, c.surface_velocity)
    c.decay_depth = _get(obj, "decay_depth", float, path, c.decay_depth)
    if kind == "grid":
        c.path = _get(obj, "path", str, path)
    return c


def _parse_waves(obj: dict, path: str) -> WaveSpec:
    obj = _require_dict(obj, path)
    _check_keys(obj, {"components", "gravity", "orbital_coupling"}, path)
    w = WaveSpec()
    w.gravity = _get(obj, "gravity", float, path, w.gravity)
    w.orbital_coupling = _get(obj, "orbital_coupling", bool, path,
                              w.orbital_coupling)
    comps = _get(obj, "components", list, path, [])
    for i, c in enumerate(comps):
        cpath = f"{path}.components[{i}]"
        c = _require_dict(c, cpath)
        _check_keys(c, {"amplitude", "wavelength", "direction", "phase",
                        "steepness"}, cpath)
        w.components.append(WaveComponentSpec(
            amplitude=_get(c, "amplitude", float, cpath),
            wavelength=_get(c, "wavelength", float, cpath),
            direction=_vec(c, "direction", 2, cpath, (1.0, 0.0)),
            phase=_get(c, "phase", float, cpath, 0.0),
            steepness=_get(c, "steepness", float, cpath, 0.0),
        ))
    return w


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse a scenario JSON document into a fully defaulted config.

    Raises ScenarioError with a position for syntax errors and with a
    field path for schema errors. Unknown fields are rejected.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    doc = _require_dict(doc, "$")
    _check_keys(doc, {"name", "ticks_per_sec", "duration_ticks", "world",
                      "agents", "current", "waves", "bridge", "rng_seed"}, "$")
    config = ScenarioConfig(
        name=_get(doc, "name", str, "$"),
        ticks_per_sec=_get(doc, "ticks_per_sec", float, "$"),
        duration_ticks=_get(doc, "duration_ticks", int, "$"),
        world=_parse_world(_get(doc, "world", dict, "$"), "$.world"),
        rng_seed=_get(doc, "rng_seed", int, "$", 0),
    )
    agents = _get(doc, "agents", list, "$")
    config.agents = [_parse_agent(a, f"$.agents[{i}]")
                     for i, a in enumerate(agents)]
    if "current" in doc:
        config.current = _parse_current(doc["current"], "$.current")
    if "waves" in doc:
        config.waves = _parse_waves(doc["waves"], "$.waves")
    if "bridge" in doc:
        b = _require_dict(doc["bridge"], "$.bridge")
        _check_keys(b, {"port", "topics"}, "$.bridge")
        topics = _get(b, "topics", list, "$.bridge", ["*"])
        if any(not isinstance(t, str) for t in topics):
            raise ScenarioError("$.bridge.topics: expected an array of strings")
        config.bridge = BridgeSpec(
            port=_get(b, "port", int, "$.bridge", DEFAULT_BRIDGE_PORT),
            topics=tuple(topics),
        )
    if config.rng_seed < 0 or config.rng_seed > 0xFFFFFFFFFFFFFFFF:
        raise ScenarioError("$.rng_seed: must fit in 64 unsigned bits")
    return config


def load_scenario(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


# ---------------------------------------------------------------------------
# validation


def validate(config: ScenarioConfig) -> list:
    """Semantic validation; returns Violations rather than raising."""
    out = []
    if config.ticks_per_sec <= 0:
        out.append(Violation("$.ticks_per_sec", "must be positive"))
    if config.duration_ticks < 1:
        out.append(Violation("$.duration_ticks", "must be at least 1"))
    seen = {}
    for i, agent in enumerate(config.agents):
        path = f"$.agents[{i}]"
        if agent.name in seen:
            out.append(Violation(f"{path}.name",
                                 f"duplicate agent name {agent.name!r}"))
        seen[agent.name] = i
        if config.current is not None and agent.per_agent_current is not None:
            out.append(Violation(
                f"{path}.per_agent_current",
                "per-agent current is mutually exclusive with a world-level "
                "current field"))
        for msg in agent.params.validate():
            out.append(Violation(f"{path}.params", msg))
        for j, sensor in enumerate(agent.sensors):
            spath = f"{path}.sensors[{j}]"
            if sensor.rate_ticks < 1:
                out.append(Violation(f"{spath}.rate_ticks", "must be >= 1"))
            if sensor.max_range <= 0:
                out.append(Violation(f"{spath}.max_range", "must be positive"))
            if sensor.n_beams < 1 or sensor.n_lasers < 1 or sensor.n_bins < 1:
                out.append(Violation(spath, "beam/bin counts must be >= 1"))
    if config.world.kind == "generate" and config.world.gen is not None:
        g = config.world.gen
        if g.density < 0:
            out.append(Violation("$.world.gen.density", "must be non-negative"))
        if g.density > 0 and not g.prop_classes:
            out.append(Violation("$.world.gen.prop_classes",
                                 "required when density is positive"))
    if config.waves is not None:
        for i, c in enumerate(config.waves.components):
            cpath = f"$.waves.components[{i}]"
            if c.wavelength <= 0:
                out.append(Violation(f"{cpath}.wavelength", "must be positive"))
            else:
                k = 2.0 * 3.141592653589793 / c.wavelength
                if not (0.0 <= c.steepness <= 1.0) or c.steepness * k * c.amplitude > 1.0:
                    out.append(Violation(
                        f"{cpath}.steepness",
                        "steepness * k * amplitude must lie in [0, 1]"))
    return out


# ---------------------------------------------------------------------------
# serialization (exact round-trip)


def _fin_to_obj(f: FinSpec) -> dict:
    return {
        "name": f.name, "position": list(f.position),
        "lift_axis": list(f.lift_axis), "area": f.area,
        "lift_coefficient": f.lift_coefficient,
        "time_constant": f.time_constant, "max_deflection": f.max_deflection,
    }


def _params_to_obj(p: VehicleParams) -> dict:
    env = {"water_density": p.environmental.water_density,
           "gravity": p.environmental.gravity}
    if p.environmental.per_agent_current is not None:
        env["per_agent_current"] = list(p.environmental.per_agent_current)
    return {
        "environmental": env,
        "physical": {
            "mass": p.physical.mass, "length": p.physical.length,
            "diameter": p.physical.diameter,
            "inertia": [list(r) for r in p.physical.inertia],
            "added_mass": list(p.physical.added_mass),
        },
        "hydrodynamic": {
            "linear_damping": list(p.hydrodynamic.linear_damping),
            "quadratic_damping": list(p.hydrodynamic.quadratic_damping),
        },
        "hydrostatic": {
            "r_cg": list(p.hydrostatic.r_cg), "r_cb": list(p.hydrostatic.r_cb),
            "displaced_volume": p.hydrostatic.displaced_volume,
        },
        "control_surfaces": {
            "fins": [_fin_to_obj(f) for f in p.control_surfaces.fins],
            "thrust_coefficient": p.control_surfaces.thrust_coefficient,
            "prop_diameter": p.control_surfaces.prop_diameter,
            "max_prop_speed": p.control_surfaces.max_prop_speed,
        },
        "autopilot": {f.name: getattr(p.autopilot, f.name)
                      for f in dc_fields(AutopilotParams)},
    }


def _sensor_to_obj(s: SensorSpec) -> dict:
    return {f.name: (list(getattr(s, f.name))
                     if isinstance(getattr(s, f.name), tuple)
                     else getattr(s, f.name))
            for f in dc_fields(SensorSpec)}


def config_to_obj(config: ScenarioConfig) -> dict:
    w = config.world
    world = {"kind": w.kind, "depth": w.depth, "size_m": list(w.size_m),
             "cell_size": w.cell_size, "origin": list(w.origin)}
    if w.path is not None:
        world["path"] = w.path
    if w.gen is not None:
        world["gen"] = {
            "terrain": w.gen.terrain, "size_m": list(w.gen.size_m),
            "cell_size": w.gen.cell_size, "base_depth": w.gen.base_depth,
            "amplitude": w.gen.amplitude, "density": w.gen.density,
            "prop_classes": [
                {"name": c.name, "class_id": c.class_id, "size": c.size,
                 "shape": c.shape}
                for c in w.gen.prop_classes],
        }
    doc: dict = {
        "name": config.name,
        "ticks_per_sec": config.ticks_per_sec,
        "duration_ticks": config.duration_ticks,
        "rng_seed": config.rng_seed,
        "world": world,
        "agents": [],
    }
    for a in config.agents:
        agent = {
            "name": a.name, "model": a.model,
            "params": _params_to_obj(a.params),
            "initial_pose": list(a.initial_pose),
            "initial_velocity": list(a.initial_velocity),
            "sensors": [_sensor_to_obj(s) for s in a.sensors],
        }
        if a.per_agent_current is not None:
            agent["per_agent_current"] = list(a.per_agent_current)
        doc["agents"].append(agent)
    if config.current is not None:
        c = config.current
        cur = {"kind": c.kind, "vector": list(c.vector),
               "surface_velocity": list(c.surface_velocity),
               "decay_depth": c.decay_depth}
        if c.path is not None:
            cur["path"] = c.path
        doc["current"] = cur
    if config.waves is not None:
        doc["waves"] = {
            "gravity": config.waves.gravity,
            "orbital_coupling": config.waves.orbital_coupling,
            "components": [
                {"amplitude": c.amplitude, "wavelength": c.wavelength,
                 "direction": list(c.direction), "phase": c.phase,
                 "steepness": c.steepness}
                for c in config.waves.components],
        }
    if config.bridge is not None:
        doc["bridge"] = {"port": config.bridge.port,
                         "topics": list(config.bridge.topics)}
    return doc


def serialize(config: ScenarioConfig) -> str:
    return json.dumps(config_to_obj(config), indent=2, sort_keys=True)
