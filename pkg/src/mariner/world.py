"""Simulated environment: bathymetry heightfield plus semantically tagged
triangle-mesh props, with runtime spawning and seeded procedural generation.

Depth is positive down (NED); the undisturbed sea surface is z = 0.
The heightfield node (i, j) sits at (origin_x + i*cell, origin_y + j*cell),
i along north/x and j along east/y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .frames import euler_to_rot
from .rng import Xoshiro256


class WorldError(ValueError):
    pass


@dataclass(frozen=True)
class SemanticLabel:
    class_id: int = 0  # 0 is reserved for "unlabeled"
    instance_id: int = 0

    def __post_init__(self):
        if self.class_id < 0:
            raise WorldError("class_id must be non-negative")


TERRAIN_LABEL = SemanticLabel(class_id=1, instance_id=0)


@dataclass
class Heightfield:
    origin: tuple  # (x0, y0) m
    cell_size: float  # m
    depth: np.ndarray  # (nx, ny), m positive down

    def __post_init__(self):
        self.depth = np.asarray(self.depth, dtype=float)
        nx, ny = self.depth.shape
        if nx < 2 or ny < 2:
            raise WorldError("heightfield needs at least 2x2 nodes")
        if self.cell_size <= 0:
            raise WorldError("cell_size must be positive")
        if not np.all(np.isfinite(self.depth)):
            raise WorldError("heightfield depths must all be finite")
        self.label = TERRAIN_LABEL

    @property
    def nx(self) -> int:
        return self.depth.shape[0]

    @property
    def ny(self) -> int:
        return self.depth.shape[1]

    @property
    def extent(self) -> tuple:
        """((xmin, xmax), (ymin, ymax)) of the grid footprint."""
        x0, y0 = self.origin
        return ((x0, x0 + (self.nx - 1) * self.cell_size),
                (y0, y0 + (self.ny - 1) * self.cell_size))


def height_at(hf: Heightfield, x: float, y: float) -> float:
    """Bilinear depth interpolation; exact at nodes; raises out of bounds."""
    (xmin, xmax), (ymin, ymax) = hf.extent
    if not (xmin <= x <= xmax and ymin <= y <= ymax):
        raise WorldError(f"height query ({x}, {y}) outside grid footprint")
    fx = (x - xmin) / hf.cell_size
    fy = (y - ymin) / hf.cell_size
    i = min(int(fx), hf.nx - 2)
    j = min(int(fy), hf.ny - 2)
    tx = fx - i
    ty = fy - j
    d = hf.depth
    return ((1 - tx) * (1 - ty) * d[i, j] + tx * (1 - ty) * d[i + 1, j]
            + (1 - tx) * ty * d[i, j + 1] + tx * ty * d[i + 1, j + 1])


def load_bathymetry(path, cell_size: float | None = None,
                    origin: tuple | None = None) -> Heightfield:
    """Load an Esri ASCII grid (.asc). Header cellsize/corner values are
    used unless explicitly overridden by the arguments."""
    header = {}
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    idx = 0
    while idx < len(lines):
        parts = lines[idx].split()
        if len(parts) == 2 and parts[0].lower() in (
                "ncols", "nrows", "xllcorner", "yllcorner", "cellsize",
                "nodata_value"):
            header[parts[0].lower()] = float(parts[1])
            idx += 1
        else:
            break
    if "ncols" not in header or "nrows" not in header:
        raise WorldError(f"{path}: missing ncols/nrows header")
    ncols = int(header["ncols"])
    nrows = int(header["nrows"])
    nodata = header.get("nodata_value")
    for r, line in enumerate(lines[idx:]):
        parts = line.split()
        if len(parts) != ncols:
            raise WorldError(
                f"{path}: row {r} has {len(parts)} values, expected {ncols}")
        vals = []
        for c, tok in enumerate(parts):
            try:
                v = float(tok)
            except ValueError:
                raise WorldError(
                    f"{path}: non-numeric cell at row {r}, col {c}: {tok!r}")
            if not math.isfinite(v) or (nodata is not None and v == nodata):
                raise WorldError(f"{path}: malformed cell at row {r}, col {c}")
            vals.append(v)
        rows.append(vals)
    if len(rows) != nrows:
        raise WorldError(f"{path}: expected {nrows} data rows, got {len(rows)}")
    cs = cell_size if cell_size is not None else header.get("cellsize", 1.0)
    if origin is None:
        origin = (header.get("xllcorner", 0.0), header.get("yllcorner", 0.0))
    return Heightfield(origin=tuple(origin), cell_size=cs,
                       depth=np.array(rows, dtype=float))


# ---------------------------------------------------------------------------
# props


@dataclass
class Prop:
    id: int
    vertices: np.ndarray  # (n, 3) local frame
    triangles: np.ndarray  # (m, 3) vertex indices
    pose: np.ndarray  # 6-vector
    label: SemanticLabel
    generation: int
    world_vertices: np.ndarray = field(init=False)
    aabb: tuple = field(init=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=int)
        self.pose = np.asarray(self.pose, dtype=float)
        if self.triangles.size == 0:
            raise WorldError("prop mesh must contain at least one triangle")
        if not np.all(np.isfinite(self.vertices)):
            raise WorldError("prop vertices must be finite")
        R = euler_to_rot(self.pose[3], self.pose[4], self.pose[5])
        self.world_vertices = self.vertices @ R.T + self.pose[:3]
        self.aabb = (self.world_vertices.min(axis=0),
                     self.world_vertices.max(axis=0))


def box_mesh(size: float):
    """Axis-aligned cube of edge `size` centered at the local origin."""
    h = size / 2.0
    v = np.array([[sx, sy, sz] for sx in (-h, h) for sy in (-h, h)
                  for sz in (-h, h)])
    t = np.array([
        [0, 1, 3], [0, 3, 2],  # -x
        [4, 7, 5], [4, 6, 7],  # +x
        [0, 5, 1], [0, 4, 5],  # -y
        [2, 3, 7], [2, 7, 6],  # +y
        [0, 2, 6], [0, 6, 4],  # -z
        [1, 5, 7], [1, 7, 3],  # +z
    ])
    return v, t

def pyramid_mesh(size: float):
    """Square pyramid, apex up (-z), base edge and height `size`."""
    h = size / 2.0
    v = np.array([[-h, -h, h], [h, -h, h], [h, h, h], [-h, h, h],
                  [0.0, 0.0, -h]])
    t = np.array([[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4],
                  [0, 2, 1], [0, 3, 2]])
    return v, t


@dataclass
class World:
    heightfield: Heightfield
    props: list = field(default_factory=list)
    revision: int = 0
    _next_prop_id: int = 1
    _next_generation: int = 1

    def bounds(self) -> tuple:
        """(lo, hi) 3-vectors of an AABB covering terrain and props."""
        (xmin, xmax), (ymin, ymax) = self.heightfield.extent
        zmin = -1.0
        zmax = float(self.heightfield.depth.max()) + 1.0
        lo = np.array([xmin, ymin, zmin])
        hi = np.array([xmax, ymax, zmax])
        for p in self.props:
            lo = np.minimum(lo, p.aabb[0])
            hi = np.maximum(hi, p.aabb[1])
        return lo, hi

    def prop_by_id(self, pid: int):
        for p in self.props:
            if p.id == pid:
                return p
        return None


def spawn_prop(world: World, vertices, triangles, pose, label: SemanticLabel) -> int:
    """Add a mesh prop; returns a fresh id and bumps the world revision."""
    prop = Prop(id=world._next_prop_id, vertices=vertices, triangles=triangles,
                pose=np.asarray(pose, dtype=float), label=label,
                generation=world._next_generation)
    world._next_prop_id += 1
    world._next_generation += 1
    world.props.append(prop)
    world.revision += 1
    return prop.id


def remove_prop(world: World, pid: int) -> bool:
    for i, p in enumerate(world.props):
        if p.id == pid:
            del world.props[i]
            world.revision += 1
            return True
    return False


# ---------------------------------------------------------------------------
# procedural generation


def _terrain_depth(gen, rng: Xoshiro256) -> Heightfield:
    nx = int(round(gen.size_m[0] / gen.cell_size)) + 1
    ny = int(round(gen.size_m[1] / gen.cell_size)) + 1
    x = np.arange(nx) * gen.cell_size
    y = np.arange(ny) * gen.cell_size
    X, Y = np.meshgrid(x, y, indexing="ij")
    depth = np.full((nx, ny), gen.base_depth, dtype=float)
    if gen.terrain == "hills" and gen.amplitude > 0:
        # sum of seeded sinusoidal ridges; smooth, bounded by amplitude
        n_waves = 6
        acc = np.zeros_like(depth)
        for _ in range(n_waves):
            ang = rng.uniform(0.0, 2.0 * math.pi)
            wavelength = rng.uniform(0.15, 0.6) * max(gen.size_m)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            k = 2.0 * math.pi / wavelength
            acc += np.sin(k * (X * math.cos(ang) + Y * math.sin(ang)) + phase)
        acc /= n_waves
        depth += gen.amplitude * acc
    return Heightfield(origin=(0.0, 0.0), cell_size=gen.cell_size, depth=depth)


def generate_world(gen, seed: int) -> World:
    """Deterministically generate a world from (spec, seed).

    Prop placement is Poisson in count (clamped to +-20% of the expected
    density * area so the contract holds for every seed) and uniform in
    position; each prop rests on the local seafloor.
    """
    if gen.density < 0:
        raise WorldError("density must be non-negative")
    if gen.density > 0 and not gen.prop_classes:
        raise WorldError("prop classes required when density is positive")
    rng = Xoshiro256(seed)
    hf = _terrain_depth(gen, rng)
    world = World(heightfield=hf)
    area = gen.size_m[0] * gen.size_m[1]
    expected = gen.density * area / 100.0
    if expected > 0:
        count = rng.poisson(expected)
        count = max(count, int(math.ceil(0.8 * expected)))
        count = min(count, int(math.floor(1.2 * expected)))
        (xmin, xmax), (ymin, ymax) = hf.extent
        for _ in range(count):
            cls = gen.prop_classes[rng.randint(len(gen.prop_classes))]
            margin = cls.size
            px = rng.uniform(xmin + margin, xmax - margin)
            py = rng.uniform(ymin + margin, ymax - margin)
            yaw = rng.uniform(0.0, 2.0 * math.pi)
            floor = height_at(hf, px, py)
            if cls.shape == "pyramid":
                verts, tris = pyramid_mesh(cls.size)
            else:
                verts, tris = box_mesh(cls.size)
            # rest the lowest vertex on the local seafloor
            pz = floor - cls.size / 2.0
            label = SemanticLabel(class_id=cls.class_id,
                                  instance_id=world._next_prop_id)
            spawn_prop(world, verts, tris, (px, py, pz, 0.0, 0.0, yaw), label)
        world.revision = 0  # generation is construction, not mutation
    return world


def flat_world(depth: float, size_m=(100.0, 100.0), cell_size: float = 1.0,
               origin=(0.0, 0.0)) -> World:
    nx = int(round(size_m[0] / cell_size)) + 1
    ny = int(round(size_m[1] / cell_size)) + 1
    hf = Heightfield(origin=tuple(origin), cell_size=cell_size,
                     depth=np.full((nx, ny), float(depth)))
    return World(heightfield=hf)
