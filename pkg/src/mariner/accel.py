"""Spatial ray-query backends: a cached surface octree and a direct ray
caster, behind one Ray -> Hit contract, plus benchmark instrumentation.

The direct caster is exact: heightfield cells are intersected as bilinear
patches (the along-ray root equation is quadratic and solved in closed
form) and prop triangles via Moller-Trumbore with an AABB prefilter.
The octree caches surface-occupied leaves and answers queries by voxel
DDA over the leaf lattice; it trades memory for per-query work and must
be rebuilt when the world changes - a stale tree is a hard error.
"""

from __future__ import annotations

import json
import math
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .world import Heightfield, SemanticLabel, World, height_at

_EPS = 1e-12


class AccelError(ValueError):
    pass


class StaleOctreeError(RuntimeError):
    """The world changed since the octree was built; rebuild required."""


@dataclass
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    max_range: float

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.direction = np.asarray(self.direction, dtype=float)
        n = float(np.linalg.norm(self.direction))
        if abs(n - 1.0) > 1e-9:
            raise AccelError(f"ray direction must be unit length (|d| = {n})")
        if self.max_range <= 0:
            raise AccelError("max_range must be positive")


@dataclass
class Hit:
    range: float
    point: np.ndarray
    normal: np.ndarray
    label: SemanticLabel


class QueryStats:
    """Monotone counters; safe to update from concurrent workers."""

    def __init__(self):
        self.rays_cast = 0
        self.wall_time = 0.0
        self.bytes_resident = 0
        self._lock = threading.Lock()

    def add(self, rays: int = 0, seconds: float = 0.0) -> None:
        with self._lock:
            self.rays_cast += rays
            self.wall_time += seconds


# ---------------------------------------------------------------------------
# direct ray casting


def _heightfield_intersect(hf: Heightfield, ray: Ray):
    """First bilinear-patch intersection along the ray, or None.

    Marches the 2-D cell lattice with a DDA and solves the quadratic
    z(t) = depth(x(t), y(t)) inside each visited cell.
    """
    ox, oy, oz = ray.origin
    dx, dy, dz = ray.direction
    (xmin, xmax), (ymin, ymax) = hf.extent
    cell = hf.cell_size
    d = hf.depth

    # clip the ray to the footprint in x and y
    t0, t1 = 0.0, ray.max_range
    for o, dd, lo, hi in ((ox, dx, xmin, xmax), (oy, dy, ymin, ymax)):
        if abs(dd) < _EPS:
            if o < lo or o > hi:
                return None
        else:
            ta = (lo - o) / dd
            tb = (hi - o) / dd
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
    if t0 > t1:
        return None

    def solve_cell(i, j, ta, tb):
        # bilinear surface over cell (i, j); roots of z(t) - h(t) = 0
        x_i = xmin + i * cell
        y_j = ymin + j * cell
        d00 = d[i, j]
        b = d[i + 1, j] - d00
        c2 = d[i, j + 1] - d00
        e = d[i + 1, j + 1] - d[i + 1, j] - d[i, j + 1] + d00
        s0 = (ox - x_i) / cell
        ds = dx / cell
        tt0 = (oy - y_j) / cell
        dt = dy / cell
        h0 = d00 + b * s0 + c2 * tt0 + e * s0 * tt0
        h1 = b * ds + c2 * dt + e * (s0 * dt + tt0 * ds)
        h2 = e * ds * dt
        A = -h2
        B = dz - h1
        C = oz - h0
        roots = []
        if abs(A) < 1e-14:
            if abs(B) > _EPS:
                roots.append(-C / B)
        else:
            disc = B * B - 4.0 * A * C
            if disc >= 0.0:
                sq = math.sqrt(disc)
                roots.extend(((-B - sq) / (2 * A), (-B + sq) / (2 * A)))
        best = None
        pad = 1e-9
        for t in sorted(roots):
            if ta - pad <= t <= tb + pad and t >= 0.0:
                best = t
                break
        if best is None:
            return None
        s = s0 + best * ds
        tc = tt0 + best * dt
        hx = (b + e * tc) / cell
        hy = (c2 + e * s) / cell
        normal = np.array([hx, hy, -1.0])
        normal /= np.linalg.norm(normal)
        point = ray.origin + best * ray.direction
        return Hit(range=best, point=point, normal=normal, label=hf.label)

    # 2-D DDA over cells
    px = ox + t0 * dx
    py = oy + t0 * dy
    i = min(max(int((px - xmin) / cell), 0), hf.nx - 2)
    j = min(max(int((py - ymin) / cell), 0), hf.ny - 2)
    step_i = 1 if dx > 0 else -1
    step_j = 1 if dy > 0 else -1
    inf = math.inf
    t_max_x = inf if abs(dx) < _EPS else (
        (xmin + (i + (1 if dx > 0 else 0)) * cell - ox) / dx)
    t_max_y = inf if abs(dy) < _EPS else (
        (ymin + (j + (1 if dy > 0 else 0)) * cell - oy) / dy)
    t_dx = inf if abs(dx) < _EPS else cell / abs(dx)
    t_dy = inf if abs(dy) < _EPS else cell / abs(dy)

    t_cur = t0
    while t_cur <= t1 + 1e-9:
        t_next = min(t_max_x, t_max_y, t1)
        hit = solve_cell(i, j, t_cur, t_next)
        if hit is not None:
            return hit
        if t_next >= t1:
            return None
        if t_max_x < t_max_y:
            i += step_i
            t_cur = t_max_x
            t_max_x += t_dx
            if i < 0 or i > hf.nx - 2:
                return None
        else:
            j += step_j
            t_cur = t_max_y
            t_max_y += t_dy
            if j < 0 or j > hf.ny - 2:
                return None
    return None


def _prop_aabbs(world: World):
    """Stacked prop AABBs, cached on the world object per revision."""
    cache = getattr(world, "_aabb_cache", None)
    if cache is not None and cache[0] == world.revision:
        return cache[1], cache[2]
    if world.props:
        lo = np.stack([p.aabb[0] for p in world.props])
        hi = np.stack([p.aabb[1] for p in world.props])
    else:
        lo = np.zeros((0, 3))
        hi = np.zeros((0, 3))
    world._aabb_cache = (world.revision, lo, hi)
    return lo, hi


def _ray_aabb_mask(lo, hi, ray: Ray):
    """Vectorized slab test over stacked AABBs; returns a boolean mask."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / ray.direction
        ta = (lo - ray.origin) * inv
        tb = (hi - ray.origin) * inv
    tnear = np.minimum(ta, tb)
    tfar = np.maximum(ta, tb)
    # axes with zero direction: inside the slab iff origin within bounds
    zero = np.abs(ray.direction) < _EPS
    if zero.any():
        inside = (lo[:, zero] <= ray.origin[zero]) & (ray.origin[zero] <= hi[:, zero])
        tnear[:, zero] = np.where(inside, -np.inf, np.inf)
        tfar[:, zero] = np.where(inside, np.inf, -np.inf)
    t0 = np.max(tnear, axis=1)
    t1 = np.min(tfar, axis=1)
    return (t0 <= t1) & (t1 >= 0.0) & (t0 <= ray.max_range)


def _triangles_intersect(prop, ray: Ray):
    """Closest Moller-Trumbore hit against one prop's triangles, or None."""
    v = prop.world_vertices
    tri = prop.triangles
    p0 = v[tri[:, 0]]
    e1 = v[tri[:, 1]] - p0
    e2 = v[tri[:, 2]] - p0
    dirv = ray.direction
    pvec = np.cross(dirv, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    mask = np.abs(det) > 1e-12
    if not mask.any():
        return None
    inv_det = np.zeros_like(det)
    inv_det[mask] = 1.0 / det[mask]
    tvec = ray.origin - p0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv_det
    qvec = np.cross(tvec, e1)
    vv = np.einsum("j,ij->i", dirv, qvec)
    vv = vv * inv_det
    t = np.einsum("ij,ij->i", e2, qvec) * inv_det
    ok = (mask & (u >= -1e-12) & (vv >= -1e-12) & (u + vv <= 1.0 + 1e-12)
          & (t > 1e-9) & (t <= ray.max_range))
    if not ok.any():
        return None
    idx = np.argmin(np.where(ok, t, np.inf))
    tr = float(t[idx])
    n = np.cross(e1[idx], e2[idx])
    n /= np.linalg.norm(n)
    if np.dot(n, dirv) > 0:
        n = -n  # face the incoming ray
    point = ray.origin + tr * dirv
    return Hit(range=tr, point=point, normal=n, label=prop.label)


def direct_cast(world: World, ray: Ray, stats: QueryStats | None = None):
    """Exact first intersection against terrain and props; None on miss."""
    t_start = time.perf_counter()
    best = _heightfield_intersect(world.heightfield, ray)
    if world.props:
        lo, hi = _prop_aabbs(world)
        mask = _ray_aabb_mask(lo, hi, ray)
        for pidx in np.nonzero(mask)[0]:
            hit = _triangles_intersect(world.props[pidx], ray)
            if hit is not None and (best is None or hit.range < best.range):
                best = hit
    if stats is not None:
        stats.add(rays=1, seconds=time.perf_counter() - t_start)
    return best


# ---------------------------------------------------------------------------
# octree backend


@dataclass
class Octree:
    root_lo: np.ndarray
    leaf_size: float
    dims: tuple  # leaf lattice dimensions (nx, ny, nz)
    leaves: dict  # (i, j, k) -> (unit normal ndarray, SemanticLabel)
    built_from_revision: int
    memory_bytes: int
    world: World = field(repr=False, default=None)

    def is_stale(self) -> bool:
        return self.world is not None and self.world.revision != self.built_from_revision

    def serialize(self, path) -> None:
        """Write the leaf set to disk (benchmark caching-run artifact)."""
        payload = {
            "root_lo": list(map(float, self.root_lo)),
            "leaf_size": self.leaf_size,
            "dims": list(self.dims),
            "revision": self.built_from_revision,
            "leaves": [
                [int(i), int(j), int(k), float(n[0]), float(n[1]), float(n[2]),
                 lbl.class_id, lbl.instance_id]
                for (i, j, k), (n, lbl) in self.leaves.items()],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)


def _tri_box_overlap(center, half, p0, p1, p2) -> bool:
    """Separating-axis triangle/AABB test (Akenine-Moller).

    Tests are padded by a small epsilon so triangles lying exactly on a
    leaf face (common with axis-aligned meshes at round coordinates)
    count as overlapping instead of falling through a rounding gap.
    """
    pad = 1e-9
    v0 = p0 - center
    v1 = p1 - center
    v2 = p2 - center
    # box axes
    for ax in range(3):
        lo = min(v0[ax], v1[ax], v2[ax])
        hi = max(v0[ax], v1[ax], v2[ax])
        if lo > half[ax] + pad or hi < -half[ax] - pad:
            return False
    e0 = v1 - v0
    e1 = v2 - v1
    e2 = v0 - v2
    n = np.cross(e0, e1)
    dist = abs(np.dot(n, v0))
    r = half[0] * abs(n[0]) + half[1] * abs(n[1]) + half[2] * abs(n[2])
    if dist > r + pad:
        return False
    # 9 cross-product axes
    for edge in (e0, e1, e2):
        for ax in range(3):
            a = np.zeros(3)
            a[ax] = 1.0
            axis = np.cross(edge, a)
            if np.dot(axis, axis) < 1e-18:
                continue
            p = np.array([np.dot(axis, v0), np.dot(axis, v1), np.dot(axis, v2)])
            r = (half[0] * abs(axis[0]) + half[1] * abs(axis[1])
                 + half[2] * abs(axis[2]))
            if p.min() > r + pad or p.max() < -r - pad:
                return False
    return True


def build_octree(world: World, leaf_size: float) -> Octree:
    """Mark every leaf intersected by the terrain surface or a prop
    triangle; stores a representative normal and the dominant label."""
    if leaf_size <= 0:
        raise AccelError("leaf_size must be positive")
    lo, hi = world.bounds()
    extent = hi - lo
    if leaf_size > max(extent):
        raise AccelError("leaf_size is coarser than the world bounding box")
    dims = tuple(int(math.ceil(max(e, leaf_size) / leaf_size)) for e in extent)
    leaves: dict = {}

    def mark(i, j, k, normal, label):
        if (0 <= i < dims[0]) and (0 <= j < dims[1]) and (0 <= k < dims[2]):
            key = (i, j, k)
            entry = leaves.get(key)
            if entry is None:
                leaves[key] = [np.array(normal, dtype=float), label]
            else:
                entry[0] += normal

    hf = world.heightfield
    (xmin, xmax), (ymin, ymax) = hf.extent
    cell = hf.cell_size
    d = hf.depth
    nlx = dims[0]
    nly = dims[1]
    for ci in range(hf.nx - 1):
        x_a = xmin + ci * cell
        d00 = d[ci, :]
        for cj in range(hf.ny - 1):
            y_a = ymin + cj * cell
            z00 = d[ci, cj]
            z10 = d[ci + 1, cj]
            z01 = d[ci, cj + 1]
            z11 = d[ci + 1, cj + 1]
            li0 = max(int((x_a - lo[0]) / leaf_size), 0)
            li1 = min(int(math.ceil((x_a + cell - lo[0]) / leaf_size)), nlx)
            lj0 = max(int((y_a - lo[1]) / leaf_size), 0)
            lj1 = min(int(math.ceil((y_a + cell - lo[1]) / leaf_size)), nly)
            for li in range(li0, li1):
                ox0 = max(x_a, lo[0] + li * leaf_size)
                ox1 = min(x_a + cell, lo[0] + (li + 1) * leaf_size)
                if ox1 - ox0 <= 1e-12:
                    continue
                s0 = (ox0 - x_a) / cell
                s1 = (ox1 - x_a) / cell
                for lj in range(lj0, lj1):
                    oy0 = max(y_a, lo[1] + lj * leaf_size)
                    oy1 = min(y_a + cell, lo[1] + (lj + 1) * leaf_size)
                    if oy1 - oy0 <= 1e-12:
                        continue
                    t0 = (oy0 - y_a) / cell
                    t1 = (oy1 - y_a) / cell
                    # bilinear extrema over a rectangle occur at its corners
                    zs = [z00 * (1 - s) * (1 - t) + z10 * s * (1 - t)
                          + z01 * (1 - s) * t + z11 * s * t
                          for s in (s0, s1) for t in (t0, t1)]
                    zlo, zhi = min(zs), max(zs)
                    k0 = int((zlo - lo[2]) / leaf_size)
                    k1 = int((zhi - lo[2]) / leaf_size)
                    sm = 0.5 * (s0 + s1)
                    tm = 0.5 * (t0 + t1)
                    hx = ((z10 - z00) + (z11 - z10 - z01 + z00) * tm) / cell
                    hy = ((z01 - z00) + (z11 - z10 - z01 + z00) * sm) / cell
                    nrm = np.array([hx, hy, -1.0])
                    nrm /= np.linalg.norm(nrm)
                    for k in range(k0, k1 + 1):
                        mark(li, lj, k, nrm, hf.label)

    half_unit = np.full(3, leaf_size / 2.0)
    for prop in world.props:
        v = prop.world_vertices
        for tri in prop.triangles:
            p0, p1, p2 = v[tri[0]], v[tri[1]], v[tri[2]]
            n = np.cross(p1 - p0, p2 - p0)
            nn = np.linalg.norm(n)
            if nn < 1e-15:
                continue
            n = n / nn
            tlo = np.minimum(np.minimum(p0, p1), p2)
            thi = np.maximum(np.maximum(p0, p1), p2)
            i0 = np.maximum(((tlo - lo) / leaf_size).astype(int), 0)
            i1 = np.minimum(np.ceil((thi - lo) / leaf_size).astype(int),
                            np.array(dims))
            for li in range(i0[0], max(i1[0], i0[0] + 1)):
                for lj in range(i0[1], max(i1[1], i0[1] + 1)):
                    for lk in range(i0[2], max(i1[2], i0[2] + 1)):
                        center = lo + (np.array([li, lj, lk]) + 0.5) * leaf_size
                        if _tri_box_overlap(center, half_unit, p0, p1, p2):
                            mark(li, lj, lk, n, prop.label)

    for entry in leaves.values():
        nn = np.linalg.norm(entry[0])
        if nn > 0:
            entry[0] = entry[0] / nn
    # accounting: key tuple + normal + label per leaf
    memory = len(leaves) * (3 * 8 + 3 * 8 + 2 * 8) + 64
    return Octree(root_lo=lo, leaf_size=leaf_size, dims=dims, leaves=leaves,
                  built_from_revision=world.revision, memory_bytes=memory,
                  world=world)


def octree_cast(tree: Octree, ray: Ray, stats: QueryStats | None = None):
    """First occupied leaf along the ray via voxel DDA; None on miss.

    Raises StaleOctreeError if the world changed since the build - stale
    cached geometry must never be silently returned.
    """
    if tree.is_stale():
        raise StaleOctreeError(
            f"octree built at revision {tree.built_from_revision}, world is at "
            f"revision {tree.world.revision}; rebuild required")
    t_start = time.perf_counter()
    lo = tree.root_lo
    leaf = tree.leaf_size
    dims = tree.dims
    hix = lo + np.array(dims) * leaf
    ox, oy, oz = ray.origin
    dx, dy, dz = ray.direction

    # clip to the lattice bounds
    t0, t1 = 0.0, ray.max_range
    for o, dd, lo_a, hi_a in ((ox, dx, lo[0], hix[0]), (oy, dy, lo[1], hix[1]),
                              (oz, dz, lo[2], hix[2])):
        if abs(dd) < _EPS:
            if o < lo_a or o > hi_a:
                t0, t1 = 1.0, 0.0
                break
        else:
            ta = (lo_a - o) / dd
            tb = (hi_a - o) / dd
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
    result = None
    if t0 <= t1:
        eps = 1e-9
        px = ox + (t0 + eps) * dx
        py = oy + (t0 + eps) * dy
        pz = oz + (t0 + eps) * dz
        i = min(max(int((px - lo[0]) / leaf), 0), dims[0] - 1)
        j = min(max(int((py - lo[1]) / leaf), 0), dims[1] - 1)
        k = min(max(int((pz - lo[2]) / leaf), 0), dims[2] - 1)
        step = [1 if dv > 0 else -1 for dv in (dx, dy, dz)]
        inf = math.inf
        t_max = []
        t_delta = []
        for axis, (o, dv) in enumerate(((ox, dx), (oy, dy), (oz, dz))):
            if abs(dv) < _EPS:
                t_max.append(inf)
                t_delta.append(inf)
            else:
                idx = (i, j, k)[axis] + (1 if dv > 0 else 0)
                t_max.append((lo[axis] + idx * leaf - o) / dv)
                t_delta.append(leaf / abs(dv))
        t_enter = t0
        leaves = tree.leaves
        while t_enter <= t1:
            entry = leaves.get((i, j, k))
            if entry is not None:
                # refine against the leaf's surface plane (center + stored
                # normal): the occupied band is a leaf thick, so the raw
                # entry distance overshoots badly on oblique rays, while
                # the plane crossing is first-order accurate in leaf_size.
                normal, label = entry
                t_exit = min(min(t_max), t1)
                cx = lo[0] + (i + 0.5) * leaf
                cy = lo[1] + (j + 0.5) * leaf
                cz = lo[2] + (k + 0.5) * leaf
                s0 = ((ox + t_enter * dx - cx) * normal[0]
                      + (oy + t_enter * dy - cy) * normal[1]
                      + (oz + t_enter * dz - cz) * normal[2])
                s1 = ((ox + t_exit * dx - cx) * normal[0]
                      + (oy + t_exit * dy - cy) * normal[1]
                      + (oz + t_exit * dz - cz) * normal[2])
                if s0 <= 0.0:
                    t_hit = t_enter  # entered at or below the surface
                elif s1 <= 0.0:
                    t_hit = t_enter + s0 / (s0 - s1) * (t_exit - t_enter)
                else:
                    t_hit = None  # skims above the local surface; march on
                if t_hit is not None and t_hit >= 0.0:
                    result = Hit(range=t_hit,
                                 point=ray.origin + t_hit * ray.direction,
                                 normal=normal, label=label)
                    break
            axis = int(np.argmin(t_max))
            t_enter = t_max[axis]
            t_max[axis] += t_delta[axis]
            if axis == 0:
                i += step[0]
                if i < 0 or i >= dims[0]:
                    break
            elif axis == 1:
                j += step[1]
                if j < 0 or j >= dims[1]:
                    break
            else:
                k += step[2]
                if k < 0 or k >= dims[2]:
                    break
    if stats is not None:
        stats.add(rays=1, seconds=time.perf_counter() - t_start)
    return result


# ---------------------------------------------------------------------------
# benchmark


@dataclass
class BenchRun:
    name: str
    mean_per_tick: float
    total_time: float
    peak_memory_bytes: int


@dataclass
class BenchReport:
    runs: list
    ticks: int
    rays_per_tick: int
    leaf_size: float
    build_wall_time: float

    def to_json(self) -> str:
        return json.dumps({
            "ticks": self.ticks,
            "rays_per_tick": self.rays_per_tick,
            "leaf_size": self.leaf_size,
            "build_wall_time": self.build_wall_time,
            "runs": [{"name": r.name, "mean_per_tick": r.mean_per_tick,
                      "total_time": r.total_time,
                      "peak_memory_bytes": r.peak_memory_bytes}
                     for r in self.runs],
        }, indent=2)

    def to_text(self) -> str:
        header = f"{'Run Type':<22} {'Mean Time per Tick (s)':>24} {'Total Time (s)':>16}"
        lines = [header, "-" * len(header)]
        for r in self.runs:
            lines.append(f"{r.name:<22} {r.mean_per_tick:>24.6f} {r.total_time:>16.3f}")
        return "\n".join(lines)


def _world_bytes(world: World) -> int:
    total = world.heightfield.depth.nbytes
    for p in world.props:
        total += p.world_vertices.nbytes + p.triangles.nbytes
    return total


def bench_backends(world: World, ray_batch: list, ticks: int,
                   leaf_size: float = 0.1, cache_path=None) -> BenchReport:
    """Time three runs over the same per-tick ray batch: octree caching
    (build + disk write + queries), octree query-only, direct ray cast."""
    if ticks < 1:
        raise AccelError("ticks must be >= 1")
    if not ray_batch:
        raise AccelError("ray batch must not be empty")

    import tempfile

    # caching run: build, persist, then query every tick
    t0 = time.perf_counter()
    tree = build_octree(world, leaf_size)
    if cache_path is None:
        with tempfile.NamedTemporaryFile(suffix=".octree.json", delete=True) as fh:
            tree.serialize(fh.name)
    else:
        tree.serialize(cache_path)
    for _ in range(ticks):
        for ray in ray_batch:
            octree_cast(tree, ray)
    caching_total = time.perf_counter() - t0

    # query-only run against the prebuilt tree
    t0 = time.perf_counter()
    for _ in range(ticks):
        for ray in ray_batch:
            octree_cast(tree, ray)
    query_total = time.perf_counter() - t0

    # direct ray-cast run
    t0 = time.perf_counter()
    for _ in range(ticks):
        for ray in ray_batch:
            direct_cast(world, ray)
    raycast_total = time.perf_counter() - t0

    # separately timed build for the decomposition check
    t0 = time.perf_counter()
    build_octree(world, leaf_size)
    build_time = time.perf_counter() - t0

    wbytes = _world_bytes(world)
    runs = [
        BenchRun("octree caching run", caching_total / ticks, caching_total,
                 tree.memory_bytes + wbytes),
        BenchRun("octree query run", query_total / ticks, query_total,
                 tree.memory_bytes + wbytes),
        BenchRun("ray casting run", raycast_total / ticks, raycast_total,
                 wbytes),
    ]
    return BenchReport(runs=runs, ticks=ticks, rays_per_tick=len(ray_batch),
                       leaf_size=leaf_size, build_wall_time=build_time)
