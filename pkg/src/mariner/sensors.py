"""Ranging sensors over the ray-query backends, plus a basic navigation
suite (IMU / DVL / depth) with additive Gaussian noise.

Frame conventions: acoustic sensors (echo sounder, multibeam profiler,
sidescan) look along the sensor +z axis (down when the mount is level)
with +y across-track; the LiDAR boresight is the sensor +x axis. A
level mount therefore gives a nadir echo beam and a forward LiDAR.

Intensity is Lambertian (cosine of incidence) with inverse-square range
falloff referenced to 1 m; the model is isolated in `return_intensity`
so a different acoustic model can be swapped in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .accel import Hit, Octree, QueryStats, Ray, direct_cast, octree_cast
from .frames import compose_pose, euler_to_rot
from .world import SemanticLabel, World

MISS_RANGE = math.inf
R_REF = 1.0  # m, intensity reference range


class RaycastBackend:
    """Direct ray casting against the live world (no cache)."""

    def __init__(self, world: World):
        self.world = world
        self.stats = QueryStats()

    def cast(self, ray: Ray):
        return direct_cast(self.world, ray, self.stats)


class OctreeBackend:
    """Queries a prebuilt octree; stale trees raise, never mislead."""

    def __init__(self, tree: Octree):
        self.tree = tree
        self.stats = QueryStats()

    def cast(self, ray: Ray):
        return octree_cast(self.tree, ray, self.stats)


def make_backend(kind: str, world: World, leaf_size: float = 0.1):
    if kind == "raycast":
        return RaycastBackend(world)
    if kind == "octree":
        from .accel import build_octree
        return OctreeBackend(build_octree(world, leaf_size))
    raise ValueError(f"unknown backend kind {kind!r}")


def return_intensity(hit: Hit, direction) -> float:
    """clamp(cos(incidence) * R_ref^2 / max(range, R_ref)^2, 0, 1)."""
    cos_inc = abs(float(np.dot(hit.normal, -np.asarray(direction))))
    r = max(hit.range, R_REF)
    return max(0.0, min(1.0, cos_inc * R_REF * R_REF / (r * r)))


@dataclass
class EchoReturn:
    range: float
    intensity: float
    label: SemanticLabel | None = None


@dataclass
class MultibeamReturn:
    ranges: np.ndarray
    intensities: np.ndarray
    labels: list | None = None


@dataclass
class SidescanReturn:
    bins: np.ndarray  # (n_bins,) intensities in [0, 1]
    labels: list | None = None  # majority label per bin, None for empty bins


@dataclass
class LidarPoint:
    point: np.ndarray  # sensor frame
    intensity: float
    label: SemanticLabel | None = None


@dataclass
class NavSample:
    imu_specific_force: np.ndarray
    imu_angular_rate: np.ndarray
    dvl_velocity: np.ndarray
    depth: float


def _sensor_frame(agent_eta, mount_pose):
    pose = compose_pose(agent_eta, mount_pose)
    R = euler_to_rot(pose[3], pose[4], pose[5])
    return pose[:3], R


def _cast_dir(backend, origin, R, d_sensor, max_range):
    d_world = R @ np.asarray(d_sensor, dtype=float)
    d_world = d_world / np.linalg.norm(d_world)
    return backend.cast(Ray(origin=origin, direction=d_world,
                            max_range=max_range)), d_world


def echo_sounder(backend, agent_eta, spec) -> EchoReturn:
    """Single beam along the sensor +z (mount) axis."""
    origin, R = _sensor_frame(agent_eta, spec.mount_pose)
    hit, d = _cast_dir(backend, origin, R, (0.0, 0.0, 1.0), spec.max_range)
    if hit is None:
        return EchoReturn(range=MISS_RANGE, intensity=0.0)
    label = hit.label if spec.semantic else None
    return EchoReturn(range=hit.range, intensity=return_intensity(hit, d),
                      label=label)


def multibeam_scan(backend, agent_eta, spec) -> MultibeamReturn:
    """Fan of n_beams uniformly spanning the across-track aperture."""
    origin, R = _sensor_frame(agent_eta, spec.mount_pose)
    if spec.n_beams == 1:
        angles = np.array([0.0])
    else:
        angles = np.linspace(-spec.aperture / 2.0, spec.aperture / 2.0,
                             spec.n_beams)
    ranges = np.full(spec.n_beams, MISS_RANGE)
    intens = np.zeros(spec.n_beams)
    labels: list = [None] * spec.n_beams
    for b, beta in enumerate(angles):
        d_sensor = (0.0, math.sin(beta), math.cos(beta))
        hit, d = _cast_dir(backend, origin, R, d_sensor, spec.max_range)
        if hit is not None:
            ranges[b] = hit.range
            intens[b] = return_intensity(hit, d)
            labels[b] = hit.label
    return MultibeamReturn(ranges=ranges, intensities=intens,
                           labels=labels if spec.semantic else None)


def sidescan_line(backend, agent_eta, spec, rays_per_bin: int = 8) -> SidescanReturn:
    """One across-track sidescan line: dense fans port and starboard,
    accumulated into slant-range bins and normalized per line."""
    origin, R = _sensor_frame(agent_eta, spec.mount_pose)
    n_bins = spec.n_bins
    acc = np.zeros(n_bins)
    label_votes: list = [dict() for _ in range(n_bins)]
    n_rays = max(rays_per_bin * n_bins, 8)
    gammas = np.linspace(spec.tilt - spec.vertical_aperture / 2.0,
                         spec.tilt + spec.vertical_aperture / 2.0, n_rays)
    for side in (-1.0, 1.0):
        for gamma in gammas:
            # gamma measured down from horizontal in the across-track plane
            d_sensor = (0.0, side * math.cos(gamma), math.sin(gamma))
            hit, d = _cast_dir(backend, origin, R, d_sensor, spec.max_range)
            if hit is None:
                continue
            b = min(int(hit.range / spec.max_range * n_bins), n_bins - 1)
            acc[b] += return_intensity(hit, d)
            key = (hit.label.class_id, hit.label.instance_id)
            label_votes[b][key] = label_votes[b].get(key, 0) + 1
    peak = acc.max()
    if peak > 0:
        acc = acc / peak
    labels = None
    if spec.semantic:
        labels = []
        for votes in label_votes:
            if not votes:
                labels.append(None)
            else:
                cid, iid = max(votes.items(), key=lambda kv: kv[1])[0]
                labels.append(SemanticLabel(class_id=cid, instance_id=iid))
    return SidescanReturn(bins=acc, labels=labels)


def lidar_scan(backend, agent_eta, spec) -> list:
    """n_lasers x points_per_rotation ray grid about the +x boresight;
    misses are omitted; points are reported in the sensor frame."""
    origin, R = _sensor_frame(agent_eta, spec.mount_pose)
    if spec.n_lasers == 1:
        v_angles = np.array([0.0])
    else:
        v_angles = np.linspace(-spec.fov_vertical / 2.0, spec.fov_vertical / 2.0,
                               spec.n_lasers)
    full_circle = abs(spec.fov_horizontal - 2.0 * math.pi) < 1e-9
    if spec.points_per_rotation == 1:
        h_angles = np.array([0.0])
    elif full_circle:
        h_angles = np.linspace(0.0, 2.0 * math.pi, spec.points_per_rotation,
                               endpoint=False)
    else:
        h_angles = np.linspace(-spec.fov_horizontal / 2.0,
                               spec.fov_horizontal / 2.0,
                               spec.points_per_rotation)
    cloud = []
    for elev in v_angles:
        ce, se = math.cos(elev), math.sin(elev)
        for az in h_angles:
            d_sensor = np.array([ce * math.cos(az), ce * math.sin(az), se])
            hit, d = _cast_dir(backend, origin, R, d_sensor, spec.max_range)
            if hit is None:
                continue
            cloud.append(LidarPoint(
                point=hit.range * d_sensor,
                intensity=return_intensity(hit, d),
                label=hit.label if spec.semantic else None))
    return cloud


def nav_suite(state, spec, rng=None) -> NavSample:
    """Ground-truth IMU/DVL/depth from the rigid-body state plus additive
    Gaussian noise; a zero-noise spec returns exact truth."""
    eta = np.asarray(state.eta, dtype=float)
    nu = np.asarray(state.nu, dtype=float)
    R = euler_to_rot(eta[3], eta[4], eta[5])
    g_ned = np.array([0.0, 0.0, 9.81])
    # steady-state specific force: transport term minus gravity, body frame
    f = np.cross(nu[3:], nu[:3]) - R.T @ g_ned
    omega = nu[3:].copy()
    vel = nu[:3].copy()
    depth = float(eta[2])
    if rng is not None and spec.noise_std > 0:
        s = spec.noise_std
        f = f + np.array([rng.normal(0.0, s) for _ in range(3)])
        omega = omega + np.array([rng.normal(0.0, s) for _ in range(3)])
        vel = vel + np.array([rng.normal(0.0, s) for _ in range(3)])
        depth += rng.normal(0.0, s)
    return NavSample(imu_specific_force=f, imu_angular_rate=omega,
                     dvl_velocity=vel, depth=depth)


# ---------------------------------------------------------------------------
# artifact writers


def write_pgm(lines, path) -> None:
    """Dump stacked sidescan lines (each in [0, 1]) as an 8-bit PGM
    waterfall image, one image row per line."""
    lines = np.asarray(lines, dtype=float)
    if lines.ndim == 1:
        lines = lines[None, :]
    img = np.clip(lines * 255.0, 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def write_xyz(cloud, path) -> None:
    """LiDAR cloud as 'x y z intensity' text rows."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in cloud:
            fh.write(f"{p.point[0]:.6f} {p.point[1]:.6f} {p.point[2]:.6f} "
                     f"{p.intensity:.6f}\n")
