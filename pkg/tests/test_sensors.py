"""Ranging-sensor tests against analytic worlds: echo sounder, multibeam
profiler, sidescan, LiDAR, the nav suite, and the artifact writers."""

import math

import numpy as np
import pytest

from mariner.dynamics import RigidBodyState
from mariner.params import default_remus100_params
from mariner.rng import Xoshiro256
from mariner.scenario import SensorSpec
from mariner.sensors import (
    MISS_RANGE,
    echo_sounder,
    lidar_scan,
    make_backend,
    multibeam_scan,
    nav_suite,
    return_intensity,
    sidescan_line,
    write_pgm,
    write_xyz,
)
from mariner.world import SemanticLabel, box_mesh, flat_world, spawn_prop


DEPTH = 20.0


def world():
    return flat_world(DEPTH, (200.0, 200.0), 1.0)


def eta(x=100.0, y=100.0, z=5.0, phi=0.0, theta=0.0, psi=0.0):
    return np.array([x, y, z, phi, theta, psi])


def spec(kind, **kw):
    return SensorSpec(name="s", kind=kind, **kw)


# ---------------------------------------------------------------------------
# echo sounder


def test_echo_exact_depth_raycast():
    b = make_backend("raycast", world())
    r = echo_sounder(b, eta(z=5.0), spec("echo_sounder"))
    assert math.isclose(r.range, DEPTH - 5.0, abs_tol=1e-9)
    assert r.label is None  # semantic off by default


def test_echo_octree_within_quantization():
    w = flat_world(DEPTH, (40.0, 40.0), 1.0)
    leaf = 0.1
    b = make_backend("octree", w, leaf_size=leaf)
    r = echo_sounder(b, eta(x=20.0, y=20.0, z=5.0),
                     spec("echo_sounder", backend="octree"))
    assert abs(r.range - (DEPTH - 5.0)) <= 2 * leaf


def test_echo_miss_is_inf():
    b = make_backend("raycast", world())
    r = echo_sounder(b, eta(z=5.0), spec("echo_sounder", max_range=10.0))
    assert r.range == MISS_RANGE and r.intensity == 0.0


def test_echo_semantic_label():
    w = world()
    v, t = box_mesh(2.0)
    spawn_prop(w, v, t, (100.0, 100.0, 15.0, 0, 0, 0), SemanticLabel(4, 9))
    b = make_backend("raycast", w)
    r = echo_sounder(b, eta(z=5.0), spec("echo_sounder", semantic=True))
    assert r.label.class_id == 4 and r.label.instance_id == 9
    assert math.isclose(r.range, 9.0, abs_tol=1e-9)  # box top at z = 14


def test_echo_mount_pose_offset():
    b = make_backend("raycast", world())
    s = spec("echo_sounder", mount_pose=(0, 0, 1.0, 0, 0, 0))
    r = echo_sounder(b, eta(z=5.0), s)
    assert math.isclose(r.range, DEPTH - 6.0, abs_tol=1e-9)


def test_echo_pitched_vehicle_longer_slant():
    b = make_backend("raycast", world())
    theta = 0.3
    r = echo_sounder(b, eta(z=5.0, theta=theta), spec("echo_sounder"))
    assert math.isclose(r.range, (DEPTH - 5.0) / math.cos(theta), rel_tol=1e-9)


# ---------------------------------------------------------------------------
# intensity model


def test_intensity_law():
    class H:
        pass

    h = H()
    h.normal = np.array([0.0, 0.0, -1.0])
    h.range = 3.0
    # nadir beam: cos(0) * 1 / 3^2
    assert math.isclose(return_intensity(h, np.array([0, 0, 1.0])), 1.0 / 9.0,
                        rel_tol=1e-12)
    # inside reference range the falloff clamps at 1 m
    h.range = 0.1
    assert math.isclose(return_intensity(h, np.array([0, 0, 1.0])), 1.0,
                        rel_tol=1e-12)
    # grazing incidence goes to zero
    h.range = 3.0
    assert return_intensity(h, np.array([1.0, 0, 0])) < 1e-12


def test_echo_intensity_matches_law():
    b = make_backend("raycast", world())
    r = echo_sounder(b, eta(z=5.0), spec("echo_sounder"))
    assert math.isclose(r.intensity, 1.0 / (DEPTH - 5.0) ** 2, rel_tol=1e-9)


# ---------------------------------------------------------------------------
# multibeam


def test_multibeam_flat_world_sec_law():
    """Beam b at across-track angle beta sees depth / cos(beta)."""
    b = make_backend("raycast", world())
    s = spec("multibeam", n_beams=9, aperture=math.radians(120))
    r = multibeam_scan(b, eta(z=5.0), s)
    angles = np.linspace(-math.radians(60), math.radians(60), 9)
    expected = (DEPTH - 5.0) / np.cos(angles)
    assert np.allclose(r.ranges, expected, atol=1e-9)
    assert r.labels is None


def test_multibeam_octree_rms_within_2leaf():
    w = flat_world(10.0, (40.0, 40.0), 1.0)
    leaf = 0.1
    b_o = make_backend("octree", w, leaf_size=leaf)
    b_r = make_backend("raycast", w)
    s = spec("multibeam", n_beams=32, aperture=math.radians(120),
             semantic=True)
    r_o = multibeam_scan(b_o, eta(x=20.0, y=20.0, z=2.0), s)
    r_r = multibeam_scan(b_r, eta(x=20.0, y=20.0, z=2.0), s)
    rms = float(np.sqrt(np.mean((r_o.ranges - r_r.ranges) ** 2)))
    assert rms <= 2 * leaf
    assert all(lo == lr for lo, lr in zip(r_o.labels, r_r.labels))


def test_multibeam_semantic_labels_exact():
    w = world()
    v, t = box_mesh(4.0)
    spawn_prop(w, v, t, (100.0, 100.0, 17.0, 0, 0, 0), SemanticLabel(6, 2))
    b = make_backend("raycast", w)
    s = spec("multibeam", n_beams=31, aperture=math.radians(120),
             semantic=True)
    r = multibeam_scan(b, eta(z=5.0), s)
    mid = 15  # nadir beam hits the box
    assert r.labels[mid].class_id == 6
    assert r.labels[0].class_id == 1 and r.labels[-1].class_id == 1


def test_multibeam_single_beam_is_nadir():
    b = make_backend("raycast", world())
    r = multibeam_scan(b, eta(z=5.0), spec("multibeam", n_beams=1))
    assert r.ranges.shape == (1,)
    assert math.isclose(r.ranges[0], DEPTH - 5.0, abs_tol=1e-9)


def test_multibeam_out_of_range_beams_are_inf():
    b = make_backend("raycast", world())
    s = spec("multibeam", n_beams=9, aperture=math.radians(170),
             max_range=16.0)
    r = multibeam_scan(b, eta(z=5.0), s)
    assert r.ranges[4] < 16.0  # nadir hits
    assert r.ranges[0] == MISS_RANGE and r.ranges[-1] == MISS_RANGE


# ---------------------------------------------------------------------------
# sidescan


def test_sidescan_shape_and_normalization():
    b = make_backend("raycast", world())
    s = spec("sidescan", n_bins=32)
    r = sidescan_line(b, eta(z=18.0), s)
    assert r.bins.shape == (32,)
    assert np.all(r.bins >= 0.0) and np.all(r.bins <= 1.0)
    assert math.isclose(r.bins.max(), 1.0, rel_tol=1e-12)
    assert r.labels is None


def test_sidescan_first_return_bin():
    """The nearest ensonified slant range falls in the right bin."""
    b = make_backend("raycast", world())
    s = spec("sidescan", n_bins=64, max_range=50.0, tilt=0.6,
             vertical_aperture=0.8)
    alt = DEPTH - 15.0
    r = sidescan_line(b, eta(z=15.0), s)
    # steepest ray in the fan: gamma = tilt + aperture/2 = 1.0 rad
    r_min = alt / math.sin(1.0)
    first = next(i for i, v in enumerate(r.bins) if v > 0)
    assert abs(first - int(r_min / 50.0 * 64)) <= 1


def test_sidescan_semantic_majority():
    w = world()
    b = make_backend("raycast", w)
    s = spec("sidescan", n_bins=16, semantic=True)
    r = sidescan_line(b, eta(z=18.0), s)
    assert len(r.labels) == 16
    filled = [l for l in r.labels if l is not None]
    assert filled and all(l.class_id == 1 for l in filled)
    empty_bins = [i for i, v in enumerate(r.bins) if v == 0.0]
    assert all(r.labels[i] is None for i in empty_bins)


def test_sidescan_port_starboard_symmetry():
    b = make_backend("raycast", world())
    s = spec("sidescan", n_bins=32)
    r1 = sidescan_line(b, eta(z=15.0, psi=0.0), s)
    r2 = sidescan_line(b, eta(z=15.0, psi=1.3), s)
    assert np.allclose(r1.bins, r2.bins, atol=1e-9)  # flat world: yaw invariant


# ---------------------------------------------------------------------------
# lidar


def test_lidar_points_on_surface():
    w = world()
    b = make_backend("raycast", w)
    s = spec("lidar", n_lasers=4, points_per_rotation=24, max_range=60.0)
    cloud = lidar_scan(b, eta(z=5.0), s)
    assert cloud
    for p in cloud:
        # sensor frame == world frame here (level, but offset by eta)
        z_world = 5.0 + p.point[2]
        assert abs(z_world - DEPTH) < 1e-6
        assert 0.0 <= p.intensity <= 1.0
        assert p.label is None


def test_lidar_misses_omitted():
    b = make_backend("raycast", world())
    s = spec("lidar", n_lasers=1, points_per_rotation=8,
             fov_vertical=0.0, max_range=60.0)
    # single horizontal ring at z=5 never reaches the bottom
    assert lidar_scan(b, eta(z=5.0), s) == []


def test_lidar_semantic():
    w = world()
    v, t = box_mesh(2.0)
    spawn_prop(w, v, t, (110.0, 100.0, 5.0, 0, 0, 0), SemanticLabel(3, 7))
    b = make_backend("raycast", w)
    s = spec("lidar", n_lasers=1, points_per_rotation=1, fov_vertical=0.0,
             fov_horizontal=0.1, semantic=True, max_range=60.0)
    cloud = lidar_scan(b, eta(z=5.0), s)  # boresight +x hits the box face
    assert len(cloud) == 1
    assert cloud[0].label.class_id == 3
    assert math.isclose(cloud[0].point[0], 9.0, abs_tol=1e-9)


# ---------------------------------------------------------------------------
# nav suite


def state(etav, nuv):
    return RigidBodyState(eta=np.array(etav, dtype=float),
                          nu=np.array(nuv, dtype=float),
                          fin_angles=np.zeros(4))


def test_nav_truth_at_rest():
    st = state([0, 0, 7.0, 0, 0, 0], [0] * 6)
    s = nav_suite(st, spec("nav"))
    assert np.allclose(s.imu_specific_force, [0, 0, -9.81])
    assert np.allclose(s.imu_angular_rate, 0.0)
    assert np.allclose(s.dvl_velocity, 0.0)
    assert s.depth == 7.0


def test_nav_truth_moving():
    st = state([0, 0, 3.0, 0, 0, 0.5], [1.5, 0.1, 0, 0, 0, 0.2])
    s = nav_suite(st, spec("nav"))
    assert np.allclose(s.dvl_velocity, [1.5, 0.1, 0])
    assert np.allclose(s.imu_angular_rate, [0, 0, 0.2])
    # transport term omega x v minus gravity in body frame
    f_expected = np.cross([0, 0, 0.2], [1.5, 0.1, 0]) - np.array([0, 0, 9.81])
    assert np.allclose(s.imu_specific_force, f_expected)


def test_nav_noise_statistics():
    st = state([0, 0, 5.0, 0, 0, 0], [0] * 6)
    rng = Xoshiro256(11)
    sp = spec("nav", noise_std=0.2)
    depths = np.array([nav_suite(st, sp, rng).depth for _ in range(4000)])
    assert abs(depths.mean() - 5.0) < 0.02
    assert abs(depths.std() - 0.2) < 0.02


def test_nav_zero_noise_deterministic():
    st = state([0, 0, 5.0, 0, 0, 0], [0.3] + [0] * 5)
    rng = Xoshiro256(11)
    a = nav_suite(st, spec("nav"), rng)
    b = nav_suite(st, spec("nav"), rng)
    assert a.depth == b.depth == 5.0
    assert np.array_equal(a.dvl_velocity, b.dvl_velocity)


# ---------------------------------------------------------------------------
# artifact writers


def test_write_pgm_header_and_payload(tmp_path):
    lines = np.array([[0.0, 0.5, 1.0], [1.0, 0.5, 0.0]])
    path = tmp_path / "w.pgm"
    write_pgm(lines, path)
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n3 2\n255\n")
    body = raw[len(b"P5\n3 2\n255\n"):]
    assert len(body) == 6
    assert body[0] == 0 and body[2] == 255


def test_write_xyz(tmp_path):
    w = world()
    b = make_backend("raycast", w)
    s = spec("lidar", n_lasers=2, points_per_rotation=8, max_range=60.0)
    cloud = lidar_scan(b, eta(z=5.0), s)
    path = tmp_path / "c.xyz"
    write_xyz(cloud, path)
    rows = path.read_text().strip().splitlines()
    assert len(rows) == len(cloud)
    assert all(len(r.split()) == 4 for r in rows)


def test_make_backend_unknown():
    with pytest.raises(ValueError):
        make_backend("magic", world())
