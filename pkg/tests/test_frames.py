"""Kinematics helper tests: rotations, Jacobians, pose composition."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mariner.frames import (
    compose_pose,
    euler_rate_matrix,
    euler_to_rot,
    pose_jacobian,
    skew,
    wrap_angle,
)

angles = st.floats(-10.0, 10.0, allow_nan=False)


def test_wrap_angle_basics():
    assert wrap_angle(0.0) == 0.0
    assert math.isclose(wrap_angle(math.pi + 0.1), -math.pi + 0.1)
    assert math.isclose(wrap_angle(-math.pi - 0.1), math.pi - 0.1)
    assert math.isclose(wrap_angle(2 * math.pi), 0.0, abs_tol=1e-12)
    # convention: wraps into (-pi, pi]
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi


@given(angles)
def test_wrap_angle_idempotent(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi + 1e-12
    assert math.isclose(wrap_angle(w), w, abs_tol=1e-12)


def test_skew_matches_cross_product():
    a = np.array([1.0, -2.0, 3.0])
    b = np.array([0.5, 4.0, -1.0])
    assert np.allclose(skew(a) @ b, np.cross(a, b))
    assert np.allclose(skew(a).T, -skew(a))


def test_rotation_identity():
    assert np.allclose(euler_to_rot(0, 0, 0), np.eye(3))


def test_rotation_yaw_90():
    R = euler_to_rot(0, 0, math.pi / 2)
    # body x maps to world y under a +90 deg yaw (zyx convention)
    assert np.allclose(R @ [1, 0, 0], [0, 1, 0], atol=1e-12)


def test_rotation_pitch_sign():
    # positive pitch (nose up in NED) tilts body x upward (negative z)
    R = euler_to_rot(0, 0.3, 0)
    v = R @ np.array([1.0, 0.0, 0.0])
    assert v[2] < 0


@given(angles, angles, angles)
def test_rotation_orthonormal(phi, theta, psi):
    R = euler_to_rot(phi, theta, psi)
    assert np.allclose(R @ R.T, np.eye(3), atol=1e-9)
    assert math.isclose(np.linalg.det(R), 1.0, abs_tol=1e-9)


def test_euler_rate_matrix_level():
    assert np.allclose(euler_rate_matrix(0, 0), np.eye(3))


def test_euler_rate_matrix_singularity_guard():
    with pytest.raises(Exception):
        euler_rate_matrix(0.0, math.pi / 2)


def test_pose_jacobian_block_structure():
    eta = np.array([1.0, 2.0, 3.0, 0.1, 0.2, 0.3])
    J = pose_jacobian(eta)
    assert J.shape == (6, 6)
    assert np.allclose(J[:3, 3:], 0.0)
    assert np.allclose(J[3:, :3], 0.0)
    assert np.allclose(J[:3, :3], euler_to_rot(0.1, 0.2, 0.3))


def test_compose_pose_identity():
    parent = np.array([1.0, 2.0, 3.0, 0.1, -0.2, 0.3])
    child = np.zeros(6)
    assert np.allclose(compose_pose(parent, child), parent)


def test_compose_pose_translation():
    parent = np.array([0.0, 0.0, 0.0, 0.0, 0.0, math.pi / 2])
    child = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    out = compose_pose(parent, child)
    assert np.allclose(out[:3], [0.0, 1.0, 0.0], atol=1e-12)


@given(angles, angles, st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_compose_pose_rotation_consistency(phi, psi, x, y, z):
    parent = np.array([0.0, 0.0, 0.0, phi, 0.2, psi])
    child = np.array([x, y, z, 0.0, 0.0, 0.0])
    out = compose_pose(parent, child)
    expected = euler_to_rot(phi, 0.2, psi) @ np.array([x, y, z])
    assert np.allclose(out[:3], expected, atol=1e-9)
