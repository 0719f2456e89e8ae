"""Kinematic frame utilities for NED / SNAME conventions.

World frame is North-East-Down: z positive downward, depth is positive z.
Pose eta = [x, y, z, phi, theta, psi]; body velocity nu = [u, v, w, p, q, r].
"""

from __future__ import annotations

import math

import numpy as np


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def skew(v) -> np.ndarray:
    """Cross-product matrix S(v) with S(v) @ w = v x w."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def euler_to_rot(phi: float, theta: float, psi: float) -> np.ndarray:
    """Body-to-NED rotation matrix from zyx Euler angles."""
    cphi, sphi = math.cos(phi), math.sin(phi)
    cth, sth = math.cos(theta), math.sin(theta)
    cpsi, spsi = math.cos(psi), math.sin(psi)
    return np.array([
        [cpsi * cth, -spsi * cphi + cpsi * sth * sphi, spsi * sphi + cpsi * cphi * sth],
        [spsi * cth, cpsi * cphi + sphi * sth * spsi, -cpsi * sphi + sth * spsi * cphi],
        [-sth, cth * sphi, cth * cphi],
    ])


def euler_rate_matrix(phi: float, theta: float) -> np.ndarray:
    """T(phi, theta) mapping body rates [p, q, r] to Euler angle rates."""
    cphi, sphi = math.cos(phi), math.sin(phi)
    cth = math.cos(theta)
    if abs(cth) < 1e-12:
        raise ValueError("Euler kinematics singular at |theta| = 90 deg")
    tth = math.tan(theta)
    return np.array([
        [1.0, sphi * tth, cphi * tth],
        [0.0, cphi, -sphi],
        [0.0, sphi / cth, cphi / cth],
    ])


def pose_jacobian(eta) -> np.ndarray:
    """6x6 J(eta) with eta_dot = J(eta) @ nu."""
    J = np.zeros((6, 6))
    J[:3, :3] = euler_to_rot(eta[3], eta[4], eta[5])
    J[3:, 3:] = euler_rate_matrix(eta[3], eta[4])
    return J


def compose_pose(parent_eta, child_pose) -> np.ndarray:
    """Compose a child pose (e.g. sensor mount) expressed in the parent body
    frame with the parent's world pose; returns a world-frame 6-pose.

    Orientation composition multiplies rotation matrices and re-extracts
    zyx Euler angles, which is adequate away from the pitch singularity.
    """
    parent_eta = np.asarray(parent_eta, dtype=float)
    child_pose = np.asarray(child_pose, dtype=float)
    R_p = euler_to_rot(parent_eta[3], parent_eta[4], parent_eta[5])
    R_c = euler_to_rot(child_pose[3], child_pose[4], child_pose[5])
    R = R_p @ R_c
    pos = parent_eta[:3] + R_p @ child_pose[:3]
    theta = -math.asin(max(-1.0, min(1.0, R[2, 0])))
    phi = math.atan2(R[2, 1], R[2, 2])
    psi = math.atan2(R[1, 0], R[0, 0])
    return np.array([pos[0], pos[1], pos[2], phi, theta, psi])
