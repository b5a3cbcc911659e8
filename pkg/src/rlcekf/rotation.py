"""Quaternion and SO(3) primitives.

Conventions used everywhere in the package:

* quaternions are scalar-first ``[w, x, y, z]`` numpy arrays, Hamilton product;
* ``q`` is the body-to-navigation orientation ``q^nb``: a body vector ``v_b``
  maps to the navigation frame as ``q ⊗ v_b ⊗ q*``, i.e. ``R(q) @ v_b``;
* ``R^bn = R(q).T`` maps navigation vectors into the body frame;
* ``quat_exp(v)`` is the rotation by angle ``|v|`` about ``v`` (the half angle
  lives inside the map), ``quat_log`` is its inverse.

The double cover is only resolved (``w >= 0``) by :func:`canonical` and by the
error helpers; products and exponentials keep whatever sign they produce.
"""

from __future__ import annotations

import math

import numpy as np

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])

# Taylor branch switch for exp / log / dexp
SMALL_ANGLE = 1e-8


def normalize(q: np.ndarray) -> np.ndarray:
    return q / math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])


def canonical(q: np.ndarray) -> np.ndarray:
    """Representative of ``±q`` with ``w > 0`` (first nonzero component positive on ties)."""
    q = np.asarray(q, dtype=float)
    for c in q:
        if c > 0.0:
            return q.copy()
        if c < 0.0:
            return -q
    return q.copy()


def conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def _product(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product ``a ⊗ b``, renormalized. The sign is not canonicalized."""
    return normalize(_product(a, b))


def quat_left(p: np.ndarray) -> np.ndarray:
    """Left product matrix: ``quat_left(p) @ q == p ⊗ q``."""
    w, x, y, z = p
    return np.array([
        [w, -x, -y, -z],
        [x, w, -z, y],
        [y, z, w, -x],
        [z, -y, x, w],
    ])


def quat_right(p: np.ndarray) -> np.ndarray:
    """Right product matrix: ``quat_right(p) @ q == q ⊗ p``."""
    w, x, y, z = p
    return np.array([
        [w, -x, -y, -z],
        [x, w, z, -y],
        [y, -z, w, x],
        [z, y, -x, w],
    ])


def quat_exp(v: np.ndarray) -> np.ndarray:
    """Unit quaternion rotating by ``|v|`` radians about ``v / |v|``."""
    vx, vy, vz = v
    theta2 = vx * vx + vy * vy + vz * vz
    theta = math.sqrt(theta2)
    if theta < SMALL_ANGLE:
        s = 0.5 * (1.0 - theta2 / 24.0)
        return np.array([1.0 - theta2 / 8.0, s * vx, s * vy, s * vz])
    s = math.sin(0.5 * theta) / theta
    return np.array([math.cos(0.5 * theta), s * vx, s * vy, s * vz])


def quat_log(q: np.ndarray) -> np.ndarray:
    """Rotation vector of ``q``; the ``w >= 0`` representative is used so ``|v| <= pi``."""
    w, x, y, z = q
    if w < 0.0:
        w, x, y, z = -w, -x, -y, -z
    n = math.sqrt(x * x + y * y + z * z)
    if w > 1.0 - 1e-10 or n < SMALL_ANGLE:
        # 2 atan2(n, w) / n ~ 2 / w * (1 - n^2 / (3 w^2))
        k = 2.0 / w * (1.0 - n * n / (3.0 * w * w))
    else:
        k = 2.0 * math.atan2(n, w) / n
    return np.array([k * x, k * y, k * z])


def dexp(e: np.ndarray) -> np.ndarray:
    """Jacobian ``d quat_exp(e) / d e`` as a 4x3 array (scalar row first)."""
    e = np.asarray(e, dtype=float)
    theta2 = float(e @ e)
    theta = math.sqrt(theta2)
    if theta < SMALL_ANGLE:
        top = -0.25 * e
        lower = 0.5 * (1.0 - theta2 / 24.0) * np.eye(3) - np.outer(e, e) / 24.0
        return np.vstack([top, lower])
    u = e / theta
    s = math.sin(0.5 * theta)
    c = math.cos(0.5 * theta)
    top = -0.5 * s * u
    lower = (s / theta) * (np.eye(3) - np.outer(u, u)) + 0.5 * c * np.outer(u, u)
    return np.vstack([top, lower])


def quat_to_rotmat(q: np.ndarray) -> np.ndarray:
    """``R^nb``: the matrix with ``R @ v == vec(q ⊗ [0, v] ⊗ q*)``."""
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sandwich product ``q ⊗ v ⊗ q*`` for a 3-vector."""
    return _product(_product(q, np.array([0.0, v[0], v[1], v[2]])), conjugate(q))[1:]


def quat_error(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Navigation-frame rotation vector taking ``q2`` to ``q1`` (``log(q1 ⊗ q2*)``)."""
    return quat_log(_product(q1, conjugate(q2)))


def attitude_error(q_true: np.ndarray, q_est: np.ndarray) -> float:
    """Angle in ``[0, pi]`` between two orientations."""
    return float(np.linalg.norm(quat_error(q_true, q_est)))


def quat_to_euler(q: np.ndarray) -> tuple[float, float, float]:
    """Aerospace ZYX angles ``(yaw, pitch, roll)`` of ``R(q)``.

    Near gimbal lock the free angle is given to yaw and roll is set to zero.
    """
    w, x, y, z = q
    s = 2.0 * (w * y - x * z)
    s = max(-1.0, min(1.0, s))
    pitch = math.asin(s)
    if abs(abs(pitch) - 0.5 * math.pi) < 1e-7:
        # at pitch = ±pi/2 only yaw ∓ roll is determined; r01 = -sin, r11 = cos of it
        r01 = 2.0 * (x * y - w * z)
        r11 = 1.0 - 2.0 * (x * x + z * z)
        return math.atan2(-r01, r11), pitch, 0.0
    yaw = math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
    roll = math.atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
    return yaw, pitch, roll


def euler_to_quat(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """Inverse of :func:`quat_to_euler` (``Rz(yaw) Ry(pitch) Rx(roll)``)."""
    cy, sy = math.cos(0.5 * yaw), math.sin(0.5 * yaw)
    cp, sp = math.cos(0.5 * pitch), math.sin(0.5 * pitch)
    cr, sr = math.cos(0.5 * roll), math.sin(0.5 * roll)
    return np.array([
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    ])


def skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def batch_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise Hamilton product of two ``(n, 4)`` arrays (no renormalization)."""
    aw, ax, ay, az = a.T
    bw, bx, by, bz = b.T
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=1)


def batch_error_angle(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Row-wise angle of ``q1 ⊗ q2*`` in ``[0, pi]``."""
    conj = q2 * np.array([1.0, -1.0, -1.0, -1.0])
    d = batch_product(np.asarray(q1, dtype=float), conj)
    return 2.0 * np.arctan2(np.linalg.norm(d[:, 1:], axis=1), np.abs(d[:, 0]))
