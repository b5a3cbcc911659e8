"""
Quaternion rotation algebra
===========================

Unit quaternions are stored scalar-first, ``(w, x, y, z)``, and compose with
the Hamilton product. ``quat_exp`` maps a rotation vector to the quaternion
that rotates by its norm about its direction.
"""

import numpy as np

from rlcekf.rotation import (euler_to_quat, quat_exp, quat_left, quat_log, quat_multiply, quat_right,
                             quat_to_euler, quat_to_rotmat, rotate)

# a quarter turn about z moves the x axis onto the y axis
quarter_z = quat_exp(np.array([0.0, 0.0, np.pi / 2]))
print("quarter turn about z:", quarter_z.round(6))
print("x axis rotated:", rotate(quarter_z, np.array([1.0, 0.0, 0.0])).round(12))

# the log map recovers the rotation vector
print("log of it:", quat_log(quarter_z).round(12))

# composition: a ⊗ b rotates by b first, then by a
half_x = quat_exp(np.array([np.pi, 0.0, 0.0]))
both = quat_multiply(quarter_z, half_x)
print("matrix of a ⊗ b equals R(a) R(b):",
      np.allclose(quat_to_rotmat(both), quat_to_rotmat(quarter_z) @ quat_to_rotmat(half_x)))

# products are linear maps; Left(p) q = p ⊗ q and Right(p) q = q ⊗ p
print("Left/Right matrices agree:",
      np.allclose(quat_left(quarter_z) @ half_x, both), np.allclose(quat_right(half_x) @ quarter_z, both))

# ZYX Euler angles (yaw, pitch, roll) round-trip away from gimbal lock
q = euler_to_quat(0.4, -0.2, 1.1)
print("yaw, pitch, roll:", np.round(quat_to_euler(q), 12))
