"""
Quaternion EKF
==============

The filter propagates the quaternion with the gyro, corrects it against the
accelerometer and magnetometer, and renormalizes. Two normalization Jacobians
are available: the rank-one ``q qᵀ`` default and the tangent-space projector.
"""

import numpy as np

from rlcekf.ekf import EkfParams, run_ekf
from rlcekf.imu_sim import SimConfig, sample_initial_quaternion, simulate_episode
from rlcekf.rotation import batch_error_angle

episode = simulate_episode(SimConfig(n_samples=2000), seed=3)

# started at the true attitude, both variants track it
for mode in ("rank1", "projector"):
    err = batch_error_angle(episode.truth, run_ekf(episode, episode.truth[0], EkfParams(normalization=mode)))
    print(f"{mode:9s} exact start: final-5 s RMS error {np.sqrt(np.mean(err[-500:] ** 2)):.4f} rad")

# from a random start the rank-one covariance collapses and the filter stalls
start = sample_initial_quaternion(11)
for mode in ("rank1", "projector"):
    err = batch_error_angle(episode.truth, run_ekf(episode, start, EkfParams(normalization=mode)))
    print(f"{mode:9s} random start: error {err[0]:.2f} rad -> {err[-1]:.3f} rad after 20 s")
