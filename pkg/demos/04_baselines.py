"""
Comparison filters
==================

The gradient-descent complementary filter blends gyro integration with a
normalized gradient step toward the vector measurements; plain gyro
integration accumulates every bias and noise sample.
"""

import numpy as np

from rlcekf.baselines import run_cf, run_gyro
from rlcekf.ekf import EkfParams
from rlcekf.imu_sim import NoiseModel, SimConfig, simulate_episode
from rlcekf.rotation import batch_error_angle

params = EkfParams()
episode = simulate_episode(SimConfig(noise=NoiseModel.standard(gyro_bias=(0.02, 0.02, 0.02)), n_samples=3000), seed=5)

# larger gains converge faster but follow measurement noise more closely
for beta in (0.041, 0.41, 4.1):
    err = batch_error_angle(episode.truth, run_cf(episode, episode.truth[0], beta, params))
    print(f"CF beta={beta:<5}: steady error mean {err[1000:].mean():.4f} rad, std {err[1000:].std():.4f} rad")

# a 0.02 rad/s bias on each axis drifts at |b| = 0.035 rad/s
err = batch_error_angle(episode.truth, run_gyro(episode, episode.truth[0]))
print(f"gyro only: error after 30 s {err[-1]:.3f} rad")
