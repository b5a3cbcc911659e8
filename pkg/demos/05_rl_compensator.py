"""
Learning a residual gain
========================

The compensator maps the previous injected residual to a 3x6 gain applied to
the post-correction innovation. A short training run on simulated episodes
already pulls random starts in far faster than the stalled EKF.
"""

import numpy as np

from rlcekf.ekf import EkfParams, run_ekf
from rlcekf.imu_sim import SimConfig, sample_initial_quaternion, simulate_episode
from rlcekf.rl.policy import CompensatorPolicy
from rlcekf.rl.rollout import run_rlcekf
from rlcekf.rl.training import TrainingConfig, make_validation_set, train, validation_cost
from rlcekf.rotation import batch_error_angle

params = EkfParams()
sim = SimConfig()

# an untrained policy outputs a zero gain, which is exactly the EKF
episode = simulate_episode(SimConfig(n_samples=2000), seed=21)
start = sample_initial_quaternion(4)
print("zero policy equals EKF:",
      np.array_equal(run_rlcekf(episode, start, params, CompensatorPolicy.zero()), run_ekf(episode, start, params)))

# a reduced training budget for the demo (the default runs 30 iterations)
policy, log = train(sim, TrainingConfig(iterations=15), seed=0)
print(f"episode cost: first {log.episode_cost[0]:.3f}, last {log.episode_cost[-1]:.3f}")

validation = make_validation_set(sim, 10, seed=99)
ratio = validation_cost(policy, validation, params) / validation_cost(CompensatorPolicy.zero(), validation, params)
print(f"validation cost relative to the zero policy: {ratio:.3f}")

err = batch_error_angle(episode.truth, run_rlcekf(episode, start, params, policy))
print(f"compensated filter: error {err[0]:.2f} rad -> {err[-500:].mean():.3f} rad mean over the last 5 s")
