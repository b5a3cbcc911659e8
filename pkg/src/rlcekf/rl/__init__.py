"""Learned compensation policy, rollouts, replay memory and training."""

from .policy import CompensatorPolicy, compensate, episode_cost, rl_innovation
from .policy_io import load_policy, save_policy
from .replay import ReplayMemory
from .rollout import run_rlcekf
from .training import TrainingConfig, TrainingLog, select_policy, train, train_and_select
