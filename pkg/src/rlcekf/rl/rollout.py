"""RLC-EKF filter loop: EKF predict / correct / normalize followed by the RL correction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ekf import EkfParams, ekf_step, initial_state
from ..errors import NumericalError
from ..rotation import batch_error_angle, conjugate, quat_log, quat_multiply
from .policy import CompensatorPolicy, apply_gain, frame_innovation, rl_innovation


@dataclass
class Trace:
    """Per-step quantities of a rollout; row ``k`` belongs to frame ``k + 1``.

    ``state``/``next_state`` are the residuals fed to / produced by the policy,
    ``eps_frame`` the innovation in gain coordinates and ``pre_error`` the true
    navigation-frame error of the EKF estimate before injection (needed to
    differentiate the cost with respect to the gain during training).
    """

    state: np.ndarray
    action: np.ndarray
    cost: np.ndarray
    next_state: np.ndarray
    eps_frame: np.ndarray
    pre_error: np.ndarray

    @property
    def done(self) -> np.ndarray:
        d = np.zeros(len(self.cost), dtype=bool)
        d[-1] = True
        return d


def run_rlcekf(record, q0: np.ndarray, params: EkfParams, policy: CompensatorPolicy,
               frame: str = "navigation", exploration_std: float = 0.0,
               rng: np.random.Generator | None = None, trace: bool = False):
    """Filter an episode with RL compensation.

    Returns the ``(n, 4)`` estimates, plus a :class:`Trace` when ``trace`` is
    set (requires ground truth in ``record``).
    """
    n = len(record)
    out = np.empty((n, 4))
    state = initial_state(q0, params)
    out[0] = state.q
    y = record.y
    residual = np.zeros(3)
    truth = record.truth
    if trace:
        if truth is None:
            raise ValueError("a trace needs ground truth")
        cols = {k: np.empty((n - 1, d)) for k, d in
                (("state", 3), ("action", 18), ("next_state", 3), ("eps_frame", 6), ("pre_error", 3))}
        costs = np.empty(n - 1)
    for k in range(1, n):
        state, _ = ekf_step(state, record.gyro[k - 1], y[k], record.dt, params)
        eps = rl_innovation(state.q, y[k], params)
        noise = None
        if exploration_std > 0.0:
            noise = rng.normal(0.0, exploration_std, 18)
        prev = residual
        if trace:
            cols["pre_error"][k - 1] = quat_log(quat_multiply(truth[k], conjugate(state.q)))
            cols["eps_frame"][k - 1] = frame_innovation(state.q, eps, frame)
        act = policy.action(prev)
        if noise is not None:
            act = act + noise
        state, residual = apply_gain(state, eps, act, frame)
        if not np.all(np.isfinite(state.q)):
            raise NumericalError(f"non-finite estimate at frame {k}")
        out[k] = state.q
        if trace:
            cols["state"][k - 1] = prev
            cols["next_state"][k - 1] = residual
            cols["action"][k - 1] = act
            e = quat_log(quat_multiply(truth[k], conjugate(state.q)))
            costs[k - 1] = e @ e
    if trace:
        return out, Trace(cols["state"], cols["action"], costs, cols["next_state"],
                          cols["eps_frame"], cols["pre_error"])
    return out


def estimate_costs(truth: np.ndarray, est: np.ndarray) -> np.ndarray:
    """Per-frame squared attitude error (rad²)."""
    return batch_error_angle(truth, est) ** 2
