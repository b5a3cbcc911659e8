"""Comparison filters: gradient-descent complementary filter and raw gyro integration."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ekf import EkfParams, measurement_jacobian, measurement_model
from .errors import ConfigurationError
from .rotation import normalize, quat_exp, quat_multiply


@dataclass(frozen=True)
class CfState:
    q: np.ndarray
    beta: float = 0.041

    def __post_init__(self):
        if not self.beta >= 0:
            raise ConfigurationError("beta must be non-negative")


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def cf_step(state: CfState, gyro: np.ndarray, acc: np.ndarray, mag: np.ndarray, dt: float,
            params: EkfParams) -> CfState:
    """One MARG update ``q̇ = ½ q ⊗ ω - β ∇f / |∇f|``, ``q ← normalize(q + T q̇)``.

    ``f(q) = h(q) - y`` stacks the gravity and magnetic residuals with the same
    reference directions as the EKF; ``y_a`` and ``y_m`` are normalized first.
    A vanishing gradient drops the corrective term for that step.
    """
    q = state.q
    w, x, y, z = q
    gx, gy, gz = gyro
    qdot = 0.5 * np.array([
        -x * gx - y * gy - z * gz,
        w * gx + y * gz - z * gy,
        w * gy - x * gz + z * gx,
        w * gz + x * gy - y * gx,
    ])
    if state.beta > 0:
        f = measurement_model(q, params) - np.concatenate([_unit(acc), _unit(mag)])
        grad = measurement_jacobian(q, params).T @ f
        n = math.sqrt(grad @ grad)
        if n > 0.0:
            qdot = qdot - state.beta * grad / n
    return CfState(normalize(q + dt * qdot), state.beta)


def gyro_integrate_step(q: np.ndarray, gyro: np.ndarray, dt: float) -> np.ndarray:
    return quat_multiply(q, quat_exp(dt * np.asarray(gyro, dtype=float)))


def run_cf(record, q0: np.ndarray, beta: float, params: EkfParams) -> np.ndarray:
    """CF estimates ``(n, 4)``; frame ``k`` is propagated with the gyro sample of frame ``k - 1``."""
    n = len(record)
    out = np.empty((n, 4))
    state = CfState(normalize(np.asarray(q0, dtype=float)), beta)
    out[0] = state.q
    for k in range(1, n):
        state = cf_step(state, record.gyro[k - 1], record.acc[k], record.mag[k], record.dt, params)
        out[k] = state.q
    return out


def run_gyro(record, q0: np.ndarray) -> np.ndarray:
    n = len(record)
    out = np.empty((n, 4))
    q = normalize(np.asarray(q0, dtype=float))
    out[0] = q
    for k in range(1, n):
        q = gyro_integrate_step(q, record.gyro[k - 1], record.dt)
        out[k] = q
    return out
