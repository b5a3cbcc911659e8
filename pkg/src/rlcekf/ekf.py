"""Quaternion-state extended Kalman filter.

One filter step is predict -> correct -> normalize; the correction is additive
on the four quaternion components and leaves the state off the unit sphere
until :func:`normalize_with_jacobian` runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, CorrectionError, FilterDivergenceError
from .imu_sim import GRAVITY_N, NoiseModel, magnetic_direction
from .rotation import dexp, quat_exp, quat_left, quat_right

_DEXP0 = dexp(np.zeros(3))
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class FilterState:
    q: np.ndarray
    P: np.ndarray


@dataclass(frozen=True)
class Innovation:
    eps: np.ndarray
    S: np.ndarray
    K: np.ndarray


@dataclass(frozen=True)
class EkfParams:
    """Filter noise model and reference directions.

    ``gyro_mult``, ``acc_mult`` and ``mag_mult`` scale the assumed gyroscope,
    accelerometer and magnetometer covariances (the a, b, c of the
    gain-sensitivity experiments). ``normalization`` picks the covariance
    Jacobian used after the additive update: ``"rank1"`` is ``q qᵀ / |q|³``,
    ``"projector"`` is ``(I - q̂ q̂ᵀ) / |q|``.
    """

    gyro_cov: np.ndarray = field(default_factory=lambda: 0.0003 * np.eye(3))
    acc_cov: np.ndarray = field(default_factory=lambda: 0.0005 * np.eye(3))
    mag_cov: np.ndarray = field(default_factory=lambda: 0.0003 * np.eye(3))
    g_n: np.ndarray = field(default_factory=lambda: GRAVITY_N.copy())
    m_n: np.ndarray = field(default_factory=magnetic_direction)
    gyro_mult: float = 1.0
    acc_mult: float = 1.0
    mag_mult: float = 1.0
    normalization: str = "rank1"
    p0: float = 0.5

    def __post_init__(self):
        for name in ("gyro_cov", "acc_cov", "mag_cov"):
            c = np.asarray(getattr(self, name), dtype=float)
            if c.shape != (3, 3) or not np.allclose(c, c.T) or np.linalg.eigvalsh(c).min() < -1e-12:
                raise ConfigurationError(f"{name} must be a symmetric PSD 3x3 matrix")
            object.__setattr__(self, name, c)
        for name in ("g_n", "m_n"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(3)
            object.__setattr__(self, name, v)
        if min(self.gyro_mult, self.acc_mult, self.mag_mult) <= 0:
            raise ConfigurationError("covariance multipliers must be positive")
        if self.normalization not in ("rank1", "projector"):
            raise ConfigurationError(f"unknown normalization {self.normalization!r}")
        if self.p0 <= 0:
            raise ConfigurationError("p0 must be positive")
        Q = self.gyro_mult * self.gyro_cov
        R = np.zeros((6, 6))
        R[:3, :3] = self.acc_mult * self.acc_cov
        R[3:, 3:] = self.mag_mult * self.mag_cov
        object.__setattr__(self, "_Q", Q)
        object.__setattr__(self, "_R", R)

    @classmethod
    def from_noise(cls, noise: NoiseModel, dip_deg: float | None = None, **kw) -> "EkfParams":
        """Filter tuned to the true covariances of a simulated noise model (bias ignored)."""
        if dip_deg is not None:
            kw.setdefault("m_n", magnetic_direction(dip_deg))
        return cls(noise.gyro_cov, noise.acc_cov, noise.mag_cov, **kw)

    def with_(self, **changes) -> "EkfParams":
        return replace(self, **changes)

    @property
    def Q(self) -> np.ndarray:
        return self._Q

    @property
    def R(self) -> np.ndarray:
        return self._R


def initial_state(q0: np.ndarray, params: EkfParams) -> FilterState:
    return FilterState(np.asarray(q0, dtype=float).copy(), params.p0 * np.eye(4))


def _rt(q: np.ndarray, v: np.ndarray) -> tuple[list[float], list[list[float]]]:
    """``Rᵀ(q) v`` and its 3x4 Jacobian for the homogeneous ``Rᵀ(q) v = q* ⊗ v ⊗ q``."""
    w, x, y, z = q
    a, b, c = v
    uv = x * a + y * b + z * c
    cx, cy, cz = y * c - z * b, z * a - x * c, x * b - y * a  # u × v
    s = w * w - x * x - y * y - z * z
    f = [s * a + 2.0 * (uv * x - w * cx), s * b + 2.0 * (uv * y - w * cy), s * c + 2.0 * (uv * z - w * cz)]
    # columns: d/dw = 2(w v - u×v); d/du = 2((u·v) I + u vᵀ - v uᵀ + w [v×])
    D = [
        [2 * (w * a - cx), 2 * uv, 2 * (x * b - a * y - w * c), 2 * (x * c - a * z + w * b)],
        [2 * (w * b - cy), 2 * (y * a - b * x + w * c), 2 * uv, 2 * (y * c - b * z - w * a)],
        [2 * (w * c - cz), 2 * (z * a - c * x - w * b), 2 * (z * b - c * y + w * a), 2 * uv],
    ]
    return f, D


def measurement_model(q: np.ndarray, params: EkfParams) -> np.ndarray:
    """Predicted ``(y_a; y_m) = (-R^bn g^n; R^bn m^n)``."""
    fg, _ = _rt(q, params.g_n)
    fm, _ = _rt(q, params.m_n)
    return np.array([-fg[0], -fg[1], -fg[2], fm[0], fm[1], fm[2]])


def measurement_jacobian(q: np.ndarray, params: EkfParams) -> np.ndarray:
    """6x4 Jacobian of :func:`measurement_model` with respect to ``q``."""
    _, Dg = _rt(q, params.g_n)
    _, Dm = _rt(q, params.m_n)
    return np.array([[-d for d in row] for row in Dg] + Dm)


def _model_and_jacobian(q: np.ndarray, params: EkfParams) -> tuple[np.ndarray, np.ndarray]:
    fg, Dg = _rt(q, params.g_n)
    fm, Dm = _rt(q, params.m_n)
    h = np.array([-fg[0], -fg[1], -fg[2], fm[0], fm[1], fm[2]])
    return h, np.array([[-d for d in row] for row in Dg] + Dm)


def process_jacobians(q: np.ndarray, y_omega: np.ndarray, dt: float):
    """``(F, G)`` of the propagation ``q ⊗ exp(T (y_ω - e_ω))`` w.r.t. ``q`` and ``e_ω``."""
    F = quat_right(quat_exp(dt * np.asarray(y_omega, dtype=float)))
    G = -dt * quat_left(q) @ _DEXP0
    return F, G


def _sym(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def predict(state: FilterState, y_omega: np.ndarray, dt: float, params: EkfParams) -> FilterState:
    F, G = process_jacobians(state.q, y_omega, dt)
    q = F @ state.q
    P = F @ state.P @ F.T + G @ params.Q @ G.T
    return FilterState(q, _sym(P))


def correct(state: FilterState, y: np.ndarray, params: EkfParams) -> tuple[FilterState, Innovation]:
    """Additive correction with the stacked accelerometer / magnetometer observation.

    Raises :class:`CorrectionError` when ``S`` has condition number above 1e12.
    """
    q, P = state.q, state.P
    h, H = _model_and_jacobian(q, params)
    eps = np.asarray(y, dtype=float) - h
    S = _sym(H @ P @ H.T + params.R)
    lam, V = np.linalg.eigh(S)
    if not lam[0] > 0 or lam[-1] / lam[0] > _COND_LIMIT:
        raise CorrectionError(f"innovation covariance ill-conditioned (eigenvalues {lam[0]:.3e}..{lam[-1]:.3e})")
    S_inv = (V / lam) @ V.T
    K = P @ H.T @ S_inv
    q_new = q + K @ eps
    P_new = _sym(P - K @ S @ K.T)
    return FilterState(q_new, P_new), Innovation(eps, S, K)


def normalize_with_jacobian(state: FilterState, mode: str = "rank1") -> FilterState:
    q = state.q
    n = float(np.sqrt(q @ q))
    if n < 1e-6:
        raise FilterDivergenceError(f"quaternion norm collapsed to {n:.3e}")
    qn = q / n
    if mode == "rank1":
        J = np.outer(q, q) / n**3
    elif mode == "projector":
        J = (np.eye(4) - np.outer(qn, qn)) / n
    else:
        raise ConfigurationError(f"unknown normalization {mode!r}")
    return FilterState(qn, _sym(J @ state.P @ J.T))


def ekf_step(state: FilterState, gyro_prev: np.ndarray, y: np.ndarray, dt: float,
             params: EkfParams) -> tuple[FilterState, Innovation | None]:
    """Predict with the previous gyro sample, correct with ``y``, normalize.

    An ill-conditioned correction is skipped for that frame.
    """
    state = predict(state, gyro_prev, dt, params)
    try:
        state, innov = correct(state, y, params)
    except CorrectionError:
        innov = None
    return normalize_with_jacobian(state, params.normalization), innov


def run_ekf(record, q0: np.ndarray, params: EkfParams) -> np.ndarray:
    """Filter a whole episode; returns the ``(n, 4)`` estimates with ``q0`` first."""
    n = len(record)
    out = np.empty((n, 4))
    state = initial_state(q0, params)
    out[0] = state.q
    y = record.y
    for k in range(1, n):
        state, _ = ekf_step(state, record.gyro[k - 1], y[k], record.dt, params)
        out[k] = state.q
    return out
