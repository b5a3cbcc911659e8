"""Ground-truth attitude trajectories and synthetic IMU measurements.

Accelerometer and magnetometer outputs are unit-normalized direction
measurements: ``y_a = -R^bn g^n + e_a`` and ``y_m = R^bn m^n + e_m`` with
``g^n = (0, 0, 1)`` and ``m^n = (cos δ, 0, -sin δ)`` for a dip angle ``δ``.
Noise covariances are expressed in that normalized scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DataError
from .rotation import normalize, quat_exp, quat_to_rotmat

GRAVITY_N = np.array([0.0, 0.0, 1.0])
DEFAULT_DIP_DEG = 71.0
DEFAULT_DT = 0.01
OMEGA_MAX = 10.0


def magnetic_direction(dip_deg: float = DEFAULT_DIP_DEG) -> np.ndarray:
    d = math.radians(dip_deg)
    return np.array([math.cos(d), 0.0, -math.sin(d)])


# --------------------------------------------------------------------------
# angular velocity profiles


def _check_bound(peak: float, omega_max: float) -> None:
    if not np.isfinite(peak) or peak > omega_max + 1e-12:
        raise ConfigurationError(
            f"angular velocity profile peak {peak:.3f} rad/s exceeds omega_max={omega_max}")


@dataclass(frozen=True)
class ZeroProfile:
    def __call__(self, t: float) -> np.ndarray:
        return np.zeros(3)


@dataclass(frozen=True)
class ConstantProfile:
    rate: tuple[float, float, float]
    omega_max: float = OMEGA_MAX

    def __post_init__(self):
        _check_bound(float(np.linalg.norm(self.rate)), self.omega_max)

    def __call__(self, t: float) -> np.ndarray:
        return np.array(self.rate, dtype=float)


@dataclass(frozen=True)
class SinusoidProfile:
    """``ω_i(t) = A_i sin(2π f_i t + φ_i)`` independently on each axis."""

    amplitude: tuple[float, float, float]
    frequency: tuple[float, float, float]
    phase: tuple[float, float, float] = (0.0, 0.0, 0.0)
    omega_max: float = OMEGA_MAX

    def __post_init__(self):
        _check_bound(float(np.linalg.norm(self.amplitude)), self.omega_max)

    def __call__(self, t: float) -> np.ndarray:
        a = np.asarray(self.amplitude, dtype=float)
        f = np.asarray(self.frequency, dtype=float)
        p = np.asarray(self.phase, dtype=float)
        return a * np.sin(2.0 * np.pi * f * t + p)


@dataclass(frozen=True)
class PiecewiseConstantProfile:
    """Rate ``rates[k]`` holds on ``[times[k], times[k+1])``; the last rate holds forever.

    Before ``times[0]`` the rate is zero.
    """

    times: tuple[float, ...]
    rates: tuple[tuple[float, float, float], ...]
    omega_max: float = OMEGA_MAX

    def __post_init__(self):
        if len(self.times) != len(self.rates) or not self.times:
            raise ConfigurationError("piecewise profile needs one rate per breakpoint")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ConfigurationError("piecewise profile breakpoints must increase")
        for r in self.rates:
            _check_bound(float(np.linalg.norm(r)), self.omega_max)

    def __call__(self, t: float) -> np.ndarray:
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        if k < 0:
            return np.zeros(3)
        return np.array(self.rates[k], dtype=float)


def training_profile() -> SinusoidProfile:
    """Default training motion: 1 rad/s sinusoids at 0.3 / 0.4 / 0.5 Hz."""
    return SinusoidProfile(amplitude=(1.0, 1.0, 1.0), frequency=(0.3, 0.4, 0.5))


# --------------------------------------------------------------------------
# noise


def _check_cov(name: str, cov) -> np.ndarray:
    c = np.asarray(cov, dtype=float)
    if c.shape != (3, 3) or not np.all(np.isfinite(c)):
        raise ConfigurationError(f"{name} must be a finite 3x3 matrix")
    if not np.allclose(c, c.T, atol=1e-12):
        raise ConfigurationError(f"{name} is not symmetric")
    if np.linalg.eigvalsh(c).min() < -1e-12:
        raise ConfigurationError(f"{name} is not positive semidefinite")
    return c


@dataclass(frozen=True)
class ScaleInterval:
    """Covariance multipliers applied on ``[start, stop)`` (seconds)."""

    start: float
    stop: float
    gyro: float = 1.0
    acc: float = 1.0
    mag: float = 1.0

    def __post_init__(self):
        if min(self.gyro, self.acc, self.mag) <= 0:
            raise ConfigurationError("covariance multipliers must be positive")


@dataclass(frozen=True)
class NoiseModel:
    gyro_cov: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    acc_cov: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    mag_cov: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    gyro_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    schedule: tuple[ScaleInterval, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gyro_cov", _check_cov("gyro_cov", self.gyro_cov))
        object.__setattr__(self, "acc_cov", _check_cov("acc_cov", self.acc_cov))
        object.__setattr__(self, "mag_cov", _check_cov("mag_cov", self.mag_cov))
        bias = np.asarray(self.gyro_bias, dtype=float).reshape(3)
        if not np.all(np.isfinite(bias)):
            raise ConfigurationError("gyro_bias must be finite")
        object.__setattr__(self, "gyro_bias", bias)
        object.__setattr__(self, "schedule", tuple(self.schedule))

    @classmethod
    def standard(cls, gyro_bias=(0.0, 0.0, 0.0)) -> "NoiseModel":
        """Training noise: Σ_ω = 3e-4 I, Σ_a = 5e-4 I, Σ_m = 3e-4 I."""
        return cls(0.0003 * np.eye(3), 0.0005 * np.eye(3), 0.0003 * np.eye(3),
                   np.asarray(gyro_bias, dtype=float))

    def multipliers(self, t: float) -> tuple[float, float, float]:
        g = a = m = 1.0
        for iv in self.schedule:
            if iv.start <= t < iv.stop:
                g, a, m = g * iv.gyro, a * iv.acc, m * iv.mag
        return g, a, m

    def to_dict(self) -> dict:
        return {
            "gyro_cov": self.gyro_cov.tolist(),
            "acc_cov": self.acc_cov.tolist(),
            "mag_cov": self.mag_cov.tolist(),
            "gyro_bias": self.gyro_bias.tolist(),
            "schedule": [vars(iv) for iv in self.schedule],
        }


def _sqrt_psd(c: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(c)
    return v * np.sqrt(np.clip(w, 0.0, None))


# --------------------------------------------------------------------------
# episodes


@dataclass(frozen=True)
class MeasurementFrame:
    t: float
    gyro: np.ndarray
    acc: np.ndarray
    mag: np.ndarray

    @property
    def y(self) -> np.ndarray:
        """Stacked vector observation ``(y_a; y_m)``."""
        return np.concatenate([self.acc, self.mag])


@dataclass
class EpisodeRecord:
    """Equally spaced measurement frames plus optional ground truth.

    Arrays are stored column-wise (``gyro`` is ``(n, 3)`` etc.) so filters can
    index them without building frame objects.
    """

    dt: float
    t: np.ndarray
    gyro: np.ndarray
    acc: np.ndarray
    mag: np.ndarray
    truth: np.ndarray | None = None
    noise: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        n = len(self.t)
        if n < 2:
            raise DataError("an episode needs at least two frames")
        for name in ("gyro", "acc", "mag"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.shape != (n, 3):
                raise DataError(f"{name} must have shape ({n}, 3), got {a.shape}")
            if not np.all(np.isfinite(a)):
                raise DataError(f"{name} contains non-finite values")
            setattr(self, name, a)
        self.t = np.asarray(self.t, dtype=float)
        if self.truth is not None:
            q = np.asarray(self.truth, dtype=float)
            if q.shape != (n, 4):
                raise DataError(f"truth must have shape ({n}, 4), got {q.shape}")
            if np.max(np.abs(np.linalg.norm(q, axis=1) - 1.0)) > 1e-6:
                raise DataError("truth quaternions must be unit norm")
            self.truth = q

    def __len__(self) -> int:
        return len(self.t)

    @property
    def y(self) -> np.ndarray:
        return np.hstack([self.acc, self.mag])

    def frame(self, i: int) -> MeasurementFrame:
        return MeasurementFrame(float(self.t[i]), self.gyro[i], self.acc[i], self.mag[i])

    def frames(self):
        for i in range(len(self)):
            yield self.frame(i)

    def slice(self, start: int, stop: int) -> "EpisodeRecord":
        truth = None if self.truth is None else self.truth[start:stop]
        return EpisodeRecord(self.dt, self.t[start:stop], self.gyro[start:stop],
                             self.acc[start:stop], self.mag[start:stop], truth,
                             dict(self.noise), self.seed)

    def split(self, fraction: float = 0.5) -> tuple["EpisodeRecord", "EpisodeRecord"]:
        """First ``fraction`` of the frames and the remainder."""
        k = int(round(len(self) * fraction))
        return self.slice(0, k), self.slice(k, len(self))


def integrate_truth(q0: np.ndarray, profile, dt: float, n: int) -> np.ndarray:
    """``n`` steps of ``q_t = q_{t-1} ⊗ exp(T ω(t_{t-1}))``; returns ``(n + 1, 4)`` with ``q0`` first."""
    if dt <= 0 or n < 1:
        raise ConfigurationError("integrate_truth needs dt > 0 and n >= 1")
    out = np.empty((n + 1, 4))
    q = normalize(np.asarray(q0, dtype=float))
    out[0] = q
    for k in range(1, n + 1):
        dq = quat_exp(dt * profile((k - 1) * dt))
        w, x, y, z = q
        bw, bx, by, bz = dq
        q = normalize(np.array([
            w * bw - x * bx - y * by - z * bz,
            w * bx + x * bw + y * bz - z * by,
            w * by - x * bz + y * bw + z * bx,
            w * bz + x * by - y * bx + z * bw,
        ]))
        out[k] = q
    return out


def synthesize_measurements(truth: np.ndarray, profile, noise: NoiseModel, seed: int | None,
                            dt: float = DEFAULT_DT, dip_deg: float = DEFAULT_DIP_DEG
                            ) -> EpisodeRecord:
    """Noisy gyro / accelerometer / magnetometer frames along ``truth``.

    Frame ``k`` carries the rate ``ω(k T) + bias + e_ω`` and the vector
    observations of ``truth[k]``.
    """
    if not isinstance(noise, NoiseModel):
        raise ConfigurationError("noise must be a NoiseModel")
    truth = np.asarray(truth, dtype=float)
    n = len(truth)
    t = np.arange(n) * dt
    m_n = magnetic_direction(dip_deg)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((3, n, 3))

    omega = np.array([profile(tk) for tk in t])
    scale = np.array([noise.multipliers(tk) for tk in t])
    gyro = omega + noise.gyro_bias + np.sqrt(scale[:, :1]) * (z[0] @ _sqrt_psd(noise.gyro_cov).T)

    acc = np.empty((n, 3))
    mag = np.empty((n, 3))
    for k in range(n):
        rbn = quat_to_rotmat(truth[k]).T
        acc[k] = -rbn @ GRAVITY_N
        mag[k] = rbn @ m_n
    acc += np.sqrt(scale[:, 1:2]) * (z[1] @ _sqrt_psd(noise.acc_cov).T)
    mag += np.sqrt(scale[:, 2:3]) * (z[2] @ _sqrt_psd(noise.mag_cov).T)

    meta = noise.to_dict()
    meta["dip_deg"] = dip_deg
    return EpisodeRecord(dt, t, gyro, acc, mag, truth.copy(), meta, seed)


def sample_initial_quaternion(seed=None) -> np.ndarray:
    """Normalized draw from ``U([-1, 1]^4)``; ``seed`` may be an int or a Generator."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    while True:
        q = rng.uniform(-1.0, 1.0, 4)
        n = np.linalg.norm(q)
        if n >= 1e-3:
            return q / n


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to generate one episode besides the seed."""

    profile: object = field(default_factory=training_profile)
    noise: NoiseModel = field(default_factory=NoiseModel.standard)
    dt: float = DEFAULT_DT
    n_samples: int = 1000
    dip_deg: float = DEFAULT_DIP_DEG

    def __post_init__(self):
        if self.dt <= 0 or self.n_samples < 2:
            raise ConfigurationError("SimConfig needs dt > 0 and n_samples >= 2")


def simulate_episode(config: SimConfig, seed: int, q0: np.ndarray | None = None) -> EpisodeRecord:
    """Random (or given) initial attitude, truth integration and measurements.

    The seed is split into independent streams for the initial attitude and the
    sensor noise so fixing ``q0`` does not change the noise realization.
    """
    ss = np.random.SeedSequence(seed)
    init_ss, noise_ss = ss.spawn(2)
    if q0 is None:
        q0 = sample_initial_quaternion(np.random.default_rng(init_ss))
    truth = integrate_truth(q0, config.profile, config.dt, config.n_samples - 1)
    rec = synthesize_measurements(truth, config.profile, config.noise,
                                  int(noise_ss.generate_state(1)[0]), config.dt, config.dip_deg)
    rec.seed = seed
    return rec


def as_sequence(x: Sequence[float] | float, n: int = 3) -> tuple[float, ...]:
    if np.isscalar(x):
        return (float(x),) * n
    return tuple(float(v) for v in x)
