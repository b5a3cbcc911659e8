"""Error series and summary statistics for attitude estimates."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigurationError
from ..rotation import batch_error_angle, quat_to_euler

ANGLES = ("yaw", "pitch", "roll")
CONVERGENCE_THRESHOLD = 0.1


def wrap_angle(a):
    """Map angles to ``(-pi, pi]``."""
    a = np.asarray(a, dtype=float)
    w = np.mod(a + math.pi, 2.0 * math.pi) - math.pi
    return np.where(w == -math.pi, math.pi, w)


def euler_series(q: np.ndarray) -> np.ndarray:
    return np.array([quat_to_euler(row) for row in np.asarray(q, dtype=float)])


def euler_errors(truth: np.ndarray, est: np.ndarray) -> np.ndarray:
    """``(n, 3)`` yaw / pitch / roll of truth minus estimate, wrapped."""
    return wrap_angle(euler_series(truth) - euler_series(est))


def total_error(truth: np.ndarray, est: np.ndarray) -> np.ndarray:
    """Rotation angle between truth and estimate per frame (rad)."""
    return batch_error_angle(np.asarray(truth, dtype=float), np.asarray(est, dtype=float))


def _window(n: int, window) -> slice:
    if window is None:
        return slice(0, n)
    start, stop = window
    start = 0 if start is None else start
    stop = n if stop is None else stop
    s = slice(*slice(start, stop).indices(n)[:2])
    if s.stop <= s.start:
        raise ConfigurationError(f"empty evaluation window {window} for {n} samples")
    return s


def compute_rmse(errors: np.ndarray, window=None) -> np.ndarray:
    """Per-column RMSE of wrapped errors over ``window = (start, stop)`` sample indices."""
    e = wrap_angle(np.asarray(errors, dtype=float))
    e = e[_window(len(e), window)]
    return np.sqrt(np.mean(e * e, axis=0))


def convergence_time(error: np.ndarray, dt: float, threshold: float = CONVERGENCE_THRESHOLD) -> float:
    """First time after which ``error`` stays below ``threshold``; ``inf`` if it never settles."""
    above = np.flatnonzero(np.asarray(error) >= threshold)
    if len(above) == 0:
        return 0.0
    k = above[-1] + 1
    return math.inf if k >= len(error) else k * dt


def steady_state_rmse(error: np.ndarray, window) -> float:
    """RMS of a total-error series over ``window``."""
    e = np.asarray(error, dtype=float)[_window(len(error), window)]
    return float(np.sqrt(np.mean(e * e)))


def last_seconds(n: int, dt: float, seconds: float) -> tuple[int, int]:
    """Sample window covering the final ``seconds`` of an ``n``-frame series."""
    k = max(1, int(round(seconds / dt)))
    return max(0, n - k), n
