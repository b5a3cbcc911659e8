"""Multi-run filter comparisons on simulated or recorded episodes.

Every run draws one episode and one initial estimate from its own seed; all
requested filters then process that identical episode from that identical
initial estimate. Run seeds depend only on the seed base and the run index, so
scenarios that differ in a single knob are paired run by run.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..baselines import run_cf, run_gyro
from ..ekf import EkfParams, run_ekf
from ..errors import ConfigurationError
from ..imu_sim import DEFAULT_DIP_DEG, NoiseModel, SimConfig, sample_initial_quaternion, simulate_episode
from ..rl.policy import FRAMES, CompensatorPolicy
from ..rl.policy_io import load_policy
from ..rl.rollout import run_rlcekf
from .dataset import ingest_dataset
from .metrics import ANGLES, CONVERGENCE_THRESHOLD, compute_rmse, convergence_time, euler_errors, \
    last_seconds, steady_state_rmse, total_error

FILTERS = ("EKF", "CF", "GYRO", "RLC-EKF")
SCENARIOS = ("1", "2", "3", "real")
DEFAULT_BETA = 0.041
SCENARIO3_BIAS = 0.02


@dataclass(frozen=True)
class ScenarioSpec:
    """One benchmark configuration.

    ``multipliers`` scale the EKF's assumed gyro / accelerometer / magnetometer
    covariances (also used inside RLC-EKF); ``betas`` lists CF gains, one CF
    column per entry; ``bias`` is the constant gyro bias added to the simulated
    rates. ``window_seconds`` sets the steady-state window at the end of each
    run; for recorded data the default window is the second half.
    """

    scenario: str = "1"
    filters: tuple[str, ...] = ("EKF", "CF", "RLC-EKF")
    runs: int = 50
    seed: int = 0
    multipliers: tuple[float, float, float] = (1.0, 1.0, 1.0)
    betas: tuple[float, ...] = (DEFAULT_BETA,)
    bias: tuple[float, float, float] | None = None
    policy: str | None = None
    dataset: str | None = None
    n_samples: int = 2000
    dt: float = 0.01
    dip_deg: float = DEFAULT_DIP_DEG
    normalization: str = "rank1"
    frame: str = "navigation"
    threshold: float = CONVERGENCE_THRESHOLD
    window_seconds: float = 5.0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scenario", str(self.scenario))
        object.__setattr__(self, "filters", tuple(self.filters))
        object.__setattr__(self, "multipliers", tuple(float(m) for m in self.multipliers))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        unknown = [f for f in self.filters if f not in FILTERS]
        if unknown or not self.filters:
            raise ConfigurationError(f"unknown filters {unknown}; choose from {FILTERS}")
        if len(set(self.filters)) != len(self.filters):
            raise ConfigurationError("duplicate filter names")
        if self.runs < 1:
            raise ConfigurationError("run count must be at least 1")
        if len(self.multipliers) != 3 or min(self.multipliers) <= 0:
            raise ConfigurationError("multipliers must be three positive numbers")
        if not self.betas or min(self.betas) < 0:
            raise ConfigurationError("CF gains must be non-negative")
        if self.bias is not None:
            b = tuple(float(v) for v in self.bias)
            if len(b) != 3 or not all(math.isfinite(v) for v in b):
                raise ConfigurationError("bias must be three finite numbers")
            object.__setattr__(self, "bias", b)
        if self.n_samples < 2 or self.dt <= 0:
            raise ConfigurationError("need n_samples >= 2 and dt > 0")
        if self.frame not in FRAMES:
            raise ConfigurationError(f"unknown frame {self.frame!r}")
        if self.threshold <= 0 or self.window_seconds <= 0 or self.workers < 1:
            raise ConfigurationError("threshold, window_seconds and workers must be positive")
        if self.scenario == "real" and not self.dataset:
            raise ConfigurationError("the real-data scenario needs a dataset path")
        if "RLC-EKF" in self.filters and not self.policy:
            raise ConfigurationError("RLC-EKF requires a policy file")
        EkfParams(normalization=self.normalization)

    @property
    def gyro_bias(self) -> tuple[float, float, float]:
        if self.bias is not None:
            return self.bias
        return (SCENARIO3_BIAS,) * 3 if self.scenario == "3" else (0.0, 0.0, 0.0)

    def with_(self, **changes) -> "ScenarioSpec":
        return replace(self, **changes)

    def columns(self) -> tuple[str, ...]:
        """Output column names: one per filter, one per CF gain."""
        out = []
        for f in self.filters:
            if f == "CF" and len(self.betas) > 1:
                out.extend(f"CF[beta={b:g}]" for b in self.betas)
            else:
                out.append(f)
        return tuple(out)

    def ekf_params(self) -> EkfParams:
        g, a, m = self.multipliers
        return EkfParams.from_noise(NoiseModel.standard(), self.dip_deg, gyro_mult=g, acc_mult=a,
                                    mag_mult=m, normalization=self.normalization)

    def sim_config(self) -> SimConfig:
        return SimConfig(noise=NoiseModel.standard(self.gyro_bias), dt=self.dt,
                         n_samples=self.n_samples, dip_deg=self.dip_deg)


def run_seeds(seed: int, runs: int) -> list[int]:
    """Per-run seeds; the first ``k`` do not depend on ``runs``."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(runs)]


@dataclass
class RunReport:
    """Per-run error series for every filter plus derived statistics.

    ``euler`` maps a filter column to a ``(runs, n, 3)`` array of wrapped
    yaw / pitch / roll errors and ``total`` to the ``(runs, n)`` rotation angle
    between truth and estimate. ``window`` is the ``(start, stop)`` sample range
    used for RMSE and steady-state statistics.
    """

    scenario: str
    dt: float
    time: np.ndarray
    columns: tuple[str, ...]
    euler: dict[str, np.ndarray]
    total: dict[str, np.ndarray]
    window: tuple[int, int]
    threshold: float = CONVERGENCE_THRESHOLD
    seeds: list[int] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.time)
        for c in self.columns:
            if self.euler[c].shape[1:] != (n, 3) or self.total[c].shape[1:] != (n,):
                raise ConfigurationError(f"series of {c} do not match the time axis")

    @property
    def runs(self) -> int:
        return self.total[self.columns[0]].shape[0]

    def band(self, column: str) -> tuple[np.ndarray, np.ndarray]:
        """Mean and population standard deviation over runs, each ``(n, 3)``."""
        e = self.euler[column]
        return e.mean(axis=0), e.std(axis=0)

    def rmse(self, column: str) -> np.ndarray:
        """``(runs, 3)`` per-angle RMSE over the evaluation window."""
        return np.array([compute_rmse(e, self.window) for e in self.euler[column]])

    def convergence_times(self, column: str) -> np.ndarray:
        return np.array([convergence_time(e, self.dt, self.threshold) for e in self.total[column]])

    def steady_state(self, column: str) -> np.ndarray:
        """``(runs,)`` RMS total attitude error over the evaluation window."""
        return np.array([steady_state_rmse(e, self.window) for e in self.total[column]])

    def steady_state_mean(self, column: str) -> np.ndarray:
        """``(runs,)`` mean total attitude error over the evaluation window."""
        s, t = self.window
        return self.total[column][:, s:t].mean(axis=1)

    def summary(self) -> dict[str, dict[str, float]]:
        out = {}
        for c in self.columns:
            r = self.rmse(c).mean(axis=0)
            out[c] = {**{f"rmse_{a}": float(v) for a, v in zip(ANGLES, r)},
                      "steady_state_rmse": float(self.steady_state(c).mean()),
                      "median_convergence_time": float(np.median(self.convergence_times(c)))}
        return out

    def write(self, out_dir) -> Path:
        """Write ``report.csv``, ``runs/run_<k>.csv``, ``rmse.csv`` and ``plot_report.py``."""
        out = Path(out_dir)
        (out / "runs").mkdir(parents=True, exist_ok=True)
        names = [f"{c}_{a}" for c in self.columns for a in (*ANGLES, "total")]
        for k in range(self.runs):
            cols = [self.time[:, None]]
            for c in self.columns:
                cols.extend([self.euler[c][k], self.total[c][k][:, None]])
            _write_csv(out / "runs" / f"run_{k}.csv", ["t", *names], np.hstack(cols))

        header, cols = ["t"], [self.time[:, None]]
        for c in self.columns:
            mean, std = self.band(c)
            header += [f"{c}_{a}_{s}" for s in ("mean", "std") for a in ANGLES]
            cols += [mean, std]
        _write_csv(out / "report.csv", header, np.hstack(cols))

        with open(out / "rmse.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["filter", "run", "seed", *ANGLES, "steady_state_rmse", "convergence_time"])
            for c in self.columns:
                rm, ss, ct = self.rmse(c), self.steady_state(c), self.convergence_times(c)
                for k in range(self.runs):
                    seed = self.seeds[k] if k < len(self.seeds) else ""
                    w.writerow([c, k, seed, *map(repr, rm[k].tolist()), repr(float(ss[k])), repr(float(ct[k]))])
                w.writerow([c, "mean", "", *map(repr, rm.mean(axis=0).tolist()), repr(float(ss.mean())),
                            repr(float(np.median(ct)))])
        (out / "plot_report.py").write_text(_PLOT_SCRIPT.format(columns=list(self.columns)), encoding="utf-8")
        return out


def _write_csv(path: Path, header, data: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in data:
            w.writerow([repr(float(v)) for v in row])


_PLOT_SCRIPT = '''"""Plot the mean +/- std error bands of report.csv (needs pandas and matplotlib)."""
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd

here = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent
df = pd.read_csv(here / "report.csv")
fig, axes = plt.subplots(3, 1, sharex=True, figsize=(8, 8))
for ax, angle in zip(axes, ("yaw", "pitch", "roll")):
    for col in {columns!r}:
        m, s = df[f"{{col}}_{{angle}}_mean"], df[f"{{col}}_{{angle}}_std"]
        ax.plot(df["t"], m, label=col)
        ax.fill_between(df["t"], m - s, m + s, alpha=0.2)
    ax.set_ylabel(f"{{angle}} error [rad]")
axes[0].legend()
axes[-1].set_xlabel("time [s]")
fig.tight_layout()
fig.savefig(here / "report.png", dpi=150)
'''


# --------------------------------------------------------------------------


def _filter_estimates(spec: ScenarioSpec, record, q0: np.ndarray, params: EkfParams,
                      policy: CompensatorPolicy | None) -> dict[str, np.ndarray]:
    out = {}
    for f in spec.filters:
        if f == "EKF":
            out[f] = run_ekf(record, q0, params)
        elif f == "GYRO":
            out[f] = run_gyro(record, q0)
        elif f == "RLC-EKF":
            out[f] = run_rlcekf(record, q0, params, policy, spec.frame)
        else:
            for b in spec.betas:
                key = f"CF[beta={b:g}]" if len(spec.betas) > 1 else "CF"
                out[key] = run_cf(record, q0, b, params)
    return out


def _one_run(args):
    spec, seed, policy, record = args
    params = spec.ekf_params()
    if record is None:
        record = simulate_episode(spec.sim_config(), seed)
    q0 = sample_initial_quaternion(np.random.default_rng([seed, 1]))
    est = _filter_estimates(spec, record, q0, params, policy)
    return ({c: euler_errors(record.truth, est[c]) for c in spec.columns()},
            {c: total_error(record.truth, est[c]) for c in spec.columns()},
            record.t - record.t[0], record.dt)


def run_scenario(spec: ScenarioSpec, out_dir=None, policy: CompensatorPolicy | None = None) -> RunReport:
    """Run every filter of ``spec`` on ``spec.runs`` paired episodes.

    ``policy`` overrides ``spec.policy`` (handy in-process); otherwise the
    policy file is loaded when RLC-EKF is requested. Reports are written to
    ``out_dir`` when given.
    """
    if "RLC-EKF" in spec.filters and policy is None:
        policy = load_policy(spec.policy)
    seeds = run_seeds(spec.seed, spec.runs)
    record = None
    if spec.scenario == "real":
        record = ingest_dataset(spec.dataset)
        if record.truth is None:
            raise ConfigurationError("evaluation needs ground-truth columns qw,qx,qy,qz")
    jobs = [(spec, s, policy, record) for s in seeds]
    if spec.workers > 1 and spec.runs > 1:
        with ProcessPoolExecutor(spec.workers) as ex:
            results = list(ex.map(_one_run, jobs))
    else:
        results = [_one_run(j) for j in jobs]

    time, dt = results[0][2], results[0][3]
    n = len(time)
    if spec.scenario == "real":
        window = (n // 2, n)
    else:
        window = last_seconds(n, dt, spec.window_seconds)
    cols = spec.columns()
    report = RunReport(spec.scenario, dt, time, cols,
                       {c: np.stack([r[0][c] for r in results]) for c in cols},
                       {c: np.stack([r[1][c] for r in results]) for c in cols},
                       window, spec.threshold, seeds)
    if out_dir is not None:
        report.write(out_dir)
    return report
