"""
Running a benchmark scenario
============================

Scenarios pair every filter on the same simulated episodes and initial
estimates, then write per-run Euler errors, mean/std bands and RMSE tables.
The command line exposes the same runs, for example::

    rlc-ekf evaluate --scenario 3 --filters EKF,CF,GYRO --runs 10 --out-dir out
"""

import tempfile
from pathlib import Path

from rlcekf.bench import cli
from rlcekf.bench.scenarios import ScenarioSpec, run_scenario

spec = ScenarioSpec(scenario="3", filters=("EKF", "CF", "GYRO"), runs=5, seed=1, normalization="projector")
with tempfile.TemporaryDirectory() as out:
    report = run_scenario(spec, out)
    for column in report.columns:
        print(f"{column:5s} RMSE yaw/pitch/roll:", report.rmse(column).mean(axis=0).round(4))
    print("files:", sorted(p.name for p in Path(out).iterdir()))

    # the same through the command-line entry point; the exit code is 0 on success
    code = cli.main(["evaluate", "--scenario", "1", "--filters", "EKF,CF", "--runs", "2", "--out-dir", out])
    print("exit code:", code)
