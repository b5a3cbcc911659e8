"""Scenario benchmarks, dataset I/O, metrics and the command-line harness."""

from .dataset import export_dataset, ingest_dataset, split_train_eval
from .metrics import compute_rmse, convergence_time, euler_errors, wrap_angle
from .scenarios import RunReport, ScenarioSpec, run_scenario
