"""Command-line harness: ``simulate``, ``train``, ``evaluate`` and ``ingest``.

A YAML file given with ``--config`` may set any flag (dashes become
underscores) plus the scenario knobs of :class:`ScenarioSpec` and a
``training`` mapping of :class:`TrainingConfig` fields. Flags win over the
environment variable ``RLC_EKF_SEED``, which wins over the file.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path

import yaml

from ..errors import ConfigurationError, DataError, NumericalError, RlcEkfError
from ..imu_sim import simulate_episode
from ..rl.policy_io import save_policy
from ..rl.training import TrainingConfig, train, train_and_select
from .dataset import export_dataset, ingest_dataset, split_train_eval
from .metrics import ANGLES
from .scenarios import FILTERS, ScenarioSpec, run_scenario, run_seeds

SEED_ENV = "RLC_EKF_SEED"
EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

_SPEC_KEYS = {f.name for f in fields(ScenarioSpec)}
_TRAIN_KEYS = {f.name for f in fields(TrainingConfig)}
_CLI_ONLY = {"out_dir", "config", "command", "policies"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigurationError(message)


def _filters(text: str) -> tuple[str, ...]:
    out = tuple(s.strip().upper() for s in text.split(",") if s.strip())
    bad = [f for f in out if f not in FILTERS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown filter(s) {bad}; choose from {','.join(FILTERS)}")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rlc-ekf", description="RL-compensated EKF attitude benchmark")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, scenario=True):
        sp.add_argument("--config", type=Path, help="YAML file mirroring the flags")
        sp.add_argument("--seed", type=int, help=f"seed base (env {SEED_ENV} when omitted)")
        sp.add_argument("--out-dir", type=Path, help="output directory")
        if scenario:
            sp.add_argument("--scenario", choices=["1", "2", "3", "real"])
            sp.add_argument("--runs", type=int)

    s = sub.add_parser("simulate", help="write simulated episodes as CSV")
    common(s)
    t = sub.add_parser("train", help="train and select a compensation policy")
    common(t, scenario=False)
    t.add_argument("--policy", type=Path, help="where to write the selected policy")
    t.add_argument("--policies", type=int, help="number of independently trained policies")
    e = sub.add_parser("evaluate", help="compare filters on a scenario")
    common(e)
    e.add_argument("--filters", type=_filters, help="comma-separated subset of " + ",".join(FILTERS))
    e.add_argument("--policy", type=Path, help="policy file for RLC-EKF")
    e.add_argument("--dataset", type=Path, help="recorded CSV for --scenario real")
    e.add_argument("--normalization", choices=["rank1", "projector"], help="EKF normalization Jacobian")
    i = sub.add_parser("ingest", help="validate a dataset CSV and split it in halves")
    i.add_argument("dataset", type=Path)
    common(i, scenario=False)
    return p


def load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from exc
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = set(data) - _SPEC_KEYS - _CLI_ONLY - {"training"}
    if unknown:
        raise ConfigurationError(f"{path}: unknown keys {sorted(unknown)}")
    return data


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults < config file < environment seed < flags."""
    cfg = load_config(getattr(args, "config", None))
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            cfg["seed"] = int(env)
        except ValueError as exc:
            raise ConfigurationError(f"{SEED_ENV} must be an integer, got {env!r}") from exc
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command"):
            cfg[k] = v
    if isinstance(cfg.get("filters"), str):
        cfg["filters"] = _filters(cfg["filters"])
    for k in ("policy", "dataset"):
        if cfg.get(k) is not None:
            cfg[k] = str(cfg[k])
    return cfg


def _spec(cfg: dict) -> ScenarioSpec:
    try:
        return ScenarioSpec(**{k: v for k, v in cfg.items() if k in _SPEC_KEYS})
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def _training(cfg: dict) -> TrainingConfig:
    t = dict(cfg.get("training") or {})
    unknown = set(t) - _TRAIN_KEYS
    if unknown:
        raise ConfigurationError(f"unknown training keys {sorted(unknown)}")
    if cfg.get("policies") is not None:
        t["n_policies"] = cfg["policies"]
    if "hidden" in t:
        t["hidden"] = tuple(t["hidden"])
    return TrainingConfig(**t)


def _out_dir(cfg: dict, default: str) -> Path:
    out = Path(cfg.get("out_dir") or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(cfg: dict) -> int:
    spec = _spec({**cfg, "filters": ("EKF",)})
    if spec.scenario == "real":
        raise ConfigurationError("simulate does not apply to the real-data scenario")
    out = _out_dir(cfg, "episodes")
    sim = spec.sim_config()
    for k, s in enumerate(run_seeds(spec.seed, spec.runs)):
        export_dataset(simulate_episode(sim, s), out / f"episode_{k}.csv")
    print(f"wrote {spec.runs} episode(s) to {out}")
    return EXIT_OK


def cmd_train(cfg: dict) -> int:
    spec = _spec({**cfg, "filters": ("EKF",), "scenario": "1", "policy": None})
    tc = _training(cfg)
    sim = spec.sim_config()
    params = spec.ekf_params()
    out = _out_dir(cfg, ".")
    path = Path(cfg.get("policy") or out / "policy.rlc")
    if tc.n_policies == 1:
        policy, log_ = train(sim, tc, spec.seed, params)
        logs, costs = [log_], []
    else:
        policy, logs, costs = train_and_select(sim, tc, spec.seed, params)
    save_policy(policy, path)
    (out / "training_log.json").write_text(
        json.dumps({"validation_costs": costs, "logs": [lg.to_dict() for lg in logs]}), encoding="utf-8")
    print(f"saved policy to {path}")
    if costs:
        print(f"validation costs: best {min(costs):.4g}, worst {max(costs):.4g}")
    return EXIT_OK


def cmd_evaluate(cfg: dict) -> int:
    spec = _spec(cfg)
    out = _out_dir(cfg, f"scenario_{spec.scenario}")
    report = run_scenario(spec, out)
    print(f"scenario {spec.scenario}: {report.runs} run(s), reports in {out}")
    print(f"{'filter':<18}" + "".join(f"{a:>10}" for a in ANGLES) + f"{'steady':>10}{'t_conv':>10}")
    for c, s in report.summary().items():
        print(f"{c:<18}" + "".join(f"{s['rmse_' + a]:>10.4f}" for a in ANGLES)
              + f"{s['steady_state_rmse']:>10.4f}{s['median_convergence_time']:>10.2f}")
    return EXIT_OK


def cmd_ingest(cfg: dict) -> int:
    rec = ingest_dataset(cfg["dataset"])
    first, second = split_train_eval(rec)
    print(f"{cfg['dataset']}: {len(rec)} frames at {1.0 / rec.dt:g} Hz, "
          f"ground truth {'present' if rec.truth is not None else 'absent'}")
    if cfg.get("out_dir"):
        out = _out_dir(cfg, ".")
        export_dataset(first, out / "train.csv")
        export_dataset(second, out / "eval.csv")
        print(f"wrote {len(first)} training and {len(second)} evaluation frames to {out}")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "train": cmd_train, "evaluate": cmd_evaluate, "ingest": cmd_ingest}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](resolve(args))
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except RlcEkfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
