"""CSV episode files shared by simulated and recorded data.

Header ``t,gyro_x,gyro_y,gyro_z,acc_x,acc_y,acc_z,mag_x,mag_y,mag_z`` with the
optional ground-truth columns ``qw,qx,qy,qz``. Times in seconds, rates in rad/s,
accelerometer and magnetometer as normalized directions.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from ..errors import DataError, SchemaError
from ..imu_sim import EpisodeRecord

SENSOR_COLUMNS = ("t", "gyro_x", "gyro_y", "gyro_z", "acc_x", "acc_y", "acc_z", "mag_x", "mag_y", "mag_z")
TRUTH_COLUMNS = ("qw", "qx", "qy", "qz")
PERIOD_TOLERANCE = 0.01


def export_dataset(record: EpisodeRecord, path) -> None:
    """Write ``record`` with ``repr``-exact floats so ingestion round-trips bit for bit."""
    cols = list(SENSOR_COLUMNS) + (list(TRUTH_COLUMNS) if record.truth is not None else [])
    blocks = [record.t[:, None], record.gyro, record.acc, record.mag]
    if record.truth is not None:
        blocks.append(record.truth)
    data = np.hstack(blocks)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in data:
            w.writerow([repr(float(v)) for v in row])


def ingest_dataset(path, dt: float | None = None) -> EpisodeRecord:
    """Read and validate an episode CSV.

    Raises :class:`SchemaError` naming missing columns and :class:`DataError`
    with the 1-based file line for unparsable or non-finite values, non-increasing
    time stamps and sample periods deviating more than 1% from the median.
    """
    path = Path(path)
    try:
        fh = open(path, encoding="utf-8", newline="")
    except FileNotFoundError as exc:
        raise DataError(f"dataset not found: {path}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        header = [h.strip() for h in header]
        missing = [c for c in SENSOR_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {', '.join(missing)}")
        present_truth = [c for c in TRUTH_COLUMNS if c in header]
        if present_truth and len(present_truth) != len(TRUTH_COLUMNS):
            absent = [c for c in TRUTH_COLUMNS if c not in header]
            raise SchemaError(f"{path}: incomplete ground truth, missing columns {', '.join(absent)}")
        wanted = list(SENSOR_COLUMNS) + present_truth
        idx = [header.index(c) for c in wanted]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                vals = [float(row[i]) for i in idx]
            except (IndexError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: malformed row ({exc})") from exc
            if not all(math.isfinite(v) for v in vals):
                bad = [c for c, v in zip(wanted, vals) if not math.isfinite(v)]
                raise DataError(f"{path}:{lineno}: non-finite value in {', '.join(bad)}")
            rows.append((lineno, vals))
    if len(rows) < 2:
        raise DataError(f"{path}: need at least two data rows")
    lines = np.array([ln for ln, _ in rows])
    data = np.array([v for _, v in rows])
    t = data[:, 0]
    steps = np.diff(t)
    if np.any(steps <= 0):
        k = int(np.argmax(steps <= 0)) + 1
        raise DataError(f"{path}:{lines[k]}: time stamps must increase strictly")
    # differences of printed time stamps carry rounding noise; 12 digits is plenty for a period
    period = float(f"{np.median(steps):.12g}") if dt is None else float(dt)
    off = np.abs(steps - period) > PERIOD_TOLERANCE * period
    if np.any(off):
        k = int(np.argmax(off)) + 1
        raise DataError(f"{path}:{lines[k]}: sample period {steps[k - 1]:.6g} s deviates more than 1% "
                        f"from {period:.6g} s")
    truth = None
    if present_truth:
        truth = data[:, 10:14]
        norms = np.linalg.norm(truth, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            k = int(np.argmax(np.abs(norms - 1.0) > 1e-6))
            raise DataError(f"{path}:{lines[k]}: ground-truth quaternion is not unit norm")
    return EpisodeRecord(period, t, data[:, 1:4], data[:, 4:7], data[:, 7:10], truth,
                         {"source": str(path)})


def split_train_eval(record: EpisodeRecord) -> tuple[EpisodeRecord, EpisodeRecord]:
    """First half for training, second half for evaluation."""
    return record.split(0.5)
