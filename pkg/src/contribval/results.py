"""Per-round CSV and summary JSON writers.

Floats are written with ``repr`` so files round-trip exactly and identical
runs produce identical bytes.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

from .sim import ExperimentReport, RoundRecord


class ResultsWriteError(OSError):
    pass


def csv_header(n_clients: int) -> list[str]:
    return ["round", "selected_ids", *(f"phi_{i}" for i in range(n_clients)), "alpha", "eval_accuracy", "utility_calls"]


def record_row(rec: RoundRecord) -> list[str]:
    return [
        str(rec.round),
        ";".join(str(i) for i in rec.selected),
        *(repr(float(p)) for p in rec.phi),
        ";".join(repr(float(a)) for a in rec.alpha),
        repr(float(rec.eval_accuracy)),
        str(rec.utility_calls),
    ]


def write_round_csv(path, records: list[RoundRecord], n_clients: int) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(csv_header(n_clients))
            for rec in records:
                w.writerow(record_row(rec))
    except OSError as exc:
        raise ResultsWriteError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def write_summary(path, summary: dict) -> Path:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise ResultsWriteError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def write_results(report: ExperimentReport, out_dir) -> list[Path]:
    """One ``rounds_seed<k>.csv`` per seed plus ``summary.json`` in ``out_dir``."""
    out = Path(out_dir)
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise ResultsWriteError(f"cannot create {out}: {exc.strerror or exc}") from exc
    n = report.config.n_clients
    paths = [write_round_csv(out / f"rounds_seed{run.seed}.csv", run.records, n) for run in report.runs]
    paths.append(write_summary(out / "summary.json", report.summary()))
    return paths
