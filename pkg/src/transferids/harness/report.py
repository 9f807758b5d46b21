"""CSV / JSON report writers and readers."""
from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path
from typing import Iterable

from transferids.classical import KINDS
from transferids.harness.metrics import COLUMNS, MetricRecord

CURVE_FILES = {"transfer": "transfer_curves.csv", "ensemble": "ensemble_curves.csv",
                "detect-reject": "detect_reject_curves.csv"}


def write_metrics_csv(records: Iterable[MetricRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in records:
            w.writerow([r.experiment, r.method, repr(float(r.epsilon)), r.model, r.metric,
                        repr(float(r.value)), r.n])


def read_metrics_csv(path: str | Path) -> list[MetricRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != COLUMNS:
            raise ValueError(f"{path}: unexpected metrics header {header}")
        return [MetricRecord(row[0], row[1], float(row[2]), row[3], row[4], float(row[5]), int(row[6]))
                for row in reader if row]


def _wide_accuracy(records: list[MetricRecord], experiment: str, path: Path) -> None:
    models: list[str] = []
    table: dict[tuple[str, float], dict[str, float]] = defaultdict(dict)
    for r in records:
        if r.experiment == experiment and r.metric == "accuracy":
            if r.model not in models:
                models.append(r.model)
            table[(r.method, r.epsilon)][r.model] = r.value
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "epsilon", *models])
        for (method, eps), row in table.items():
            w.writerow([method, repr(eps), *(repr(row[m]) if m in row else "" for m in models)])


def _wide_dr(records: list[MetricRecord], path: Path) -> None:
    cell: dict[tuple[str, float, str], dict[str, float]] = defaultdict(dict)
    for r in records:
        if r.experiment != "detect-reject":
            continue
        kind = r.model[3:] if r.model.startswith("dr-") else r.model
        col = ("with_dr:" if r.model.startswith("dr-") else "without_dr:") + r.metric
        cell[(r.method, r.epsilon, kind)][col] = r.value
    cols = ["without_dr:robust_accuracy", "with_dr:robust_accuracy", "with_dr:adversarial_detection_rate",
            "with_dr:clean_rejection_rate", "without_dr:accuracy", "with_dr:accuracy"]
    order = {k.value: i for i, k in enumerate(KINDS)}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "epsilon", "model", *cols])
        for (method, eps, kind) in sorted(cell, key=lambda c: (c[0], c[1], order.get(c[2], 99))):
            row = cell[(method, eps, kind)]
            w.writerow([method, repr(eps), kind, *(repr(row[c]) if c in row else "" for c in cols)])


def write_curves(records: list[MetricRecord], out: Path) -> list[Path]:
    written = []
    experiments = {r.experiment for r in records}
    for exp, fname in CURVE_FILES.items():
        if exp not in experiments:
            continue
        path = out / fname
        if exp == "detect-reject":
            _wide_dr(records, path)
        else:
            _wide_accuracy(records, exp, path)
        written.append(path)
    return written


def write_report(report, out: str | Path, curves: bool = True) -> list[Path]:
    """Write ``metrics.csv``, ``report.json`` and the curve CSVs into ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(report.records, out / "metrics.csv")
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True, default=str) + "\n")
    paths = [out / "metrics.csv", out / "report.json"]
    if curves:
        paths += write_curves(report.records, out)
    return paths


def merge_metrics(paths: Iterable[str | Path], out: str | Path) -> list[MetricRecord]:
    """Concatenate metrics files, rejecting duplicate cells, and rebuild curve CSVs."""
    records: list[MetricRecord] = []
    seen = set()
    for p in paths:
        p = Path(p)
        if p.is_dir():
            p = p / "metrics.csv"
        for r in read_metrics_csv(p):
            if r.cell in seen:
                raise ValueError(f"duplicate metric cell {r.cell} in {p}")
            seen.add(r.cell)
            records.append(r)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(records, out / "metrics.csv")
    write_curves(records, out)
    return records
