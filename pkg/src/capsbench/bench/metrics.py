"""Per-epoch metric records and the CSV / results-table writers."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SPLITS = ("train", "validation", "test")
METRICS_HEADER = ("epoch", "split", "loss", "accuracy", "wall_time_s")
RESULTS_HEADER = ("dataset", "classes", "instances", "algorithm", "avg_training_time", "test_accuracy")


@dataclass(frozen=True)
class MetricsRecord:
    epoch: int
    split: str
    loss: float
    accuracy: float
    wall_time_s: float = 0.0

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")
        if self.wall_time_s < 0:
            raise ValueError("wall_time_s must be >= 0")


def _sort_key(r: MetricsRecord):
    return r.epoch, SPLITS.index(r.split)


def emit_metrics_csv(records, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for r in sorted(records, key=_sort_key):
            w.writerow([r.epoch, r.split, repr(float(r.loss)), repr(float(r.accuracy)),
                        repr(float(r.wall_time_s))])
    return path


def read_metrics_csv(path) -> list[MetricsRecord]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != METRICS_HEADER:
            raise ValueError(f"unexpected metrics header {reader.fieldnames}")
        return [MetricsRecord(int(row["epoch"]), row["split"], float(row["loss"]),
                              float(row["accuracy"]), float(row["wall_time_s"])) for row in reader]


def evaluate_accuracy(predict, samples) -> float:
    """Fraction of samples whose predicted label equals the true one.

    ``predict`` maps an ``N x H x W x 1`` batch to ``N`` labels.
    """
    from ..data import stack

    if not samples:
        raise ValueError("cannot evaluate accuracy on an empty sample list")
    images, labels = stack(samples)
    pred = np.asarray(predict(images))
    return float(np.count_nonzero(pred == labels)) / len(labels)


@dataclass
class RunSummary:
    dataset: str
    classes: int
    instances: int
    algorithm: str
    avg_training_time_s: float
    test_accuracy: float


def format_percent(acc: float) -> str:
    return f"{100.0 * acc:.1f}%"


def format_duration(seconds: float) -> str:
    if math.isnan(seconds):
        return "n/a"
    if seconds < 120:
        return f"{seconds:.1f} s"
    if seconds < 7200:
        return f"{seconds / 60:.1f} min"
    return f"{seconds / 3600:.1f} h"


def emit_results_table(summaries, path) -> Path:
    """Comparison table, one row per run. ``.md`` paths get a Markdown table,
    anything else CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [(s.dataset, str(s.classes), str(s.instances), s.algorithm,
             format_duration(s.avg_training_time_s), format_percent(s.test_accuracy))
            for s in summaries]
    if path.suffix == ".md":
        lines = ["| " + " | ".join(RESULTS_HEADER) + " |",
                 "|" + "|".join("---" for _ in RESULTS_HEADER) + "|"]
        lines += ["| " + " | ".join(r) + " |" for r in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RESULTS_HEADER)
            w.writerows(rows)
    return path
