"""Run every ``*.cfg`` in a directory and collect a comparison table."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import parse_config
from .metrics import RunSummary, emit_results_table
from .train import train

ALGORITHM_NAMES = {"capsnet": "CapsNet", "lenet": "LeNet-5", "fisherfaces": "Fisherfaces",
                   "tiny_resnet": "ResNet"}


def worker_count(n_jobs: int) -> int:
    """Parallel experiments allowed by ``CAPSBENCH_THREADS`` (default 1)."""
    raw = os.environ.get("CAPSBENCH_THREADS", "1")
    try:
        cap = max(1, int(raw))
    except ValueError:
        raise ValueError(f"CAPSBENCH_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(cap, n_jobs))


def run_one(path) -> RunSummary:
    cfg = parse_config(path)
    res = train(cfg)
    split = res.split
    instances = len(split.train) + len(split.validation) + len(split.test)
    dataset = "synth" if cfg.dataset == "synth" else Path(cfg.dataset).name
    return RunSummary(dataset, res.n_classes, instances, ALGORITHM_NAMES[cfg.model],
                      res.training_time_s, res.test_accuracy)


def run_bench(config_dir, report_path=None) -> list[RunSummary]:
    """Train each config (sorted by file name) and write the results table,
    by default to ``<config_dir>/results.md``."""
    config_dir = Path(config_dir)
    paths = sorted(config_dir.glob("*.cfg"))
    if not paths:
        raise FileNotFoundError(f"no *.cfg files in {config_dir}")
    workers = worker_count(len(paths))
    if workers == 1:
        summaries = [run_one(p) for p in paths]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(run_one, paths))
    emit_results_table(summaries, report_path or config_dir / "results.md")
    return summaries
