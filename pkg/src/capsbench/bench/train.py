"""The experiment loop: load data, fit, record per-epoch metrics, test once."""
from __future__ import annotations

import contextlib
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import autodiff as ad
from ..autodiff import NumericError
from ..baselines import fisher_fit
from ..data import (DatasetSplit, EqualizePolicy, Sample, build_pipeline, load_folder,
                    split_dataset, stack, synth_split)
from ..data.synth import SHAPES
from .adam import AdamState, adam_step
from .config import ExperimentConfig, dump_config
from .metrics import MetricsRecord, emit_metrics_csv, evaluate_accuracy
from .models import build_model, predictor, save_model

logger = logging.getLogger(__name__)


class TrainingAborted(NumericError):
    """Non-finite loss; ``records`` holds the metrics collected before it."""

    def __init__(self, message: str, records: list[MetricsRecord]):
        super().__init__(message)
        self.records = records


@dataclass
class TrainResult:
    model: object
    records: list[MetricsRecord]
    split: DatasetSplit
    n_classes: int
    input_shape: tuple[int, int]
    test_accuracy: float
    best_epoch: int
    training_time_s: float
    output_dir: Path | None = None
    extras: dict = field(default_factory=dict)


def equalize_policy(cfg: ExperimentConfig) -> EqualizePolicy:
    sec = cfg.section("equalize")
    return EqualizePolicy(mode=sec.get("mode", "auto"),
                          range_fraction=float(sec.get("range_fraction", 0.6)),
                          entropy_threshold=float(sec.get("entropy_threshold", 5.0)))


def load_samples(cfg: ExperimentConfig) -> list[Sample]:
    samples = load_folder(cfg.dataset)
    if cfg.preprocess != "none":
        pipe = build_pipeline(cfg.preprocess, equalize_policy(cfg))
        samples = [Sample(pipe(s.image), s.label, s.source_id) for s in samples]
    return samples


def load_split(cfg: ExperimentConfig) -> DatasetSplit:
    if cfg.dataset == "synth":
        sec = cfg.section("synth")
        classes = tuple(c.strip() for c in sec.get("classes", ",".join(SHAPES)).split(","))
        size, jitter = int(sec.get("size", 64)), float(sec.get("jitter", 0.1))
        if "n_per_class" in sec:
            from ..data import synth_shapes
            samples = synth_shapes(int(sec["n_per_class"]), classes, size, cfg.seed, jitter)
            return split_dataset(samples, cfg.seed, cfg.stratified)
        return synth_split(int(sec.get("n_train", 200)), int(sec.get("n_val", 50)),
                           int(sec.get("n_test", 50)), classes, size, cfg.seed, jitter)
    return split_dataset(load_samples(cfg), cfg.seed, cfg.stratified)


def _batches(n: int, batch_size: int, rng: np.random.Generator | None):
    order = np.arange(n) if rng is None else rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def _evaluate(model, images, labels, batch_size: int) -> tuple[float, float]:
    model.eval()
    total_loss, correct = 0.0, 0
    with ad.no_grad():
        for idx in _batches(len(labels), batch_size, None):
            loss, pred = model.loss_and_predictions(images[idx], labels[idx])
            total_loss += loss.item() * len(idx)
            correct += int(np.count_nonzero(pred == labels[idx]))
    return total_loss / len(labels), correct / len(labels)


@contextlib.contextmanager
def _thread_limit(n: int):
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        yield
        return
    with threadpool_limits(limits=n):
        yield


def _clock(cfg):
    if cfg.timing == "off":
        return lambda: 0.0
    return time.perf_counter


def train(cfg: ExperimentConfig, split: DatasetSplit | None = None, write: bool = True) -> TrainResult:
    """Run one experiment. With ``write`` the metrics CSV, the resolved config
    and the best-validation checkpoint go to ``cfg.output_dir``."""
    split = split or load_split(cfg)
    if not split.train or not split.validation or not split.test:
        raise ValueError(f"every split needs samples, got sizes {split.sizes()}")
    all_labels = [s.label for s in split.train + split.validation + split.test]
    n_classes = max(all_labels) + 1
    input_shape = tuple(split.train[0].image.shape[:2])
    out_dir = Path(cfg.output_dir) if write else None
    with _thread_limit(cfg.threads):
        if cfg.model == "fisherfaces":
            result = _train_fisherfaces(cfg, split, n_classes, input_shape)
        else:
            result = _train_network(cfg, split, n_classes, input_shape, out_dir)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        emit_metrics_csv(result.records, out_dir / "metrics.csv")
        (out_dir / "config.txt").write_text(dump_config(cfg), encoding="utf-8")
        save_model(out_dir / "best.caps", result.model, cfg, input_shape, n_classes)
        result.output_dir = out_dir
    return result


def _train_fisherfaces(cfg, split, n_classes, input_shape) -> TrainResult:
    clock = _clock(cfg)
    t0 = clock()
    x_train, y_train = stack(split.train)
    model = fisher_fit(x_train, y_train, cfg.get("fisherfaces.n_components", 40, int))
    fit_time = clock() - t0
    predict = predictor(model)
    records = [MetricsRecord(1, name, math.nan, evaluate_accuracy(predict, samples), fit_time)
               for name, samples in (("train", split.train), ("validation", split.validation),
                                     ("test", split.test))]
    return TrainResult(model, records, split, n_classes, input_shape, records[-1].accuracy, 1, fit_time)


def _train_network(cfg, split, n_classes, input_shape, out_dir) -> TrainResult:
    clock = _clock(cfg)
    model = build_model(cfg, input_shape, n_classes)
    params = model.parameters()
    state = AdamState(lr=cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed + 1)
    x_train, y_train = stack(split.train)
    x_val, y_val = stack(split.validation)
    x_train, x_val = x_train.astype(model.dtype), x_val.astype(model.dtype)

    records: list[MetricsRecord] = []
    best = (-1.0, math.inf)
    best_state, best_epoch = None, 0
    stale = 0
    t_start = clock()
    for epoch in range(1, cfg.epochs + 1):
        t0 = clock()
        model.train()
        total_loss, correct = 0.0, 0
        for idx in _batches(len(y_train), cfg.batch_size, rng):
            loss, pred = model.loss_and_predictions(x_train[idx], y_train[idx])
            value = loss.item()
            if not math.isfinite(value):
                emit = records + [MetricsRecord(epoch, "train", value, 0.0, clock() - t0)]
                if out_dir is not None:
                    emit_metrics_csv(emit, out_dir / "metrics.csv")
                raise TrainingAborted(f"non-finite loss {value} at epoch {epoch}", emit)
            ad.backward(loss, params)
            adam_step(params, [p.grad for p in params], state)
            total_loss += value * len(idx)
            correct += int(np.count_nonzero(pred == y_train[idx]))
        train_time = clock() - t0
        train_acc = correct / len(y_train)
        records.append(MetricsRecord(epoch, "train", total_loss / len(y_train), train_acc, train_time))
        val_loss, val_acc = _evaluate(model, x_val, y_val, cfg.batch_size)
        records.append(MetricsRecord(epoch, "validation", val_loss, val_acc, clock() - t0))
        logger.info("epoch %d: train loss %.4f acc %.3f | val loss %.4f acc %.3f",
                    epoch, records[-2].loss, train_acc, val_loss, val_acc)
        if (val_acc, -val_loss) > (best[0], -best[1]):
            best = (val_acc, val_loss)
            best_state = {k: v.copy() for k, v in model.state_arrays().items()}
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
        if cfg.patience and stale >= cfg.patience:
            logger.info("stopping after %d epochs without validation improvement", stale)
            break
    training_time = clock() - t_start

    model.load_state_arrays(best_state)
    model.eval()
    test_acc = evaluate_accuracy(model.predict, split.test)
    x_test, y_test = stack(split.test)
    test_loss, _ = _evaluate(model, x_test.astype(model.dtype), y_test, cfg.batch_size)
    records.append(MetricsRecord(records[-1].epoch, "test", test_loss, test_acc, training_time))
    return TrainResult(model, records, split, n_classes, input_shape, test_acc, best_epoch, training_time)
