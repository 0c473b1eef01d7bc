"""Gradient-check and K-fold drivers built on top of the experiment config."""
from __future__ import annotations

import contextlib
from dataclasses import dataclass

import numpy as np

from ..autodiff import GradcheckReport, check_model, corrupted_backward
from ..baselines import LeNet, TinyResNet, fisher_fit
from ..capsnet import CapsNet, CapsNetConfig
from ..data import stack
from .config import ExperimentConfig, parse_bool
from .metrics import evaluate_accuracy
from .models import predictor

# reduced sizes used for finite-difference checks
GRADCHECK_CAPSNET = dict(x1=12, x2=12, C=3, F=2, D1=4, D2=4, stem_maps=4, stem_kernel=3,
                         primary_kernel=3, primary_stride=2, routing_iterations=2,
                         decoder_hidden=(16, 16))


@dataclass
class GradcheckOutcome:
    applicable: bool
    report: GradcheckReport | None = None

    @property
    def passed(self) -> bool:
        return not self.applicable or self.report.passed

    def summary(self) -> str:
        return "not applicable (no gradient-trained parameters)" if not self.applicable else self.report.summary()


def gradcheck_model(kind: str, seed: int = 0, capsnet_overrides: dict | None = None, batch: int = 2):
    """``(model, loss_fn)`` at gradient-check size, 64-bit."""
    rng = np.random.default_rng(seed + 100)
    if kind == "capsnet":
        cfg = CapsNetConfig(**{**GRADCHECK_CAPSNET, **(capsnet_overrides or {})})
        model = CapsNet(cfg, seed=seed)
        # larger routing weights so the capsule lengths (and the margin hinges) are non-trivial
        model.W.data[...] = rng.normal(0.0, 0.5, model.W.shape)
        x = rng.uniform(0, 1, (batch, cfg.x1, cfg.x2))
        y = np.arange(batch) % cfg.C
    elif kind == "lenet":
        model = LeNet((32, 32), 5, kernel=3, channels=(3, 4, 5), hidden=(12, 8), seed=seed)
        x = rng.uniform(0, 1, (batch, 32, 32))
        y = np.arange(batch) % 5
    elif kind == "tiny_resnet":
        model = TinyResNet(2, 4, width=4, input_shape=(16, 16), seed=seed)
        batch = max(batch, 3)
        x = rng.uniform(0, 1, (batch, 16, 16))
        y = np.arange(batch) % 4
    else:
        raise ValueError(f"no gradient check for model {kind!r}")
    model.train()
    return model, (lambda: model.loss(x, y))


def gradcheck_cli(cfg: ExperimentConfig) -> GradcheckOutcome:
    if cfg.model == "fisherfaces":
        return GradcheckOutcome(False)
    corrupt = cfg.get("gradcheck.corrupt", False, parse_bool)
    tol = cfg.get("gradcheck.tolerance", 1e-4, float)
    n = cfg.get("gradcheck.samples", 50, int)
    model, loss_fn = gradcheck_model(cfg.model, cfg.seed)
    ctx = corrupted_backward() if corrupt else contextlib.nullcontext()
    with ctx:
        report = check_model(model, loss_fn, tol, n, seed=cfg.seed)
    return GradcheckOutcome(True, report)


@dataclass
class KFoldResult:
    accuracies: list[float]

    @property
    def mean(self) -> float:
        return sum(self.accuracies) / len(self.accuracies)


def kfold_evaluate(cfg: ExperimentConfig, samples, K: int | None = None,
                   repeats: int | None = None) -> KFoldResult:
    """Validation accuracy of every fold of ``repeats`` x ``K``-fold splits."""
    from ..data import DatasetSplit, kfold_split
    from .train import train

    K = K or cfg.get("kfold.K", 5, int)
    repeats = repeats or cfg.get("kfold.repeats", 1, int)
    accs = []
    for train_s, val_s in kfold_split(samples, K, repeats, cfg.seed):
        if cfg.model == "fisherfaces":
            x, y = stack(train_s)
            model = fisher_fit(x, y, cfg.get("fisherfaces.n_components", 40, int))
            accs.append(evaluate_accuracy(predictor(model), val_s))
        else:
            # validation doubles as the held-out set inside each fold
            res = train(cfg, DatasetSplit(train_s, val_s, val_s, cfg.seed), write=False)
            accs.append(res.records[-1].accuracy)
    return KFoldResult(accs)
