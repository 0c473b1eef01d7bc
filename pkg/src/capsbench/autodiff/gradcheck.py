"""Central finite-difference verification of analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tensor import Parameter, Tensor, backward, no_grad


@dataclass
class GradEntry:
    name: str
    index: tuple[int, ...]
    analytic: float
    numeric: float

    @property
    def rel_error(self) -> float:
        return relative_error(self.analytic, self.numeric)


@dataclass
class GradcheckReport:
    tolerance: float
    entries: list[GradEntry] = field(default_factory=list)

    @property
    def max_error(self) -> float:
        return max((e.rel_error for e in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        return all(e.rel_error < self.tolerance for e in self.entries)

    def worst(self, k: int = 5) -> list[GradEntry]:
        return sorted(self.entries, key=lambda e: -e.rel_error)[:k]

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}: {len(self.entries)} sampled entries, "
                f"max relative error {self.max_error:.3e} (tolerance {self.tolerance:.0e})")


def relative_error(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-12)


def _sample_indices(params: Sequence[Parameter], n: int, rng: np.random.Generator):
    # round-robin over tensors so small bias vectors get checked too; entries
    # within a tensor are distinct, and a tensor that runs out passes its turn on
    counts = [0] * len(params)
    k = 0
    while sum(counts) < min(n, sum(p.size for p in params)):
        i = k % len(params)
        if counts[i] < params[i].size:
            counts[i] += 1
        k += 1
    picks = []
    for p, c in zip(params, counts):
        for flat in rng.choice(p.size, size=c, replace=False):
            picks.append((p, np.unravel_index(int(flat), p.shape)))
    return picks


def finite_diff_check(params: Sequence[Parameter], loss_fn: Callable[[], Tensor],
                      tolerance: float = 1e-4, n_samples: int = 50, h: float = 1e-5,
                      seed: int = 0, names: Sequence[str] | None = None) -> GradcheckReport:
    """Compare backprop gradients of ``loss_fn()`` against central differences.

    ``loss_fn`` takes no arguments and must be a pure function of the current
    parameter values. Parameters must hold 64-bit data. ``names`` labels the
    report entries (defaults to each parameter's own name).
    """
    params = list(params)
    labels = {id(p): name for p, name in zip(params, names or [p.name for p in params])}
    for p in params:
        if p.dtype != np.float64:
            raise TypeError(f"gradient checks need float64 parameters; {p.name} is {p.dtype}")
    loss = loss_fn()
    backward(loss, params)
    analytic = {id(p): p.grad.copy() for p in params}

    rng = np.random.default_rng(seed)
    report = GradcheckReport(tolerance)
    with no_grad():
        for p, idx in _sample_indices(params, n_samples, rng):
            orig = p.data[idx]
            p.data[idx] = orig + h
            up = loss_fn().item()
            p.data[idx] = orig - h
            down = loss_fn().item()
            p.data[idx] = orig
            numeric = (up - down) / (2 * h)
            report.entries.append(GradEntry(labels[id(p)], tuple(int(i) for i in idx),
                                            float(analytic[id(p)][idx]), numeric))
    return report


def check_model(model, loss_fn: Callable[[], Tensor], tolerance: float = 1e-4,
                n_samples: int = 50, seed: int = 0) -> GradcheckReport:
    """Shorthand for models exposing ``parameters()``."""
    named = model.named_parameters()
    return finite_diff_check([p for _, p in named], loss_fn, tolerance, n_samples, seed=seed,
                             names=[n for n, _ in named])
