"""Synthetic single-shape images for quick, license-free experiments."""
from __future__ import annotations

import numpy as np

from .dataset import Sample

SHAPES = ("rectangle", "ellipse", "triangle", "cross")
_SUPERSAMPLE = 3


def _inside(shape: str, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    # canonical shapes in [-1, 1]^2, v pointing down
    if shape == "rectangle":
        return (np.abs(u) <= 0.6) & (np.abs(v) <= 0.35)
    if shape == "ellipse":
        return (u / 0.55) ** 2 + (v / 0.4) ** 2 <= 1.0
    if shape == "triangle":
        # apex (0, -0.6), base corners (+-0.6, 0.5)
        return (v <= 0.5) & (v >= -0.6 + (1.1 / 0.6) * np.abs(u))
    if shape == "cross":
        return (((np.abs(u) <= 0.15) & (np.abs(v) <= 0.6))
                | ((np.abs(v) <= 0.15) & (np.abs(u) <= 0.6)))
    raise ValueError(f"unknown shape {shape!r}; expected one of {SHAPES}")


def render_shape(shape: str, size: int, shift=(0.0, 0.0), scale: float = 1.0,
                 angle: float = 0.0) -> np.ndarray:
    """Anti-aliased ``size x size`` image in [0, 1] of one shape."""
    n = size * _SUPERSAMPLE
    coords = (np.arange(n) + 0.5) / n * 2.0 - 1.0
    y, x = np.meshgrid(coords, coords, indexing="ij")
    x = x - shift[0]
    y = y - shift[1]
    c, s = np.cos(angle), np.sin(angle)
    u = (c * x + s * y) / scale
    v = (-s * x + c * y) / scale
    hit = _inside(shape, u, v).astype(np.float64)
    return hit.reshape(size, _SUPERSAMPLE, size, _SUPERSAMPLE).mean(axis=(1, 3))


def synth_shapes(n_per_class: int, classes=SHAPES, size: int = 64, seed: int = 0,
                 jitter: float = 0.0) -> list[Sample]:
    """``n_per_class`` images of each shape, class ``k`` labelled ``k``.

    ``jitter`` in [0, 1] scales the random shift (up to ``jitter`` in the
    [-1, 1] image frame), scale change (``1 +- jitter``) and rotation
    (``+- jitter * pi``). Samples come out interleaved by class.
    """
    classes = tuple(classes)
    for c in classes:
        if c not in SHAPES:
            raise ValueError(f"unknown shape {c!r}; expected a subset of {SHAPES}")
    if not 0.0 <= jitter <= 1.0:
        raise ValueError(f"jitter must be in [0, 1], got {jitter}")
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_per_class):
        for label, shape in enumerate(classes):
            dx, dy, ds, da = rng.uniform(-1.0, 1.0, size=4) * jitter
            img = render_shape(shape, size, (dx, dy), 1.0 + ds, da * np.pi)
            out.append(Sample(img, label, f"synth/{shape}/{i:05d}"))
    return out


def synth_split(n_train: int, n_val: int, n_test: int, classes=SHAPES, size: int = 64,
                seed: int = 0, jitter: float = 0.0):
    """Independently drawn train/validation/test sets with the given totals."""
    from .dataset import DatasetSplit

    parts = []
    for k, total in enumerate((n_train, n_val, n_test)):
        per_class = -(-total // len(classes))
        samples = synth_shapes(per_class, classes, size, seed * 1000 + k, jitter)[:total]
        parts.append(samples)
    total = n_train + n_val + n_test
    return DatasetSplit(*parts, seed=seed,
                        fractions=(n_train / total, n_val / total, n_test / total))
