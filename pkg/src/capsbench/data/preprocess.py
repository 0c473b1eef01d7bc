"""Per-dataset preprocessing chains.

Each chain follows the same column order: colour space, min-max
normalisation, histogram equalisation, resize. Steps that do not apply to a
dataset are simply absent, so ``step_names()`` lists exactly what runs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .transforms import (histogram_entropy, histogram_equalize, min_max_normalize,
                         resize_bilinear, to_grayscale)


@dataclass
class EqualizePolicy:
    """Decides which images get histogram equalisation.

    ``auto`` equalises low-contrast images: those whose 1st-99th percentile
    span covers less than ``range_fraction`` of [0, 1], or whose 256-bin
    histogram entropy is below ``entropy_threshold`` bits.
    """

    mode: str = "auto"           # auto | always | never
    range_fraction: float = 0.6
    entropy_threshold: float = 5.0

    def __post_init__(self):
        if self.mode not in ("auto", "always", "never"):
            raise ValueError(f"unknown equalize mode {self.mode!r}")

    def wants(self, image: np.ndarray) -> bool:
        if self.mode != "auto":
            return self.mode == "always"
        lo, hi = np.percentile(image, [1, 99])
        return (hi - lo) < self.range_fraction or histogram_entropy(image) < self.entropy_threshold


@dataclass
class Step:
    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    when: Callable[[np.ndarray], bool] | None = None

    def __call__(self, image: np.ndarray) -> tuple[np.ndarray, bool]:
        if self.when is not None and not self.when(image):
            return image, False
        return self.fn(image), True


def _ensure_gray(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[..., 0]
    if img.ndim != 2:
        raise ValueError(f"expected a grayscale image, got shape {img.shape}")
    return img


@dataclass
class Pipeline:
    dataset: str
    steps: list[Step] = field(default_factory=list)
    output_size: tuple[int, int] | None = None

    def step_names(self) -> list[str]:
        return [s.name for s in self.steps]

    def __call__(self, image, trace: list[str] | None = None) -> np.ndarray:
        img = np.asarray(image, dtype=np.float64)
        for step in self.steps:
            img, applied = step(img)
            if trace is not None and applied:
                trace.append(step.name)
        if self.output_size is not None and img.shape[:2] != self.output_size:
            raise ValueError(f"{self.dataset}: expected {self.output_size} output, got {img.shape[:2]}")
        return img


# resize targets are (height, width)
TABLE = {
    "yale": {"color": "gray", "equalize": True, "resize": (96, 84)},
    "mit": {"color": "gray", "equalize": True, "resize": (72, 55)},
    "belgiumts": {"color": "rgb", "equalize": False, "resize": (90, 90)},
    "cifar100": {"color": "rgb", "equalize": False, "resize": None, "size": (32, 32)},
}


def build_pipeline(dataset: str, policy: EqualizePolicy | None = None) -> Pipeline:
    try:
        row = TABLE[dataset]
    except KeyError:
        raise ValueError(f"unknown dataset {dataset!r}; expected one of {sorted(TABLE)}") from None
    policy = policy or EqualizePolicy()
    steps = [Step("grayscale_check", _ensure_gray) if row["color"] == "gray"
             else Step("rgb_to_grayscale", to_grayscale)]
    steps.append(Step("min_max_normalize", min_max_normalize))
    if row["equalize"]:
        steps.append(Step("histogram_equalize", histogram_equalize, when=policy.wants))
    if row["resize"] is not None:
        h, w = row["resize"]
        steps.append(Step(f"resize_{h}x{w}", lambda img, h=h, w=w: resize_bilinear(img, h, w)))
    return Pipeline(dataset, steps, row["resize"] or row.get("size"))


def preprocess(dataset: str, image, policy: EqualizePolicy | None = None) -> np.ndarray:
    return build_pipeline(dataset, policy)(image)
