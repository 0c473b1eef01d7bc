"""Pure per-image transforms. Images are float arrays, ``H x W`` (gray) or ``H x W x 3``."""
from __future__ import annotations

import numpy as np

LUMA = np.array([0.299, 0.587, 0.114])


def to_grayscale(rgb) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected H x W x 3 image, got {rgb.shape}")
    return rgb[..., 0] * LUMA[0] + rgb[..., 1] * LUMA[1] + rgb[..., 2] * LUMA[2]


def min_max_normalize(image) -> np.ndarray:
    """Rescale to [0, 1]; a constant image maps to zeros."""
    img = np.asarray(image, dtype=np.float64)
    lo, hi = img.min(), img.max()
    if hi == lo:
        return np.zeros_like(img)
    return (img - lo) / (hi - lo)


def _bins(image: np.ndarray, levels: int) -> np.ndarray:
    return np.clip(np.floor(image * levels).astype(np.int64), 0, levels - 1)


def histogram_entropy(image, levels: int = 256) -> float:
    """Shannon entropy (bits) of the ``levels``-bin intensity histogram."""
    counts = np.bincount(_bins(np.asarray(image, dtype=np.float64), levels).ravel(), minlength=levels)
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log2(p)).sum())


def histogram_equalize(image, levels: int = 256) -> np.ndarray:
    """CDF remap on ``levels`` bins so the darkest occupied bin maps to 0."""
    img = np.asarray(image, dtype=np.float64)
    b = _bins(img, levels)
    counts = np.bincount(b.ravel(), minlength=levels)
    cdf = np.cumsum(counts) / b.size
    cdf_min = cdf[counts > 0][0]
    if cdf_min >= 1.0:
        return np.clip(img, 0.0, 1.0)
    return np.clip((cdf[b] - cdf_min) / (1.0 - cdf_min), 0.0, 1.0)


def resize_bilinear(image, new_h: int, new_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel centres (align_corners=False), edges clamped."""
    if new_h <= 0 or new_w <= 0:
        raise ValueError(f"target size must be positive, got {new_h}x{new_w}")
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape[:2]

    def axis(n_in, n_out):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1)
        lo = np.floor(src).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    y0, y1, fy = axis(h, new_h)
    x0, x1, fx = axis(w, new_w)
    extra = (None,) * (img.ndim - 2)
    fy = fy[(slice(None), None) + extra]
    fx = fx[(None, slice(None)) + extra]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bottom = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy) + bottom * fy
