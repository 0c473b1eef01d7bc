"""Fisherfaces: PCA to N - C dimensions, then LDA, then nearest neighbour."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)

WITHIN_SCATTER_RIDGE = 1e-6


class FisherfacesError(ValueError):
    pass


@dataclass
class FisherfaceModel:
    mean_face: np.ndarray        # (P,)
    W_pca: np.ndarray            # (P, k), orthonormal columns
    W_lda: np.ndarray            # (k, m)
    references: np.ndarray       # (N, m) projected training images
    labels: np.ndarray           # (N,)
    eigenvalues: np.ndarray      # (m,) generalized eigenvalues, descending
    n_classes: int

    @property
    def W(self) -> np.ndarray:
        """Full projection, pixels x n_components."""
        return self.W_pca @ self.W_lda

    @property
    def n_components(self) -> int:
        return self.W_lda.shape[1]

    def project(self, images) -> np.ndarray:
        x = np.atleast_2d(np.asarray(images, dtype=np.float64).reshape(-1, self.mean_face.size))
        return ((x - self.mean_face) @ self.W_pca) @ self.W_lda

    def to_arrays(self) -> dict[str, np.ndarray]:
        return {"mean_face": self.mean_face, "W_pca": self.W_pca, "W_lda": self.W_lda,
                "references": self.references, "labels": self.labels.astype(np.float64),
                "eigenvalues": self.eigenvalues}

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray], n_classes: int) -> "FisherfaceModel":
        return cls(arrays["mean_face"], arrays["W_pca"], arrays["W_lda"], arrays["references"],
                   arrays["labels"].astype(np.int64), arrays["eigenvalues"], n_classes)


def _scatter(Y: np.ndarray, labels: np.ndarray, classes: np.ndarray):
    k = Y.shape[1]
    overall = Y.mean(axis=0)
    Sb = np.zeros((k, k))
    Sw = np.zeros((k, k))
    for c in classes:
        Yc = Y[labels == c]
        mu = Yc.mean(axis=0)
        d = (mu - overall)[:, None]
        Sb += len(Yc) * (d @ d.T)
        centered = Yc - mu
        Sw += centered.T @ centered
    return Sb, Sw


def fisher_fit(images, labels, n_components: int = 40) -> FisherfaceModel:
    """Fit Fisherfaces on ``images`` (N x P, or N x H x W) with integer labels."""
    X = np.asarray(images, dtype=np.float64)
    X = X.reshape(len(X), -1)
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != len(X):
        raise FisherfacesError(f"{len(X)} images but {len(labels)} labels")
    classes, counts = np.unique(labels, return_counts=True)
    n, n_cls = len(X), len(classes)
    if n_cls < 2:
        raise FisherfacesError("need at least two classes")
    if n <= n_cls:
        raise FisherfacesError(f"need more samples ({n}) than classes ({n_cls})")
    if counts.min() < 2:
        raise FisherfacesError(f"class {classes[counts.argmin()]} has fewer than 2 samples")
    if not np.all(np.isfinite(X)):
        raise FisherfacesError("images contain non-finite values")
    if n_components > n_cls - 1:
        warnings.warn(f"n_components={n_components} exceeds C-1={n_cls - 1}; clamping", stacklevel=2)
        n_components = n_cls - 1
    if n_components < 1:
        raise FisherfacesError("n_components must be >= 1")

    mean_face = X.mean(axis=0)
    Xc = X - mean_face
    _, sv, Vt = np.linalg.svd(Xc, full_matrices=False)
    tol = max(Xc.shape) * np.finfo(np.float64).eps * (sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > tol))
    k = min(n - n_cls, rank)
    if k < 1:
        raise FisherfacesError("training images have no variance")
    W_pca = Vt[:k].T

    Y = Xc @ W_pca
    Sb, Sw = _scatter(Y, labels, classes)
    w_eig = np.linalg.eigvalsh(Sw)
    if w_eig[0] <= 1e-10 * max(w_eig[-1], 1e-300):
        logger.info("within-class scatter near-singular (eigenvalues %.3g..%.3g); adding %.0e*I",
                    w_eig[0], w_eig[-1], WITHIN_SCATTER_RIDGE)
        Sw = Sw + WITHIN_SCATTER_RIDGE * np.eye(k)
    try:
        evals, evecs = scipy.linalg.eigh(Sb, Sw)
    except np.linalg.LinAlgError as exc:
        raise FisherfacesError(
            f"within-class scatter is singular after PCA (eigenvalues {w_eig[0]:.3g}..{w_eig[-1]:.3g})"
        ) from exc
    order = np.argsort(evals)[::-1][:min(n_components, k)]
    W_lda = evecs[:, order]
    W_lda = W_lda / np.linalg.norm(W_lda, axis=0)
    model = FisherfaceModel(mean_face, W_pca, W_lda, np.empty((0, 0)), labels,
                            evals[order], n_cls)
    model.references = Y @ W_lda
    return model


def fisher_predict(model: FisherfaceModel, images) -> np.ndarray:
    """Label of the nearest projected training image (lowest label on ties)."""
    q = model.project(images)
    out = np.empty(len(q), dtype=np.int64)
    for start in range(0, len(q), 64):
        block = q[start:start + 64]
        d = np.sum((block[:, None, :] - model.references[None, :, :]) ** 2, axis=-1)
        dmin = d.min(axis=1, keepdims=True)
        cand = np.where(d == dmin, model.labels[None, :], np.iinfo(np.int64).max)
        out[start:start + 64] = cand.min(axis=1)
    return out
