"""Capsule nonlinearity, routing-by-agreement and the capsule losses.

All functions accept an optional leading batch axis. Losses reduce to a
scalar: the per-sample value for a single sample, the batch mean otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor


def _t(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def squash(s, axis: int = -1) -> Tensor:
    """Shrink vectors to length ``|s|^2 / (1 + |s|^2)`` keeping their direction.

    Evaluated as ``s * |s| / (1 + |s|^2)``, which is exact at ``s = 0`` and
    needs no division by the norm.
    """
    s = _t(s)
    length = ad.norm(s, axis=axis, keepdims=True)
    return s * length / (length * length + 1.0)


def capsule_predictions(u: Tensor, W: Tensor) -> Tensor:
    """Prediction vectors ``u_hat[n,i,j] = u[n,i] @ W[i,j]``, shape ``N x N_in x C x D2``.

    One batched GEMM per input capsule; a generic einsum is ~30x slower here.
    """
    n, n_in, d1 = u.shape
    _, n_cls, _, d2 = W.shape
    w_mat = W.data.transpose(0, 2, 1, 3).reshape(n_in, d1, n_cls * d2)
    u_t = u.data.transpose(1, 0, 2)
    out = np.matmul(u_t, w_mat).reshape(n_in, n, n_cls, d2).transpose(1, 0, 2, 3)

    def bw(g):
        g_t = g.transpose(1, 0, 2, 3).reshape(n_in, n, n_cls * d2)
        gW = np.matmul(u.data.transpose(1, 2, 0), g_t)
        gW = gW.reshape(n_in, d1, n_cls, d2).transpose(0, 2, 1, 3)
        gu = None
        if u.requires_grad:
            gu = np.matmul(g_t, w_mat.transpose(0, 2, 1)).transpose(1, 0, 2)
        return gu, gW

    return Tensor._from_op(np.ascontiguousarray(out), (u, W), bw, "capsule_predictions")


@dataclass
class RoutingState:
    """Final state of one routing pass.

    ``b``/``c`` are ``[N,] N_in x C`` logits and couplings, ``s``/``v`` are
    ``[N,] C x D2`` capsule inputs and outputs. ``coupling_history`` holds the
    couplings of every iteration.
    """

    b: Tensor
    c: Tensor
    s: Tensor
    v: Tensor
    u_hat: Tensor
    coupling_history: list[np.ndarray] = field(default_factory=list)


def routing_forward(u, W, iterations: int = 3, stop_gradient: bool = False) -> RoutingState:
    """Route primary capsules ``u`` (``[N,] N_in x D1``) to class capsules.

    ``W`` is ``N_in x C x D1 x D2``. With ``stop_gradient`` the agreement
    updates of the logits are computed from detached predictions, so no
    gradient flows through the couplings.
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    u, W = _t(u), _t(W)
    single = u.ndim == 2
    if single:
        u = ad.reshape(u, (1,) + u.shape)
    n, n_in, d1 = u.shape
    if W.ndim != 4 or W.shape[0] != n_in or W.shape[2] != d1:
        raise ValueError(f"routing weights {W.shape} do not fit capsules {u.shape[1:]}")
    n_cls = W.shape[1]

    u_hat = capsule_predictions(u, W)
    b = Tensor(np.zeros((n, n_in, n_cls), dtype=u_hat.dtype))
    history = []
    for it in range(iterations):
        c = ad.softmax(b, axis=2)
        history.append(c.data)
        s = ad.einsum("nic,nice->nce", c, u_hat)
        v = squash(s, axis=-1)
        if it == iterations - 1:
            break
        if stop_gradient:
            agreement = np.einsum("nice,nce->nic", u_hat.data, v.data)
        else:
            agreement = ad.einsum("nice,nce->nic", u_hat, v)
        b = b + agreement

    if single:
        b, c, s, v, u_hat = (ad.reshape(t, t.shape[1:]) for t in (b, c, s, v, u_hat))
        history = [h[0] for h in history]
    return RoutingState(b=b, c=c, s=s, v=v, u_hat=u_hat, coupling_history=history)


def _reduce_batch(per_sample: Tensor) -> Tensor:
    return per_sample if per_sample.ndim == 0 else ad.mean(per_sample)


def margin_loss(v, T, m_plus: float = 0.9, m_minus: float = 0.1, lam: float = 0.5) -> Tensor:
    """Hinge-squared loss on capsule lengths, summed over classes."""
    v = _t(v)
    T = np.asarray(T, dtype=v.dtype)
    lengths = ad.norm(v, axis=-1)
    present = ad.relu(m_plus - lengths)
    absent = ad.relu(lengths - m_minus)
    per_class = present * present * T + absent * absent * (lam * (1.0 - T))
    return _reduce_batch(ad.reduce_sum(per_class, axis=-1))


def capsule_lengths(v) -> np.ndarray:
    v = v.data if isinstance(v, Tensor) else np.asarray(v)
    return np.sqrt(np.sum(v * v, axis=-1))


def mask_by_target(v, T=None) -> Tensor:
    """Zero every capsule except the target one and flatten to ``[N,] C*D2``.

    With ``T`` omitted the longest capsule is kept (inference).
    """
    v = _t(v)
    if T is None:
        keep = np.argmax(capsule_lengths(v), axis=-1)
    else:
        keep = np.argmax(np.asarray(T), axis=-1)
    n_cls = v.shape[-2]
    mask = (np.arange(n_cls) == np.expand_dims(keep, -1)).astype(v.dtype)
    masked = v * mask[..., None]
    return ad.reshape(masked, v.shape[:-2] + (n_cls * v.shape[-1],))


def reconstruction_loss(recon, original, batched: bool = False) -> Tensor:
    """Sum of squared pixel differences (batch mean when ``batched``)."""
    recon = _t(recon)
    original = original.data if isinstance(original, Tensor) else original
    original = np.asarray(original, dtype=recon.dtype).reshape(recon.shape)
    diff = recon - original
    total = ad.reduce_sum(diff * diff)
    return total * (1.0 / recon.shape[0]) if batched else total


def capsnet_loss(v, T, recon, original, m_plus: float = 0.9, m_minus: float = 0.1,
                 lam: float = 0.5, recon_weight: float = 0.0005) -> Tensor:
    """Margin loss plus weighted reconstruction loss."""
    loss = margin_loss(v, T, m_plus, m_minus, lam)
    if recon_weight == 0:
        return loss
    batched = _t(v).ndim == 3
    return loss + reconstruction_loss(recon, original, batched) * recon_weight


def capsnet_predict(v) -> np.ndarray | int:
    """Index of the longest capsule (lowest index on ties)."""
    idx = np.argmax(capsule_lengths(v), axis=-1)
    return int(idx) if np.ndim(idx) == 0 else idx
