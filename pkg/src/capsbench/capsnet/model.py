from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import Parameter, Tensor
from ..nn import Conv2d, Linear, Module
from .config import CapsNetConfig
from .layers import (RoutingState, capsnet_loss, capsnet_predict, mask_by_target,
                     routing_forward, squash)


@dataclass
class PrimaryCapsGrid:
    """Squashed primary capsules, ``N x G1 x G2 x F x D1``."""

    vectors: Tensor

    @property
    def grid(self) -> tuple[int, int]:
        return self.vectors.shape[1], self.vectors.shape[2]

    def flat(self) -> Tensor:
        n, g1, g2, f, d = self.vectors.shape
        return ad.reshape(self.vectors, (n, g1 * g2 * f, d))


@dataclass
class CapsNetOutput:
    primary: PrimaryCapsGrid
    routing: RoutingState
    recon: Tensor

    @property
    def v(self) -> Tensor:
        return self.routing.v


class Decoder(Module):
    """Three fully connected layers from the masked capsules to pixel intensities."""

    def __init__(self, n_in: int, hidden: tuple[int, int], n_out: int, rng, dtype=np.float64):
        super().__init__()
        self.fc1 = Linear(n_in, hidden[0], rng, dtype)
        self.fc2 = Linear(hidden[0], hidden[1], rng, dtype)
        self.fc3 = Linear(hidden[1], n_out, rng, dtype)

    def forward(self, masked: Tensor) -> Tensor:
        h = ad.relu(self.fc1(masked))
        h = ad.relu(self.fc2(h))
        return ad.sigmoid(self.fc3(h))


class CapsNet(Module):
    """Conv stem -> primary capsules -> class capsules (routing) + decoder."""

    def __init__(self, cfg: CapsNetConfig, seed: int = 0, dtype=np.float64):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        self.stem = Conv2d(cfg.stem_kernel, 1, cfg.stem_maps, rng, dtype=dtype)
        self.primary = Conv2d(cfg.primary_kernel, cfg.stem_maps, cfg.F * cfg.D1, rng,
                              stride=cfg.primary_stride, dtype=dtype)
        self.W = Parameter(rng.normal(0.0, 0.01, (cfg.n_primary, cfg.C, cfg.D1, cfg.D2)).astype(dtype), "W")
        self.decoder = Decoder(cfg.C * cfg.D2, cfg.decoder_hidden, cfg.x1 * cfg.x2, rng, dtype)

    def _as_batch(self, images) -> Tensor:
        x = np.asarray(images.data if isinstance(images, Tensor) else images, dtype=self.dtype)
        if x.ndim == 2:
            x = x[None]
        if x.ndim == 3:
            x = x[..., None]
        if x.shape[1:] != (self.cfg.x1, self.cfg.x2, 1):
            raise ValueError(f"expected {self.cfg.x1}x{self.cfg.x2} images, got {x.shape[1:]}")
        return Tensor(x)

    def stem_forward(self, images) -> Tensor:
        return ad.relu(self.stem(self._as_batch(images)))

    def primary_capsules_forward(self, stem_output: Tensor) -> PrimaryCapsGrid:
        cfg = self.cfg
        h, w = cfg.stem_extent
        if stem_output.shape[1:] != (h, w, cfg.stem_maps):
            raise ValueError(f"stem output {stem_output.shape[1:]} does not match config ({h}, {w}, {cfg.stem_maps})")
        maps = self.primary(stem_output)
        n, g1, g2, _ = maps.shape
        caps = ad.reshape(maps, (n, g1, g2, cfg.F, cfg.D1))
        return PrimaryCapsGrid(squash(caps, axis=-1))

    def forward(self, images, targets=None) -> CapsNetOutput:
        """Run the network. ``targets`` (integer labels) select the capsule the
        decoder sees; without them the longest capsule is used."""
        cfg = self.cfg
        primary = self.primary_capsules_forward(self.stem_forward(images))
        routing = routing_forward(primary.flat(), self.W, cfg.routing_iterations,
                                  stop_gradient=cfg.route_stop_gradient)
        onehot = None if targets is None else one_hot(targets, cfg.C, self.dtype)
        recon = self.decoder(mask_by_target(routing.v, onehot))
        return CapsNetOutput(primary, routing, recon)

    def loss_and_predictions(self, images, labels) -> tuple[Tensor, np.ndarray]:
        """Training loss (decoder masked by the true labels) and the predicted classes."""
        out = self.forward(images, labels)
        x = self._as_batch(images).data.reshape(out.recon.shape)
        loss = capsnet_loss(out.v, one_hot(labels, self.cfg.C, self.dtype), out.recon, x,
                            self.cfg.m_plus, self.cfg.m_minus, self.cfg.lam, self.cfg.recon_weight)
        return loss, np.atleast_1d(capsnet_predict(out.v))

    def loss(self, images, labels) -> Tensor:
        return self.loss_and_predictions(images, labels)[0]

    def predict(self, images) -> np.ndarray:
        with ad.no_grad():
            out = self.forward(images)
        return np.atleast_1d(capsnet_predict(out.v))


def one_hot(labels, n_classes: int, dtype=np.float64) -> np.ndarray:
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    out = np.zeros((len(labels), n_classes), dtype=dtype)
    out[np.arange(len(labels)), labels] = 1.0
    return out


def capsnet_build(cfg: CapsNetConfig, seed: int = 0, dtype=np.float64) -> CapsNet:
    return CapsNet(cfg, seed=seed, dtype=dtype)
