"""Residual blocks with identity shortcuts and a small network built from them."""
from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..nn import BatchNorm2d, Conv2d, Linear, Module


class ResidualBlock(Module):
    """``relu(bn(conv(relu(bn(conv(x))))) + x)`` with shape-preserving 3x3 convs."""

    def __init__(self, channels: int, rng: np.random.Generator, kernel: int = 3, dtype=np.float64):
        super().__init__()
        self.conv1 = Conv2d(kernel, channels, channels, rng, padding="same", bias=False, dtype=dtype)
        self.bn1 = BatchNorm2d(channels, dtype=dtype)
        self.conv2 = Conv2d(kernel, channels, channels, rng, padding="same", bias=False, dtype=dtype)
        self.bn2 = BatchNorm2d(channels, dtype=dtype)

    def weight_path(self, x: Tensor) -> Tensor:
        h = ad.relu(self.bn1(self.conv1(x)))
        return self.bn2(self.conv2(h))

    def forward(self, x: Tensor) -> Tensor:
        path = self.weight_path(x)
        if path.shape != x.shape:
            raise ValueError(f"residual sum needs equal shapes, got {path.shape} and {x.shape}")
        return ad.relu(path + x)


def residual_block_forward(block: ResidualBlock, x) -> Tensor:
    x = x if isinstance(x, Tensor) else Tensor(np.asarray(x))
    return block(x)


class TinyResNet(Module):
    """Stem conv -> residual blocks -> global average pool -> dense classifier."""

    def __init__(self, num_blocks: int = 4, classes: int = 10, width: int = 16,
                 input_shape=(32, 32), seed: int = 0, dtype=np.float64):
        super().__init__()
        rng = np.random.default_rng(seed)
        self.input_shape = tuple(input_shape)
        self.classes = classes
        self.dtype = np.dtype(dtype)
        self.stem = Conv2d(3, 1, width, rng, padding="same", bias=False, dtype=dtype)
        self.stem_bn = BatchNorm2d(width, dtype=dtype)
        self.blocks = []
        for i in range(num_blocks):
            block = ResidualBlock(width, rng, dtype=dtype)
            setattr(self, f"block{i + 1}", block)
            self.blocks.append(block)
        self.fc = Linear(width, classes, rng, dtype)

    def _as_batch(self, images) -> Tensor:
        x = np.asarray(images.data if isinstance(images, Tensor) else images, dtype=self.dtype)
        if x.ndim == 2:
            x = x[None]
        if x.ndim == 3:
            x = x[..., None]
        if x.shape[1:3] != self.input_shape:
            raise ValueError(f"expected {self.input_shape[0]}x{self.input_shape[1]} input, got {x.shape[1:]}")
        return Tensor(x)

    def forward(self, images) -> Tensor:
        x = ad.relu(self.stem_bn(self.stem(self._as_batch(images))))
        for block in self.blocks:
            x = block(x)
        return self.fc(ad.global_avg_pool(x))

    def loss_and_predictions(self, images, labels) -> tuple[Tensor, np.ndarray]:
        logits = self.forward(images)
        return ad.cross_entropy(logits, np.asarray(labels)), np.argmax(logits.data, axis=-1)

    def loss(self, images, labels) -> Tensor:
        return self.loss_and_predictions(images, labels)[0]

    def predict(self, images) -> np.ndarray:
        with ad.no_grad():
            logits = self.forward(images)
        return np.argmax(logits.data, axis=-1)


def tiny_resnet_build(num_blocks: int = 4, classes: int = 10, **kwargs) -> TinyResNet:
    return TinyResNet(num_blocks, classes, **kwargs)
