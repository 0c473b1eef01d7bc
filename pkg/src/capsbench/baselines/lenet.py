from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..nn import Conv2d, Linear, Module


class LeNet(Module):
    """Modified LeNet-5: three conv+avg-pool stages and three dense layers.

    The defaults reproduce the 90x90 traffic-sign network: 7x7 valid
    convolutions with 6/16/32 maps, 2x2 pooling, then 1152 -> 300 -> 200 -> 62.
    ReLU follows every layer except the final one, which emits logits.
    """

    def __init__(self, input_shape=(90, 90), classes: int = 62, kernel: int = 7,
                 channels=(6, 16, 32), hidden=(300, 200), pool: str = "avg",
                 activation: str = "relu", seed: int = 0, dtype=np.float64):
        super().__init__()
        self.input_shape = tuple(input_shape)
        self.classes = classes
        self.pool = pool
        self.activation = activation
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        h, w = self.input_shape
        cin = 1
        convs = []
        for i, cout in enumerate(channels):
            h, w = h - kernel + 1, w - kernel + 1
            if h < 2 or w < 2:
                raise ValueError(f"input {self.input_shape} too small for {len(channels)} conv/pool stages "
                                 f"with {kernel}x{kernel} kernels")
            h, w = (h - 2) // 2 + 1, (w - 2) // 2 + 1
            conv = Conv2d(kernel, cin, cout, rng, dtype=dtype)
            setattr(self, f"conv{i + 1}", conv)
            convs.append(conv)
            cin = cout
        self._convs = convs
        self.flat_size = h * w * cin
        sizes = [self.flat_size, *hidden, classes]
        self._fcs = []
        for i in range(len(sizes) - 1):
            fc = Linear(sizes[i], sizes[i + 1], rng, dtype)
            setattr(self, f"fc{i + 1}", fc)
            self._fcs.append(fc)

    def _pool(self, x: Tensor) -> Tensor:
        return ad.pool_avg(x, 2, 2) if self.pool == "avg" else ad.pool_max(x, 2, 2)

    def _as_batch(self, images) -> Tensor:
        x = np.asarray(images.data if isinstance(images, Tensor) else images, dtype=self.dtype)
        if x.ndim == 2:
            x = x[None]
        if x.ndim == 3:
            x = x[..., None]
        if x.shape[1:3] != self.input_shape or x.shape[3] != 1:
            raise ValueError(f"expected {self.input_shape[0]}x{self.input_shape[1]}x1 input, got {x.shape[1:]}")
        return Tensor(x)

    def forward(self, images, trace: list | None = None) -> Tensor:
        x = self._as_batch(images)
        for conv in self._convs:
            x = ad.activation(conv(x), self.activation)
            if trace is not None:
                trace.append(("conv", x.shape[1:]))
            x = self._pool(x)
            if trace is not None:
                trace.append(("pool", x.shape[1:]))
        x = ad.flatten(x)
        if trace is not None:
            trace.append(("flatten", x.shape[1:]))
        for i, fc in enumerate(self._fcs):
            x = fc(x)
            if i < len(self._fcs) - 1:
                x = ad.activation(x, self.activation)
            if trace is not None:
                trace.append(("fc", x.shape[1:]))
        return x

    def shape_chain(self, images=None) -> list[tuple[int, ...]]:
        """Per-layer output shapes (without the batch axis)."""
        if images is None:
            images = np.zeros((1, *self.input_shape), dtype=self.dtype)
        trace: list = []
        with ad.no_grad():
            self.forward(images, trace)
        return [shape for _, shape in trace]

    def loss_and_predictions(self, images, labels) -> tuple[Tensor, np.ndarray]:
        logits = self.forward(images)
        return ad.cross_entropy(logits, np.asarray(labels)), np.argmax(logits.data, axis=-1)

    def loss(self, images, labels) -> Tensor:
        return self.loss_and_predictions(images, labels)[0]

    def predict(self, images) -> np.ndarray:
        with ad.no_grad():
            logits = self.forward(images)
        return np.argmax(logits.data, axis=-1)


def lenet_build(input_shape=(90, 90), classes: int = 62, **kwargs) -> LeNet:
    return LeNet(input_shape, classes, **kwargs)


def lenet_forward(model: LeNet, image) -> Tensor:
    return model.forward(image)
