"""Parameter containers shared by all neural models."""
from __future__ import annotations

from collections import OrderedDict

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor


def uniform_fan_in(rng: np.random.Generator, shape, fan_in: int, dtype=np.float64) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Module:
    """Registers parameters and sub-modules in attribute-assignment order."""

    def __init__(self):
        object.__setattr__(self, "_params", OrderedDict())
        object.__setattr__(self, "_children", OrderedDict())
        self.training = True

    def __setattr__(self, name, value):
        if isinstance(value, Parameter):
            self._params[name] = value
        elif isinstance(value, Module):
            self._children[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Parameter]]:
        out = [(prefix + k, p) for k, p in self._params.items()]
        for cname, child in self._children.items():
            out.extend(child.named_parameters(f"{prefix}{cname}."))
        return out

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Everything needed to restore the module: parameters and buffers."""
        state = {name: p.data for name, p in self.named_parameters()}
        state.update(self.named_buffers())
        return state

    def named_buffers(self, prefix: str = "") -> dict[str, np.ndarray]:
        out = {prefix + k: v for k, v in getattr(self, "_buffers", {}).items()}
        for cname, child in self._children.items():
            out.update(child.named_buffers(f"{prefix}{cname}."))
        return out

    def load_state_arrays(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        buffers = self._buffer_owners()
        for name, arr in state.items():
            if name in params:
                if params[name].shape != arr.shape:
                    raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {params[name].shape}")
                params[name].data[...] = arr
            elif name in buffers:
                owner, key = buffers[name]
                owner._buffers[key][...] = arr
            else:
                raise KeyError(f"unexpected entry {name!r} in state")

    def _buffer_owners(self, prefix: str = "") -> dict:
        out = {prefix + k: (self, k) for k in getattr(self, "_buffers", {})}
        for cname, child in self._children.items():
            out.update(child._buffer_owners(f"{prefix}{cname}."))
        return out

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for child in self._children.values():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Conv2d(Module):
    def __init__(self, kernel: int, cin: int, cout: int, rng: np.random.Generator,
                 stride: int = 1, padding: str = "valid", bias: bool = True, dtype=np.float64):
        super().__init__()
        self.stride, self.padding = stride, padding
        self.weight = Parameter(uniform_fan_in(rng, (kernel, kernel, cin, cout), kernel * kernel * cin, dtype),
                                "weight")
        if bias:
            self.bias = Parameter(np.zeros(cout, dtype=dtype), "bias")
        else:
            self.bias = None

    def forward(self, x: Tensor) -> Tensor:
        out = ad.conv2d(x, self.weight, self.stride, self.padding)
        return out if self.bias is None else out + self.bias


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, dtype=np.float64):
        super().__init__()
        self.weight = Parameter(uniform_fan_in(rng, (n_in, n_out), n_in, dtype), "weight")
        self.bias = Parameter(np.zeros(n_out, dtype=dtype), "bias")

    def forward(self, x: Tensor) -> Tensor:
        return ad.fully_connected(x, self.weight, self.bias)


class BatchNorm2d(Module):
    """Per-channel batch normalization for ``N x H x W x C`` tensors.

    Training mode normalizes with batch statistics (and differentiates through
    them); eval mode uses the running averages.
    """

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.9, dtype=np.float64):
        super().__init__()
        self.eps, self.momentum = eps, momentum
        self.gamma = Parameter(np.ones(channels, dtype=dtype), "gamma")
        self.beta = Parameter(np.zeros(channels, dtype=dtype), "beta")
        self._buffers = {"running_mean": np.zeros(channels, dtype=dtype),
                         "running_var": np.ones(channels, dtype=dtype)}

    @property
    def running_mean(self) -> np.ndarray:
        return self._buffers["running_mean"]

    @property
    def running_var(self) -> np.ndarray:
        return self._buffers["running_var"]

    def forward(self, x: Tensor) -> Tensor:
        if self.training:
            mu = ad.mean(x, axis=(0, 1, 2), keepdims=True)
            centered = x - mu
            var = ad.mean(centered * centered, axis=(0, 1, 2), keepdims=True)
            if ad.grad_enabled():
                m = self.momentum
                self.running_mean[...] = m * self.running_mean + (1 - m) * mu.data.ravel()
                self.running_var[...] = m * self.running_var + (1 - m) * var.data.ravel()
            xhat = centered / ad.sqrt(var + self.eps)
        else:
            scale = 1.0 / np.sqrt(self.running_var + self.eps)
            xhat = (x - self.running_mean.astype(x.dtype)) * scale.astype(x.dtype)
        return xhat * self.gamma + self.beta
