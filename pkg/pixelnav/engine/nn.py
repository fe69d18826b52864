"""Parameterised layers built on the tensor ops"""

from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..core.exceptions import ShapeMismatch
from . import tensor as T
from .tensor import Tensor


class Module:
    """Base class for anything holding parameters

    Parameters are the requires_grad tensors reachable through attributes,
    sub-modules and lists of sub-modules, in attribute order.
    """

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def named_tensors(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        """Every tensor attribute, trainable or frozen"""
        for name, value in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(value, Tensor):
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_tensors(f"{full}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_tensors(f"{full}.{i}.")

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, value in self.named_tensors(prefix):
            if value.requires_grad:
                yield name, value

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def freeze(self) -> "Module":
        for _, value in self.named_tensors():
            value.requires_grad = False
            value.grad = None
        return self

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_tensors()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        own = dict(self.named_tensors())
        missing = sorted(set(own) - set(state))
        if missing:
            raise ShapeMismatch(f"State is missing parameters: {', '.join(missing[:5])}")
        for name, p in own.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ShapeMismatch(f"{name}: expected shape {p.shape}, got {value.shape}")
            p.data = value.astype(p.data.dtype, copy=True)

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


def _param(values: np.ndarray) -> Tensor:
    return Tensor(values.astype(T.get_default_dtype()), requires_grad=True)


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        bound = 1.0 / np.sqrt(in_features)
        self.weight = _param(rng.uniform(-bound, bound, size=(in_features, out_features)))
        self.bias = _param(rng.uniform(-bound, bound, size=(out_features,)))

    def forward(self, x: Tensor) -> Tensor:
        return T.matmul(x, self.weight) + self.bias


class Conv2d(Module):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 rng: np.random.Generator, stride: int = 1, padding: int = 0):
        fan_in = in_channels * kernel_size * kernel_size
        bound = 1.0 / np.sqrt(fan_in)
        self.weight = _param(rng.uniform(-bound, bound, size=(out_channels, in_channels, kernel_size, kernel_size)))
        self.bias = _param(rng.uniform(-bound, bound, size=(out_channels,)))
        self.stride = stride
        self.padding = padding

    def forward(self, x: Tensor) -> Tensor:
        return T.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.gamma = _param(np.ones(dim))
        self.beta = _param(np.zeros(dim))
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.gamma, self.beta, self.eps)


class MLP(Module):
    """Linear layers with ReLU between them (none after the last)"""

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator):
        if len(sizes) < 2:
            raise ShapeMismatch("MLP needs at least an input and an output size")
        self.layers = [Linear(a, b, rng) for a, b in zip(sizes, sizes[1:])]

    def forward(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = T.relu(x)
        return x


class MultiHeadSelfAttention(Module):
    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        if dim % heads != 0:
            raise ShapeMismatch(f"Model dim {dim} is not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.query = Linear(dim, dim, rng)
        self.key = Linear(dim, dim, rng)
        self.value = Linear(dim, dim, rng)
        self.out = Linear(dim, dim, rng)

    def _split(self, x: Tensor) -> Tensor:
        batch, length, _ = x.shape
        return x.reshape(batch, length, self.heads, self.dim // self.heads).transpose(0, 2, 1, 3)

    def forward(self, x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
        """
        Args:
            x: (B, L, D)
            mask: (B, L) boolean, True for valid positions
        """
        batch, length, _ = x.shape
        key_mask = None if mask is None else np.asarray(mask, dtype=bool)[:, None, None, :]
        attended = T.scaled_dot_product_attention(
            self._split(self.query(x)), self._split(self.key(x)), self._split(self.value(x)), key_mask
        )
        merged = attended.transpose(0, 2, 1, 3).reshape(batch, length, self.dim)
        return self.out(merged)


class TransformerEncoderLayer(Module):
    """Pre-norm self-attention block followed by a ReLU feed-forward block"""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator, ff_mult: int = 2):
        self.norm1 = LayerNorm(dim)
        self.attention = MultiHeadSelfAttention(dim, heads, rng)
        self.norm2 = LayerNorm(dim)
        self.feed_forward = MLP([dim, ff_mult * dim, dim], rng)

    def forward(self, x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
        x = x + self.attention(self.norm1(x), mask)
        return x + self.feed_forward(self.norm2(x))
