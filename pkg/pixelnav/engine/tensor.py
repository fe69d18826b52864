"""Reverse-mode automatic differentiation over numpy arrays"""

import contextlib
import threading
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..core.exceptions import NonFiniteValue, ShapeMismatch


ArrayLike = Union["Tensor", np.ndarray, float, int]

MASK_FILL = -1e30

_grad_state = threading.local()
_debug_checks = False
_default_dtype = np.float64


def set_debug_checks(enabled: bool) -> None:
    """Raise NonFiniteValue whenever an op produces NaN or Inf"""
    global _debug_checks
    _debug_checks = bool(enabled)


def get_default_dtype():
    return _default_dtype


def is_grad_enabled() -> bool:
    return getattr(_grad_state, "enabled", True)


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Build no graph inside the block (per thread)"""
    previous = is_grad_enabled()
    _grad_state.enabled = False
    try:
        yield
    finally:
        _grad_state.enabled = previous


class Tensor:
    """An ndarray with an optional gradient slot and a link to the op that produced it"""

    __slots__ = ('data', 'grad', 'requires_grad', '_parents', '_backward', 'name')

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        _parents: Tuple["Tensor", ...] = (),
        _backward: Optional[Callable[[np.ndarray], None]] = None,
        name: Optional[str] = None,
    ):
        array = np.asarray(data)
        if array.dtype.kind != 'f':
            array = array.astype(_default_dtype)
        self.data: np.ndarray = array
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.name = name

    # Basic properties
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """Same values, no gradient path back to this tensor"""
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, grad: np.ndarray) -> None:
        if grad.shape != self.data.shape:
            raise ShapeMismatch(f"Gradient shape {grad.shape} does not match value shape {self.data.shape}")
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype, copy=True)
        else:
            self.grad += grad

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Accumulate d(self)/d(leaf) into every leaf that requires grad"""
        if grad is None:
            if self.data.size != 1:
                raise ShapeMismatch("backward() without a gradient needs a scalar tensor")
            grad = np.ones_like(self.data)

        order = _topological_order(self)
        for node in order:
            if node._parents:
                node.grad = None
        self._accumulate(np.asarray(grad, dtype=self.data.dtype))

        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # Operators
    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        return div(self, other)

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return div(other, self)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, key) -> "Tensor":
        return getitem(self, key)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return mean(self, axis, keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def __repr__(self) -> str:
        grad = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{grad})"


def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def as_tensor(value: ArrayLike) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=_default_dtype))


def _make(data: np.ndarray, parents: Sequence[Tensor], backward: Callable[[np.ndarray], None]) -> Tensor:
    if _debug_checks and not np.all(np.isfinite(data)):
        raise NonFiniteValue("Non-finite value produced in forward pass")
    tracked = tuple(p for p in parents if p.requires_grad)
    if tracked and is_grad_enabled():
        return Tensor(data, requires_grad=True, _parents=tracked, _backward=backward)
    return Tensor(data)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to an operand's shape"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(a: np.ndarray, b: np.ndarray, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatch(f"{op}: shapes {a.shape} and {b.shape} do not broadcast")


# Elementwise arithmetic

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.data, b.data, "add")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), backward)


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.data, b.data, "sub")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    return _make(a.data - b.data, (a, b), backward)


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.data, b.data, "mul")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), backward)


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.data, b.data, "div")
    out = a.data / b.data

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * out / b.data, b.shape))

    return _make(out, (a, b), backward)


def neg(a: ArrayLike) -> Tensor:
    a = as_tensor(a)

    def backward(g: np.ndarray) -> None:
        a._accumulate(-g)

    return _make(-a.data, (a,), backward)


def minimum(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Elementwise minimum; ties route the gradient to the first operand"""
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.data, b.data, "minimum")
    take_a = a.data <= b.data

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(np.where(take_a, g, 0.0), a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(np.where(take_a, 0.0, g), b.shape))

    return _make(np.minimum(a.data, b.data), (a, b), backward)


def exp(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)

    def backward(g: np.ndarray) -> None:
        a._accumulate(g * out)

    return _make(out, (a,), backward)


def log(a: ArrayLike) -> Tensor:
    a = as_tensor(a)

    def backward(g: np.ndarray) -> None:
        a._accumulate(g / a.data)

    return _make(np.log(a.data), (a,), backward)


def relu(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    positive = a.data > 0

    def backward(g: np.ndarray) -> None:
        a._accumulate(g * positive)

    return _make(np.where(positive, a.data, 0.0), (a,), backward)


def tanh(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)

    def backward(g: np.ndarray) -> None:
        a._accumulate(g * (1.0 - out * out))

    return _make(out, (a,), backward)


def sigmoid(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    x = a.data
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))

    def backward(g: np.ndarray) -> None:
        a._accumulate(g * out * (1.0 - out))

    return _make(out, (a,), backward)


def sin(a: ArrayLike) -> Tensor:
    a = as_tensor(a)

    def backward(g: np.ndarray) -> None:
        a._accumulate(g * np.cos(a.data))

    return _make(np.sin(a.data), (a,), backward)


def cos(a: ArrayLike) -> Tensor:
    a = as_tensor(a)

    def backward(g: np.ndarray) -> None:
        a._accumulate(-g * np.sin(a.data))

    return _make(np.cos(a.data), (a,), backward)


# Reductions and shape ops

def _normalize_axes(axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum_(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)

    def backward(g: np.ndarray) -> None:
        if not keepdims:
            g = np.expand_dims(g, axes)
        a._accumulate(np.broadcast_to(g, a.shape).copy())

    return _make(np.sum(a.data, axis=axes, keepdims=keepdims), (a,), backward)


def mean(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes])) if axes else 1
    return sum_(a, axis=axes, keepdims=keepdims) * (1.0 / count)


def reshape(a: ArrayLike, shape: Tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeMismatch(f"Cannot reshape {a.shape} to {shape}")

    def backward(g: np.ndarray) -> None:
        a._accumulate(g.reshape(a.shape))

    return _make(out, (a,), backward)


def transpose(a: ArrayLike, axes: Optional[Tuple[int, ...]] = None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))

    def backward(g: np.ndarray) -> None:
        a._accumulate(np.transpose(g, inverse))

    return _make(np.transpose(a.data, axes), (a,), backward)


def swap_last(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    axes = list(range(a.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(a, tuple(axes))


def getitem(a: ArrayLike, key) -> Tensor:
    a = as_tensor(a)

    def backward(g: np.ndarray) -> None:
        full = np.zeros_like(a.data)
        np.add.at(full, key, g)
        a._accumulate(full)

    return _make(a.data[key], (a,), backward)


def concat(tensors: Sequence[ArrayLike], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeMismatch(f"concat: {e}")
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g: np.ndarray) -> None:
        for tensor, piece in zip(tensors, np.split(g, splits, axis=axis)):
            if tensor.requires_grad:
                tensor._accumulate(piece)

    return _make(out, tensors, backward)


def gather(a: ArrayLike, index: np.ndarray) -> Tensor:
    """Pick a[..., index[...]] along the last axis"""
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.int64)
    if index.shape != a.shape[:-1]:
        raise ShapeMismatch(f"gather: index shape {index.shape} does not match {a.shape[:-1]}")
    picked = np.take_along_axis(a.data, index[..., None], axis=-1)[..., 0]

    def backward(g: np.ndarray) -> None:
        full = np.zeros_like(a.data)
        np.put_along_axis(full, index[..., None], g[..., None], axis=-1)
        a._accumulate(full)

    return _make(picked, (a,), backward)


# Linear algebra

def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

    return _make(a.data @ b.data, (a, b), backward)


def norm(a: ArrayLike, axis: int = -1) -> Tensor:
    """Euclidean norm along an axis; the gradient at the zero vector is taken as zero"""
    a = as_tensor(a)
    out = np.sqrt(np.sum(a.data * a.data, axis=axis))

    def backward(g: np.ndarray) -> None:
        safe = np.where(out > 0, out, 1.0)
        scale = np.where(out > 0, g / safe, 0.0)
        a._accumulate(np.expand_dims(scale, axis) * a.data)

    return _make(out, (a,), backward)


# Normalisation and probability ops

def softmax(a: ArrayLike, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)

    def backward(g: np.ndarray) -> None:
        a._accumulate(out * (g - np.sum(g * out, axis=axis, keepdims=True)))

    return _make(out, (a,), backward)


def logsumexp(a: ArrayLike, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    peak = np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(a.data - peak)
    total = np.sum(e, axis=axis, keepdims=True)
    out = np.squeeze(peak + np.log(total), axis=axis)
    probs = e / total

    def backward(g: np.ndarray) -> None:
        a._accumulate(np.expand_dims(g, axis) * probs)

    return _make(out, (a,), backward)


def log_softmax(a: ArrayLike, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    peak = np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(a.data - peak)
    total = np.sum(e, axis=axis, keepdims=True)
    out = a.data - peak - np.log(total)
    probs = e / total

    def backward(g: np.ndarray) -> None:
        a._accumulate(g - probs * np.sum(g, axis=axis, keepdims=True))

    return _make(out, (a,), backward)


def layer_norm(a: ArrayLike, gamma: ArrayLike, beta: ArrayLike, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis, then scale and shift"""
    a, gamma, beta = as_tensor(a), as_tensor(gamma), as_tensor(beta)
    dim = a.shape[-1]
    if gamma.shape != (dim,) or beta.shape != (dim,):
        raise ShapeMismatch(f"layer_norm: affine parameters must have shape ({dim},)")
    mu = np.mean(a.data, axis=-1, keepdims=True)
    centered = a.data - mu
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    batch_axes = tuple(range(a.ndim - 1))

    def backward(g: np.ndarray) -> None:
        if gamma.requires_grad:
            gamma._accumulate(np.sum(g * xhat, axis=batch_axes))
        if beta.requires_grad:
            beta._accumulate(np.sum(g, axis=batch_axes))
        if a.requires_grad:
            dxhat = g * gamma.data
            a._accumulate(
                inv_std / dim * (
                    dim * dxhat
                    - np.sum(dxhat, axis=-1, keepdims=True)
                    - xhat * np.sum(dxhat * xhat, axis=-1, keepdims=True)
                )
            )

    return _make(xhat * gamma.data + beta.data, (a, gamma, beta), backward)


# Convolution and pooling (NCHW)

def conv2d(x: ArrayLike, weight: ArrayLike, bias: Optional[ArrayLike] = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    x, weight = as_tensor(x), as_tensor(weight)
    bias = as_tensor(bias) if bias is not None else None
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeMismatch(f"conv2d: input {x.shape} incompatible with weight {weight.shape}")

    n, c, h, w = x.shape
    out_channels, _, kh, kw = weight.shape
    padded = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows = sliding_window_view(padded, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    out_h, out_w = windows.shape[2], windows.shape[3]
    if out_h < 1 or out_w < 1:
        raise ShapeMismatch(f"conv2d: kernel {kh}x{kw} does not fit input {h}x{w}")

    # (n, out_h, out_w, c*kh*kw)
    columns = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n, out_h, out_w, c * kh * kw)
    kernel = weight.data.reshape(out_channels, -1)
    out = (columns @ kernel.T).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data[None, :, None, None]

    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g: np.ndarray) -> None:
        g_cols = g.transpose(0, 2, 3, 1)  # (n, out_h, out_w, out_channels)
        if weight.requires_grad:
            dk = g_cols.reshape(-1, out_channels).T @ columns.reshape(-1, c * kh * kw)
            weight._accumulate(dk.reshape(weight.shape))
        if bias is not None and bias.requires_grad:
            bias._accumulate(g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            d_cols = (g_cols @ kernel).reshape(n, out_h, out_w, c, kh, kw)
            d_padded = np.zeros_like(padded)
            for i in range(kh):
                for j in range(kw):
                    d_padded[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += \
                        d_cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            x._accumulate(d_padded[:, :, padding:padding + h, padding:padding + w])

    return _make(out, parents, backward)


def max_pool2d(x: ArrayLike, kernel: int = 2) -> Tensor:
    """Non-overlapping max pooling; trailing rows/columns that do not fill a window are dropped"""
    x = as_tensor(x)
    n, c, h, w = x.shape
    out_h, out_w = h // kernel, w // kernel
    if out_h < 1 or out_w < 1:
        raise ShapeMismatch(f"max_pool2d: kernel {kernel} larger than input {h}x{w}")
    cropped = x.data[:, :, :out_h * kernel, :out_w * kernel]
    blocks = cropped.reshape(n, c, out_h, kernel, out_w, kernel).transpose(0, 1, 2, 4, 3, 5)
    flat = blocks.reshape(n, c, out_h, out_w, kernel * kernel)
    winner = np.argmax(flat, axis=-1)
    out = np.take_along_axis(flat, winner[..., None], axis=-1)[..., 0]

    def backward(g: np.ndarray) -> None:
        d_flat = np.zeros_like(flat)
        np.put_along_axis(d_flat, winner[..., None], g[..., None], axis=-1)
        d_blocks = d_flat.reshape(n, c, out_h, out_w, kernel, kernel).transpose(0, 1, 2, 4, 3, 5)
        full = np.zeros_like(x.data)
        full[:, :, :out_h * kernel, :out_w * kernel] = d_blocks.reshape(n, c, out_h * kernel, out_w * kernel)
        x._accumulate(full)

    return _make(out, (x,), backward)


# Attention and losses

def scaled_dot_product_attention(q: ArrayLike, k: ArrayLike, v: ArrayLike,
                                 key_mask: Optional[np.ndarray] = None) -> Tensor:
    """
    softmax(q k^T / sqrt(d) + mask) v over the last two axes

    Args:
        q, k, v: (..., T, d) tensors
        key_mask: boolean array broadcastable to (..., 1, T); False keys get zero weight
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    scores = matmul(q, swap_last(k)) * (1.0 / np.sqrt(q.shape[-1]))
    if key_mask is not None:
        scores = scores + np.where(np.asarray(key_mask, dtype=bool), 0.0, MASK_FILL)
    return matmul(softmax(scores, axis=-1), v)


def mse(pred: ArrayLike, target: ArrayLike) -> Tensor:
    diff = sub(pred, target)
    return mean(diff * diff)


def cross_entropy(logits: ArrayLike, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer labels (0-based) under row-wise logits"""
    logits = as_tensor(logits)
    return mean(logsumexp(logits, axis=-1) - gather(logits, labels))
