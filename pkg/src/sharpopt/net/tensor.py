"""Minimal reverse-mode autodiff over float64 numpy arrays.

Tensors are at most 4-D (batch, channels, height, width). Every op
records a backward closure; Tensor.backward() runs them in reverse
topological order. Gradients accumulate into .grad for tensors created
with requires_grad=True (parameters) and for intermediates that need
them. Kink subgradients (leaky_relu at 0, relu at 0, hard_sigmoid at
its clamp edges) are pinned to 0.
"""

from __future__ import annotations

import numpy as np

LEAKY_SLOPE = 0.01


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        if self.data.ndim > 4:
            raise ValueError(f"tensors are at most 4-D, got {self.data.ndim}-D")
        self.grad = None
        self.requires_grad = requires_grad
        self._backward = None
        self._parents = ()

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def zero_grad(self) -> None:
        self.grad = None

    def assert_finite(self) -> "Tensor":
        if not np.all(np.isfinite(self.data)):
            raise FloatingPointError("tensor contains non-finite values")
        return self

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient needs a scalar")
            grad = np.ones_like(self.data)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self._accumulate(np.asarray(grad, dtype=np.float64))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad or p._parents or p._backward for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data

    def backward(grad):
        a._accumulate(_unbroadcast(grad, a.data.shape))
        b._accumulate(_unbroadcast(grad, b.data.shape))

    return _make(data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data - b.data

    def backward(grad):
        a._accumulate(_unbroadcast(grad, a.data.shape))
        b._accumulate(_unbroadcast(-grad, b.data.shape))

    return _make(data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data

    def backward(grad):
        a._accumulate(_unbroadcast(grad * b.data, a.data.shape))
        b._accumulate(_unbroadcast(grad * a.data, b.data.shape))

    return _make(data, (a, b), backward)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    data = x.data.reshape(shape)

    def backward(grad):
        x._accumulate(grad.reshape(x.data.shape))

    return _make(data, (x,), backward)


def tsum(x: Tensor) -> Tensor:
    x = as_tensor(x)
    data = np.array(x.data.sum())

    def backward(grad):
        x._accumulate(np.broadcast_to(grad, x.data.shape).copy())

    return _make(data, (x,), backward)


def tmean(x: Tensor) -> Tensor:
    x = as_tensor(x)
    n = x.data.size
    data = np.array(x.data.mean())

    def backward(grad):
        x._accumulate(np.broadcast_to(grad / n, x.data.shape).copy())

    return _make(data, (x,), backward)


def tabs(x: Tensor) -> Tensor:
    x = as_tensor(x)
    data = np.abs(x.data)
    sign = np.sign(x.data)  # 0 at the kink

    def backward(grad):
        x._accumulate(grad * sign)

    return _make(data, (x,), backward)


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0  # subgradient 0 at the kink
    data = np.where(mask, x.data, 0.0)

    def backward(grad):
        x._accumulate(grad * mask)

    return _make(data, (x,), backward)


def leaky_relu(x: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    x = as_tensor(x)
    data = np.where(x.data > 0, x.data, slope * x.data)
    deriv = np.where(x.data > 0, 1.0, np.where(x.data < 0, slope, 0.0))

    def backward(grad):
        x._accumulate(grad * deriv)

    return _make(data, (x,), backward)


def hard_sigmoid(x: Tensor) -> Tensor:
    """clamp(x/6 + 0.5, 0, 1); derivative 1/6 strictly inside the ramp."""
    x = as_tensor(x)
    data = np.clip(x.data / 6.0 + 0.5, 0.0, 1.0)
    deriv = np.where((x.data > -3.0) & (x.data < 3.0), 1.0 / 6.0, 0.0)

    def backward(grad):
        x._accumulate(grad * deriv)

    return _make(data, (x,), backward)


# -- convolutions and pooling (NCHW) ----------------------------------------


def _pad_hw(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """Standard 2-D convolution. x: (N, Cin, H, W); weight: (Cout, Cin, k, k)."""
    x, weight = as_tensor(x), as_tensor(weight)
    n, cin, h, w = x.data.shape
    cout, cin_w, kh, kw = weight.data.shape
    if cin != cin_w:
        raise ValueError(f"conv2d channel mismatch: input {cin}, weight {cin_w}")
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    if ho < 1 or wo < 1:
        raise ValueError(f"conv2d output would be empty for input {h}x{w}")
    xp = _pad_hw(x.data, padding)
    out = np.zeros((n, cout, ho, wo))
    for i in range(kh):
        for j in range(kw):
            sl = xp[:, :, i:i + ho * stride:stride, j:j + wo * stride:stride]
            out += np.einsum("ncxy,oc->noxy", sl, weight.data[:, :, i, j], optimize=True)
    if bias is not None:
        out += bias.data.reshape(1, cout, 1, 1)

    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(grad):
        dxp = np.zeros_like(xp)
        dw = np.zeros_like(weight.data)
        for i in range(kh):
            for j in range(kw):
                sl = xp[:, :, i:i + ho * stride:stride, j:j + wo * stride:stride]
                dw[:, :, i, j] = np.einsum("noxy,ncxy->oc", grad, sl, optimize=True)
                dxp[:, :, i:i + ho * stride:stride, j:j + wo * stride:stride] += (
                    np.einsum("noxy,oc->ncxy", grad, weight.data[:, :, i, j], optimize=True)
                )
        if padding:
            dx = dxp[:, :, padding:padding + h, padding:padding + w]
        else:
            dx = dxp
        x._accumulate(dx)
        weight._accumulate(dw)
        if bias is not None:
            bias._accumulate(grad.sum(axis=(0, 2, 3)))

    return _make(out, parents, backward)


def depthwise_conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
                     stride: int = 1, padding: int = 0) -> Tensor:
    """Per-channel convolution. weight: (C, k, k)."""
    x, weight = as_tensor(x), as_tensor(weight)
    n, c, h, w = x.data.shape
    cw, kh, kw = weight.data.shape
    if c != cw:
        raise ValueError(f"depthwise channel mismatch: input {c}, weight {cw}")
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    if ho < 1 or wo < 1:
        raise ValueError(f"depthwise output would be empty for input {h}x{w}")
    xp = _pad_hw(x.data, padding)
    out = np.zeros((n, c, ho, wo))
    for i in range(kh):
        for j in range(kw):
            sl = xp[:, :, i:i + ho * stride:stride, j:j + wo * stride:stride]
            out += sl * weight.data[:, i, j].reshape(1, c, 1, 1)
    if bias is not None:
        out += bias.data.reshape(1, c, 1, 1)

    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(grad):
        dxp = np.zeros_like(xp)
        dw = np.zeros_like(weight.data)
        for i in range(kh):
            for j in range(kw):
                sl = xp[:, :, i:i + ho * stride:stride, j:j + wo * stride:stride]
                dw[:, i, j] = np.einsum("ncxy,ncxy->c", grad, sl, optimize=True)
                dxp[:, :, i:i + ho * stride:stride, j:j + wo * stride:stride] += (
                    grad * weight.data[:, i, j].reshape(1, c, 1, 1)
                )
        if padding:
            dx = dxp[:, :, padding:padding + h, padding:padding + w]
        else:
            dx = dxp
        x._accumulate(dx)
        weight._accumulate(dw)
        if bias is not None:
            bias._accumulate(grad.sum(axis=(0, 2, 3)))

    return _make(out, parents, backward)


def avg_pool2d(x: Tensor, k: int) -> Tensor:
    """Non-overlapping k x k mean pooling (stride = k, dims divisible by k)."""
    x = as_tensor(x)
    n, c, h, w = x.data.shape
    if h % k or w % k:
        raise ValueError(f"avg_pool2d needs dims divisible by {k}, got {h}x{w}")
    data = x.data.reshape(n, c, h // k, k, w // k, k).mean(axis=(3, 5))

    def backward(grad):
        g = np.repeat(np.repeat(grad, k, axis=2), k, axis=3) / (k * k)
        x._accumulate(g)

    return _make(data, (x,), backward)


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over (H, W), keeping a (N, C, 1, 1) shape."""
    x = as_tensor(x)
    n, c, h, w = x.data.shape
    data = x.data.mean(axis=(2, 3), keepdims=True)

    def backward(grad):
        x._accumulate(np.broadcast_to(grad / (h * w), x.data.shape).copy())

    return _make(data, (x,), backward)
