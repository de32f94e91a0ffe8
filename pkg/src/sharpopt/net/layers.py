"""Parameterized layers for the sharpening-level regressor.

Each layer owns its parameter Tensors, exposes __call__ for the
forward pass, iterates (name, tensor) pairs through params(), and
reports analytic conv FLOPs (2 per multiply-accumulate; activations,
pooling, and bias adds are not counted).

Weights use Kaiming fan-in normal init; biases start at zero.
"""

from __future__ import annotations

import numpy as np

from .tensor import (
    Tensor,
    add,
    avg_pool2d,
    conv2d,
    depthwise_conv2d,
    global_avg_pool,
    hard_sigmoid,
    leaky_relu,
    mul,
)


def _kaiming(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


class Conv2d:
    def __init__(self, cin: int, cout: int, k: int, stride: int = 1,
                 padding: int = 0, bias: bool = True, *, rng: np.random.Generator):
        self.cin, self.cout, self.k = cin, cout, k
        self.stride, self.padding = stride, padding
        self.weight = Tensor(_kaiming(rng, (cout, cin, k, k), cin * k * k),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(cout), requires_grad=True) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, self.stride, self.padding)

    def params(self):
        yield "weight", self.weight
        if self.bias is not None:
            yield "bias", self.bias

    def out_hw(self, h: int, w: int) -> tuple[int, int]:
        return ((h + 2 * self.padding - self.k) // self.stride + 1,
                (w + 2 * self.padding - self.k) // self.stride + 1)

    def flops(self, h: int, w: int) -> int:
        ho, wo = self.out_hw(h, w)
        return 2 * self.cin * self.cout * self.k * self.k * ho * wo


class DepthwiseConv2d:
    def __init__(self, channels: int, k: int, stride: int = 1,
                 padding: int = 0, bias: bool = True, *, rng: np.random.Generator):
        self.channels, self.k = channels, k
        self.stride, self.padding = stride, padding
        self.weight = Tensor(_kaiming(rng, (channels, k, k), k * k),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(channels), requires_grad=True) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return depthwise_conv2d(x, self.weight, self.bias, self.stride, self.padding)

    def params(self):
        yield "weight", self.weight
        if self.bias is not None:
            yield "bias", self.bias

    def out_hw(self, h: int, w: int) -> tuple[int, int]:
        return ((h + 2 * self.padding - self.k) // self.stride + 1,
                (w + 2 * self.padding - self.k) // self.stride + 1)

    def flops(self, h: int, w: int) -> int:
        ho, wo = self.out_hw(h, w)
        return 2 * self.channels * self.k * self.k * ho * wo


class SqueezeExcite:
    """Global pool -> 1x1 reduce -> LeakyReLU -> 1x1 expand -> hard
    sigmoid -> channelwise scale. Gate values lie in [0, 1]."""

    def __init__(self, channels: int, reduction: int = 4, *, rng: np.random.Generator):
        mid = max(1, channels // reduction)
        self.reduce = Conv2d(channels, mid, 1, rng=rng)
        self.expand = Conv2d(mid, channels, 1, rng=rng)

    def __call__(self, x: Tensor) -> Tensor:
        gate = global_avg_pool(x)
        gate = leaky_relu(self.reduce(gate))
        gate = hard_sigmoid(self.expand(gate))
        return mul(x, gate)

    def gate_values(self, x: Tensor) -> np.ndarray:
        gate = global_avg_pool(x)
        gate = leaky_relu(self.reduce(gate))
        return hard_sigmoid(self.expand(gate)).data

    def params(self):
        for name, p in self.reduce.params():
            yield f"reduce.{name}", p
        for name, p in self.expand.params():
            yield f"expand.{name}", p

    def flops(self, h: int, w: int) -> int:
        return self.reduce.flops(1, 1) + self.expand.flops(1, 1)


class InvertedResidual:
    """Expand 1x1 -> LeakyReLU -> depthwise 3x3 -> LeakyReLU ->
    optional SE -> linear 1x1 projection (no activation), with a
    residual add when stride is 1 and channel counts match."""

    def __init__(self, cin: int, cout: int, expanded: int, stride: int,
                 use_se: bool, *, rng: np.random.Generator):
        self.cin, self.cout, self.stride = cin, cout, stride
        self.use_residual = stride == 1 and cin == cout
        self.expand = Conv2d(cin, expanded, 1, rng=rng)
        self.depthwise = DepthwiseConv2d(expanded, 3, stride=stride, padding=1, rng=rng)
        self.se = SqueezeExcite(expanded, rng=rng) if use_se else None
        self.project = Conv2d(expanded, cout, 1, rng=rng)

    def __call__(self, x: Tensor) -> Tensor:
        out = leaky_relu(self.expand(x))
        out = leaky_relu(self.depthwise(out))
        if self.se is not None:
            out = self.se(out)
        out = self.project(out)
        if self.use_residual:
            out = add(out, x)
        return out

    def params(self):
        for name, p in self.expand.params():
            yield f"expand.{name}", p
        for name, p in self.depthwise.params():
            yield f"depthwise.{name}", p
        if self.se is not None:
            for name, p in self.se.params():
                yield f"se.{name}", p
        for name, p in self.project.params():
            yield f"project.{name}", p

    def out_hw(self, h: int, w: int) -> tuple[int, int]:
        return self.depthwise.out_hw(h, w)

    def flops(self, h: int, w: int) -> int:
        total = self.expand.flops(h, w)
        ho, wo = self.depthwise.out_hw(h, w)
        total += self.depthwise.flops(h, w)
        if self.se is not None:
            total += self.se.flops(ho, wo)
        total += self.project.flops(ho, wo)
        return total


class HfBranch:
    """Two conv(3x3, s1, p1) + LeakyReLU + average-pool stages over the
    high-frequency residual. Pool sizes default to (2, 2); the model
    overrides them so the branch output aligns with the backbone map."""

    def __init__(self, cin: int, mid: int, cout: int,
                 pools: tuple[int, int] = (2, 2), *, rng: np.random.Generator):
        self.pools = pools
        self.conv1 = Conv2d(cin, mid, 3, stride=1, padding=1, rng=rng)
        self.conv2 = Conv2d(mid, cout, 3, stride=1, padding=1, rng=rng)

    def __call__(self, x: Tensor) -> Tensor:
        out = avg_pool2d(leaky_relu(self.conv1(x)), self.pools[0])
        out = avg_pool2d(leaky_relu(self.conv2(out)), self.pools[1])
        return out

    def params(self):
        for name, p in self.conv1.params():
            yield f"conv1.{name}", p
        for name, p in self.conv2.params():
            yield f"conv2.{name}", p

    def out_hw(self, h: int, w: int) -> tuple[int, int]:
        return h // (self.pools[0] * self.pools[1]), w // (self.pools[0] * self.pools[1])

    def flops(self, h: int, w: int) -> int:
        total = self.conv1.flops(h, w)
        total += self.conv2.flops(h // self.pools[0], w // self.pools[0])
        return total
