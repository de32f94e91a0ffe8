"""The frequency-assisted sharpening-level regressor.

Backbone: a conv stem (3x3, stride 2) followed by `depth` inverted
residual blocks; the first `se_free_prefix` blocks omit the SE gate.
Channel widths follow the familiar mobile-CNN large schedule, resampled
to the configured depth and scaled by width_mult. The high-frequency
branch filters the block-DCT residual of the input and is fused into
the backbone output with a residual add. The regression head reduces
channels with a 1x1 conv (LeakyReLU), projects to one channel with a
second 1x1 conv, and global-average-pools to a scalar level per sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from ..freq import extract_hf
from ..media import Colorspace, Frame
from .layers import Conv2d, HfBranch, InvertedResidual
from .tensor import Tensor, add, global_avg_pool, leaky_relu, reshape

# Output/expansion widths of the reference 15-block mobile schedule;
# resampled when depth differs.
_BASE_OUT = (16, 24, 24, 40, 40, 40, 80, 80, 80, 80, 112, 112, 160, 160, 160)
_BASE_EXP = (16, 64, 72, 72, 120, 120, 240, 200, 184, 184, 480, 672, 672, 960, 960)
_BASE_STEM = 16


def _scale_channels(v: float, width_mult: float) -> int:
    return max(4, int(round(v * width_mult / 4.0)) * 4)


@dataclass(frozen=True)
class NetConfig:
    depth: int = 4
    se_free_prefix: int = 1
    width_mult: float = 0.25
    hf_enabled: bool = True
    input_size: int = 64
    nlr_reduction: int = 4
    patch_block: int = 16
    stride2_blocks: tuple[int, ...] | None = None

    def __post_init__(self):
        if not (self.depth >= self.se_free_prefix >= 0):
            raise ValueError("need depth >= se_free_prefix >= 0")
        if self.width_mult <= 0:
            raise ValueError("width_mult must be positive")
        if self.input_size % 8:
            raise ValueError("input_size must be a multiple of 8")
        if self.stride2_blocks is not None:
            object.__setattr__(
                self, "stride2_blocks", tuple(int(i) for i in self.stride2_blocks)
            )

    def resolved_stride2(self) -> tuple[int, ...]:
        if self.stride2_blocks is not None:
            return self.stride2_blocks
        # One stride-2 block at the start of each quarter of the stack.
        return tuple(sorted({i * self.depth // 4 for i in range(4)}))

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["stride2_blocks"] is not None:
            d["stride2_blocks"] = list(d["stride2_blocks"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        d = dict(d)
        if d.get("stride2_blocks") is not None:
            d["stride2_blocks"] = tuple(d["stride2_blocks"])
        return cls(**d)


def _split_downsample(ratio: int) -> tuple[int, int]:
    """Factor a power-of-two downsample into two pool sizes."""
    if ratio & (ratio - 1):
        raise ValueError(f"downsample ratio must be a power of two, got {ratio}")
    log = ratio.bit_length() - 1
    first = 1 << ((log + 1) // 2)
    return first, ratio // first


class LevelRegressor:
    """Predicts a sharpening level from a batch of RGB frames."""

    def __init__(self, cfg: NetConfig, seed: int = 0):
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        wm = cfg.width_mult

        idx = np.round(np.linspace(0, len(_BASE_OUT) - 1, cfg.depth)).astype(int)
        outs = [_scale_channels(_BASE_OUT[i], wm) for i in idx]
        exps = [_scale_channels(_BASE_EXP[i], wm) for i in idx]
        stride2 = set(cfg.resolved_stride2())

        stem_ch = _scale_channels(_BASE_STEM, wm)
        self.stem = Conv2d(3, stem_ch, 3, stride=2, padding=1, rng=rng)

        self.blocks = []
        cin = stem_ch
        for i in range(cfg.depth):
            self.blocks.append(
                InvertedResidual(
                    cin,
                    outs[i],
                    exps[i],
                    stride=2 if i in stride2 else 1,
                    use_se=i >= cfg.se_free_prefix,
                    rng=rng,
                )
            )
            cin = outs[i]
        self.out_channels = cin

        downsample = 2 * (2 ** len(stride2))
        self.feature_hw = cfg.input_size // downsample
        if self.feature_hw < 1:
            raise ValueError(
                f"input_size {cfg.input_size} is too small for a /{downsample} backbone"
            )

        self.hf = None
        if cfg.hf_enabled:
            pools = _split_downsample(downsample)
            self.hf = HfBranch(
                3, max(4, self.out_channels // 2), self.out_channels,
                pools=pools, rng=rng,
            )

        head_mid = max(1, self.out_channels // cfg.nlr_reduction)
        self.head_reduce = Conv2d(self.out_channels, head_mid, 1, rng=rng)
        self.head_out = Conv2d(head_mid, 1, 1, rng=rng)

    # -- parameters ----------------------------------------------------------

    def params(self):
        for name, p in self.stem.params():
            yield f"stem.{name}", p
        for i, block in enumerate(self.blocks):
            for name, p in block.params():
                yield f"block{i}.{name}", p
        if self.hf is not None:
            for name, p in self.hf.params():
                yield f"hf.{name}", p
        for name, p in self.head_reduce.params():
            yield f"head.reduce.{name}", p
        for name, p in self.head_out.params():
            yield f"head.out.{name}", p

    def param_dict(self) -> dict[str, Tensor]:
        return dict(self.params())

    def num_params(self) -> int:
        return sum(p.size for _, p in self.params())

    def zero_grad(self) -> None:
        for _, p in self.params():
            p.zero_grad()

    # -- forward -------------------------------------------------------------

    def _hf_residual(self, batch: np.ndarray) -> np.ndarray:
        out = np.empty_like(batch)
        for i in range(batch.shape[0]):
            out[i] = extract_hf(Frame(batch[i], Colorspace.RGB)).data
        return out

    def forward(self, x: np.ndarray | Tensor) -> Tensor:
        data = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
        if data.ndim != 4 or data.shape[1] != 3:
            raise ValueError(f"expected a (N, 3, H, W) batch, got {data.shape}")
        if data.shape[2] != self.cfg.input_size or data.shape[3] != self.cfg.input_size:
            raise ValueError(
                f"expected {self.cfg.input_size}x{self.cfg.input_size} inputs, "
                f"got {data.shape[2]}x{data.shape[3]}"
            )
        inp = x if isinstance(x, Tensor) else Tensor(data)

        out = leaky_relu(self.stem(inp))
        for block in self.blocks:
            out = block(out)

        if self.hf is not None:
            residual = Tensor(self._hf_residual(data))
            out = add(out, self.hf(residual))

        out = leaky_relu(self.head_reduce(out))
        out = self.head_out(out)
        out = global_avg_pool(out)
        return reshape(out, (data.shape[0],))

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x).data

    # -- analytic costs -------------------------------------------------------

    def count_flops(self) -> int:
        """Conv multiply-accumulate FLOPs (2 per MAC) for one input."""
        h = w = self.cfg.input_size
        total = self.stem.flops(h, w)
        h, w = self.stem.out_hw(h, w)
        for block in self.blocks:
            total += block.flops(h, w)
            h, w = block.out_hw(h, w)
        if self.hf is not None:
            total += self.hf.flops(self.cfg.input_size, self.cfg.input_size)
        total += self.head_reduce.flops(h, w)
        total += self.head_out.flops(h, w)
        return total

    def estimate_memory_bytes(self) -> int:
        """Rough peak estimate: parameters plus the largest activation
        pair (input + output of one layer) at batch 1, float64."""
        param_bytes = 8 * self.num_params()
        s = self.cfg.input_size
        acts = [3 * s * s]
        h = w = s
        ch = 3
        h, w = self.stem.out_hw(h, w)
        ch = self.stem.cout
        acts.append(ch * h * w)
        for block in self.blocks:
            exp = block.expand.cout
            acts.append(exp * h * w)
            h, w = block.out_hw(h, w)
            acts.append(exp * h * w)
            acts.append(block.cout * h * w)
        peak_pair = max(a + b for a, b in zip(acts, acts[1:])) if len(acts) > 1 else acts[0]
        return param_bytes + 8 * peak_pair
