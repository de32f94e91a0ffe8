"""Unsharp-mask sharpening at a continuous level.

The sharpened image is I + amount * (I - lowpass(I)): the detail layer
is the residual against a k x k box mean. Defaults (5x5 kernel,
luma-only) follow the common video-filter convention of sharpening the
luma plane with a small square matrix. Edges are replicated, which
keeps borders halo-free.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .media import (
    _CHROMA_OFFSET,
    _YCBCR_TO_RGB,
    Colorspace,
    Frame,
    Video,
    rgb_to_ycbcr,
)


class SharpenTarget(str, enum.Enum):
    LUMA = "luma"
    ALL = "all"


@dataclass(frozen=True)
class UsmParams:
    """amount is the detail gain; kernel is the box size (odd, 3..13)."""

    amount: float = 1.0
    kernel: int = 5
    target: SharpenTarget = SharpenTarget.LUMA

    def __post_init__(self):
        if not np.isfinite(self.amount) or not (0.0 <= self.amount <= 4.0):
            raise ValueError(f"amount must be finite in [0, 4], got {self.amount}")
        if self.kernel % 2 == 0 or not (3 <= self.kernel <= 13):
            raise ValueError(f"kernel must be odd in [3, 13], got {self.kernel}")


def _box_mean(plane: np.ndarray, k: int) -> np.ndarray:
    # mode="nearest" replicates edge samples, matching the documented
    # boundary handling.
    return uniform_filter(plane, size=k, mode="nearest")


def lowpass(f: Frame, k: int = 5) -> Frame:
    """k x k box mean of every channel, with replicated edges."""
    if k % 2 == 0:
        raise ValueError(f"kernel size must be odd, got {k}")
    out = np.stack([_box_mean(f.data[c], k) for c in range(f.channels)])
    return f.with_data(out)


def usm(f: Frame, p: UsmParams, clamp: bool = True) -> Frame:
    """Sharpen one frame. Output is clamped to [0, 1] unless clamp=False.

    Luma-only sharpening of an RGB frame converts to YCbCr internally
    and converts back, so the caller's colorspace is preserved. The
    amount=0 case returns the input samples bitwise.
    """
    if p.amount == 0.0:
        return f.with_data(f.data.copy())

    if p.target == SharpenTarget.ALL:
        out = f.data + p.amount * (f.data - lowpass(f, p.kernel).data)
        return f.with_data(np.clip(out, 0.0, 1.0) if clamp else out)

    work = f if f.colorspace == Colorspace.YCBCR else rgb_to_ycbcr(f)
    data = work.data.copy()
    y = data[0]
    data[0] = y + p.amount * (y - _box_mean(y, p.kernel))

    if f.colorspace == Colorspace.YCBCR:
        return Frame(np.clip(data, 0.0, 1.0) if clamp else data, Colorspace.YCBCR)

    # Back to RGB without an intermediate clip, so pre-clamp overshoot
    # survives into the clamp (or into the returned data when clamp=False).
    rgb = np.tensordot(_YCBCR_TO_RGB, data - _CHROMA_OFFSET, axes=([1], [0]))
    return Frame(np.clip(rgb, 0.0, 1.0) if clamp else rgb, Colorspace.RGB)


def usm_video(v: Video, p: UsmParams) -> Video:
    """Frame-wise usm; frame count and rate are preserved."""
    return Video(tuple(usm(f, p) for f in v.frames), frame_rate=v.frame_rate)
