"""8x8 block DCT/IDCT and high-frequency residual extraction.

Each channel of a YCbCr frame is split into non-overlapping 8x8 blocks
and transformed with the orthonormal 2-D DCT-II, giving 64 coefficient
planes per channel of size (H/8, W/8). Planes are arranged low to high
frequency along the JPEG-style zigzag of the coefficient grid, so
plane 0 is the DC plane. Dropping the DC plane of each channel group
and inverting yields the signed high-frequency residual the regressor
consumes; the residual is deliberately not clamped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .media import Colorspace, Frame, to_ycbcr

BLOCK = 8


def _dct_basis(n: int = BLOCK) -> np.ndarray:
    # Orthonormal DCT-II rows: B @ B.T == I, and the DC coefficient of a
    # constant block of value c is n*c.
    k = np.arange(n).reshape(-1, 1)
    x = np.arange(n).reshape(1, -1)
    basis = np.sqrt(2.0 / n) * np.cos(np.pi * (2 * x + 1) * k / (2 * n))
    basis[0, :] = np.sqrt(1.0 / n)
    return basis


_BASIS = _dct_basis()


def zigzag_order(n: int = BLOCK) -> list[tuple[int, int]]:
    """Coefficient grid positions sorted low to high frequency (JPEG zigzag)."""
    order = []
    for s in range(2 * n - 1):
        diag = [(u, s - u) for u in range(n) if 0 <= s - u < n]
        if s % 2 == 0:
            diag.reverse()  # even diagonals run bottom-left to top-right
        order.extend(diag)
    return order


_ZIGZAG = zigzag_order()
_ZZ_U = np.array([u for u, _ in _ZIGZAG])
_ZZ_V = np.array([v for _, v in _ZIGZAG])


@dataclass(frozen=True, eq=False)
class FreqMap:
    """Per-channel zigzag-ordered coefficient planes.

    data has shape (C, 64, H/8, W/8); plane 0 of each channel group is
    the DC plane. Channel order follows the source frame (Y, Cb, Cr).
    """

    data: np.ndarray
    colorspace: Colorspace = Colorspace.YCBCR

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 4 or data.shape[1] != BLOCK * BLOCK:
            raise ValueError(
                f"frequency map must have shape (C, 64, H/8, W/8), got {data.shape}"
            )
        object.__setattr__(self, "data", data)

    @property
    def frame_height(self) -> int:
        return self.data.shape[2] * BLOCK

    @property
    def frame_width(self) -> int:
        return self.data.shape[3] * BLOCK


def _as_blocks(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    return plane.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).transpose(0, 2, 1, 3)


def _from_blocks(blocks: np.ndarray) -> np.ndarray:
    hb, wb = blocks.shape[:2]
    return blocks.transpose(0, 2, 1, 3).reshape(hb * BLOCK, wb * BLOCK)


def block_dct(f: Frame) -> FreqMap:
    """Orthonormal 8x8 block DCT of a YCbCr frame with 8-aligned dims."""
    if f.colorspace != Colorspace.YCBCR:
        raise ValueError("block_dct expects a YCbCr frame; convert first")
    if f.height % BLOCK or f.width % BLOCK:
        raise ValueError(
            f"frame dims must be multiples of {BLOCK}, got {f.width}x{f.height}"
        )
    planes = []
    for c in range(f.channels):
        blocks = _as_blocks(f.data[c])
        coeffs = np.einsum("un,hwnm,vm->hwuv", _BASIS, blocks, _BASIS, optimize=True)
        planes.append(coeffs[:, :, _ZZ_U, _ZZ_V].transpose(2, 0, 1))
    return FreqMap(np.stack(planes), f.colorspace)


def block_idct(m: FreqMap) -> Frame:
    """Exact inverse of block_dct."""
    c, _, hb, wb = m.data.shape
    out = np.empty((c, hb * BLOCK, wb * BLOCK))
    for ch in range(c):
        coeffs = np.zeros((hb, wb, BLOCK, BLOCK))
        coeffs[:, :, _ZZ_U, _ZZ_V] = m.data[ch].transpose(1, 2, 0)
        blocks = np.einsum("nu,hwuv,mv->hwnm", _BASIS, coeffs, _BASIS, optimize=True)
        out[ch] = _from_blocks(blocks)
    return Frame(out, m.colorspace)


def blockwise_mean(f: Frame) -> np.ndarray:
    """Each sample replaced by the mean of its 8x8 block (8-aligned dims)."""
    out = np.empty_like(f.data)
    for c in range(f.channels):
        blocks = _as_blocks(f.data[c])
        means = blocks.mean(axis=(2, 3), keepdims=True)
        out[c] = _from_blocks(np.broadcast_to(means, blocks.shape))
    return out


def extract_hf(f: Frame, drop_planes: int = 1) -> Frame:
    """High-frequency residual: drop the lowest drop_planes coefficient
    planes per channel and invert.

    RGB input is converted to YCbCr first; dims are padded to multiples
    of 8 by edge replication and cropped back. The result is a signed
    residual in YCbCr layout and is not clamped.
    """
    if not (1 <= drop_planes <= BLOCK * BLOCK):
        raise ValueError(f"drop_planes must be in [1, 64], got {drop_planes}")
    work = to_ycbcr(f)
    h, w = work.height, work.width
    pad_h = (-h) % BLOCK
    pad_w = (-w) % BLOCK
    data = work.data
    if pad_h or pad_w:
        data = np.pad(data, ((0, 0), (0, pad_h), (0, pad_w)), mode="edge")
    fmap = block_dct(Frame(data, Colorspace.YCBCR))
    coeffs = fmap.data.copy()
    coeffs[:, :drop_planes] = 0.0
    residual = block_idct(FreqMap(coeffs, Colorspace.YCBCR))
    return Frame(residual.data[:, :h, :w], Colorspace.YCBCR)
