"""Frame/video containers, color conversion, and file I/O.

Samples are normalized float64 reals in [0, 1], stored planar as
(channels, height, width). YCbCr plane order is Y, Cb, Cr everywhere
in this package. Storage depth is 8 bits; quantization to 8 bits is
the only loss a store/load round trip introduces.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image


class Colorspace(str, enum.Enum):
    RGB = "rgb"
    YCBCR = "ycbcr"


# Full-range BT.601 (JPEG/JFIF convention). Rows produce Y, Cb, Cr from
# R, G, B; chroma offsets of +0.5 are applied separately.
_RGB_TO_YCBCR = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168735892, -0.331264108, 0.5],
        [0.5, -0.418687589, -0.081312411],
    ],
    dtype=np.float64,
)
_YCBCR_TO_RGB = np.linalg.inv(_RGB_TO_YCBCR)
_CHROMA_OFFSET = np.array([0.0, 0.5, 0.5], dtype=np.float64).reshape(3, 1, 1)


@dataclass(frozen=True, eq=False)
class Frame:
    """One planar image: float64 data of shape (3, H, W) in [0, 1]."""

    data: np.ndarray
    colorspace: Colorspace = Colorspace.RGB

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[0] != 3:
            raise ValueError(f"frame data must have shape (3, H, W), got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("frame data contains non-finite samples")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    def with_data(self, data: np.ndarray, colorspace: Colorspace | None = None) -> "Frame":
        return Frame(data, colorspace if colorspace is not None else self.colorspace)


@dataclass(frozen=True, eq=False)
class Video:
    """An ordered sequence of frames with uniform geometry."""

    frames: tuple[Frame, ...]
    frame_rate: float = 30.0

    def __post_init__(self):
        frames = tuple(self.frames)
        if len(frames) == 0:
            raise ValueError("a video needs at least one frame")
        w, h, cs = frames[0].width, frames[0].height, frames[0].colorspace
        for i, f in enumerate(frames):
            if (f.width, f.height) != (w, h):
                raise ValueError(
                    f"frame {i} is {f.width}x{f.height}, expected {w}x{h}"
                )
            if f.colorspace != cs:
                raise ValueError(f"frame {i} colorspace differs from frame 0")
        if not (self.frame_rate > 0):
            raise ValueError("frame rate must be positive")
        object.__setattr__(self, "frames", frames)

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def colorspace(self) -> Colorspace:
        return self.frames[0].colorspace

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    @property
    def duration_seconds(self) -> float:
        return len(self.frames) / self.frame_rate


def rgb_to_ycbcr(f: Frame) -> Frame:
    """Full-range BT.601 RGB -> YCbCr (plane order Y, Cb, Cr), clamped to [0, 1]."""
    if f.colorspace != Colorspace.RGB:
        raise ValueError(f"expected an RGB frame, got {f.colorspace.value}")
    out = np.tensordot(_RGB_TO_YCBCR, f.data, axes=([1], [0])) + _CHROMA_OFFSET
    return Frame(np.clip(out, 0.0, 1.0), Colorspace.YCBCR)


def ycbcr_to_rgb(f: Frame) -> Frame:
    """Inverse of rgb_to_ycbcr, clamped to [0, 1]."""
    if f.colorspace != Colorspace.YCBCR:
        raise ValueError(f"expected a YCbCr frame, got {f.colorspace.value}")
    out = np.tensordot(_YCBCR_TO_RGB, f.data - _CHROMA_OFFSET, axes=([1], [0]))
    return Frame(np.clip(out, 0.0, 1.0), Colorspace.RGB)


def to_ycbcr(f: Frame) -> Frame:
    """Convert to YCbCr if needed; YCbCr frames pass through unchanged."""
    return f if f.colorspace == Colorspace.YCBCR else rgb_to_ycbcr(f)


def to_uint8(data: np.ndarray) -> np.ndarray:
    """Quantize [0, 1] floats to 8-bit samples."""
    return np.round(np.clip(data, 0.0, 1.0) * 255.0).astype(np.uint8)


def from_uint8(data: np.ndarray) -> np.ndarray:
    return data.astype(np.float64) / 255.0


# ---------------------------------------------------------------------------
# Raw planar format: ASCII header "W H C FPS N\n" then N frames of
# C*H*W bytes each, planar, channel-major, 8 bits per sample.
# ---------------------------------------------------------------------------

_HEADER_RE = re.compile(
    rb"^(\d+) (\d+) (\d+) (\d+(?:\.\d+)?) (\d+)\n"
)


def _store_raw(video: Video, path: Path) -> None:
    w, h = video.width, video.height
    header = f"{w} {h} 3 {video.frame_rate:g} {video.frame_count}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        for frame in video.frames:
            fh.write(to_uint8(frame.data).tobytes())


def _load_raw(path: Path, colorspace: Colorspace) -> Video:
    blob = Path(path).read_bytes()
    m = _HEADER_RE.match(blob)
    if m is None:
        raise ValueError(f"{path}: malformed raw video header")
    w, h, c = int(m.group(1)), int(m.group(2)), int(m.group(3))
    fps = float(m.group(4))
    n = int(m.group(5))
    if c != 3:
        raise ValueError(f"{path}: expected 3 channels, header says {c}")
    if n < 1:
        raise ValueError(f"{path}: header declares no frames")
    body = blob[m.end():]
    frame_bytes = c * h * w
    if len(body) != n * frame_bytes:
        raise ValueError(
            f"{path}: expected {n * frame_bytes} payload bytes, found {len(body)}"
        )
    frames = []
    for i in range(n):
        raw = np.frombuffer(body[i * frame_bytes:(i + 1) * frame_bytes], dtype=np.uint8)
        frames.append(Frame(from_uint8(raw.reshape(c, h, w)), colorspace))
    return Video(tuple(frames), frame_rate=fps)


# ---------------------------------------------------------------------------
# PNG sequence: directory of frame_000000.png, frame_000001.png, ...
# PNG I/O is RGB only.
# ---------------------------------------------------------------------------


def _store_png_dir(video: Video, path: Path) -> None:
    if video.colorspace != Colorspace.RGB:
        raise ValueError("PNG sequences carry RGB data; convert the video first")
    path.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(video.frames):
        img = Image.fromarray(to_uint8(frame.data).transpose(1, 2, 0), mode="RGB")
        img.save(path / f"frame_{i:06d}.png")


def _load_png_dir(path: Path, frame_rate: float) -> Video:
    files = sorted(Path(path).glob("frame_*.png"))
    if not files:
        raise ValueError(f"{path}: no frames found")
    frames = []
    shape = None
    for fp in files:
        arr = np.asarray(Image.open(fp).convert("RGB"), dtype=np.uint8)
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise ValueError(
                f"{fp.name}: size {arr.shape[1]}x{arr.shape[0]} does not match "
                f"{shape[1]}x{shape[0]}"
            )
        frames.append(Frame(from_uint8(arr.transpose(2, 0, 1)), Colorspace.RGB))
    return Video(tuple(frames), frame_rate=frame_rate)


def store_video(video: Video, path: str | Path, format: str = "raw") -> None:
    """Write a video as raw planar 8-bit ("raw") or a PNG sequence ("png")."""
    path = Path(path)
    if format == "raw":
        _store_raw(video, path)
    elif format == "png":
        _store_png_dir(video, path)
    else:
        raise ValueError(f"unknown video format {format!r}")


def load_video(
    path: str | Path,
    format: str = "raw",
    colorspace: Colorspace = Colorspace.RGB,
    frame_rate: float = 30.0,
) -> Video:
    """Load a video stored by store_video.

    The raw container does not record a colorspace; pass the one the
    samples were written in (RGB unless you know otherwise). For PNG
    sequences the data is RGB and frame_rate must be supplied.
    """
    path = Path(path)
    if format == "raw":
        return _load_raw(path, colorspace)
    if format == "png":
        return _load_png_dir(path, frame_rate)
    raise ValueError(f"unknown video format {format!r}")


def guess_format(path: str | Path) -> str:
    """Infer "png" for directories, "raw" otherwise."""
    return "png" if Path(path).is_dir() else "raw"
