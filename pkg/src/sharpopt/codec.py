"""Encoder and quality-metric adapters.

Two encoder kinds are supported: an external command invoked through a
template with {input}/{output}/{crf} placeholders, and a deterministic
synthetic model used for hermetic tests and demos. Quality metrics:
native PSNR and SSIM on luma, plus an adapter for an external VMAF
binary.

The synthetic model is a frozen contract (tests depend on the exact
formulas):

    bitrate(level, crf, c) = 1000 * c * 2**((27 - crf) / 6) * (1 + 0.25 * level)
    quality(level, crf, c) = clip(95 - 2.2*(crf - 27) + g*level - h*level**2, 0, 100)
    with g = 6*c and h = 2*c + 1, complexity c in (0, 1].

Bitrate rises with the sharpening level and falls with CRF; quality is
a downward parabola in the level with its peak at g / (2*h).
"""

from __future__ import annotations

import json
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import AdapterError, AdapterUnavailableError, ConfigError
from .media import (
    Colorspace,
    Frame,
    Video,
    guess_format,
    load_video,
    store_video,
    to_uint8,
    to_ycbcr,
)

PSNR_CAP_DB = 99.0


@dataclass(frozen=True)
class EncodeResult:
    bitrate_kbps: float
    quality: float
    metric_name: str
    crf: int
    sharpening_level: float

    def __post_init__(self):
        if not (self.bitrate_kbps > 0):
            raise ValueError(f"bitrate must be positive, got {self.bitrate_kbps}")
        if not np.isfinite(self.quality):
            raise ValueError("quality must be finite")


# ---------------------------------------------------------------------------
# Native metrics (luma based)
# ---------------------------------------------------------------------------


def _luma_planes(v: Video) -> list[np.ndarray]:
    return [to_ycbcr(f).data[0] for f in v.frames]


def _check_comparable(a: Video, b: Video) -> None:
    if (a.width, a.height) != (b.width, b.height) or a.frame_count != b.frame_count:
        raise ValueError(
            f"videos differ: {a.width}x{a.height}x{a.frame_count} vs "
            f"{b.width}x{b.height}x{b.frame_count}"
        )


def psnr(a: Video, b: Video) -> float:
    """Mean per-frame luma PSNR in dB, capped at 99 dB."""
    _check_comparable(a, b)
    scores = []
    for ya, yb in zip(_luma_planes(a), _luma_planes(b)):
        mse = float(np.mean((ya - yb) ** 2))
        scores.append(PSNR_CAP_DB if mse == 0.0 else min(PSNR_CAP_DB, 10.0 * np.log10(1.0 / mse)))
    return float(np.mean(scores))


def _ssim_frame(x: np.ndarray, y: np.ndarray, k1: float = 0.01, k2: float = 0.03) -> float:
    win = 8
    if x.shape[0] < win or x.shape[1] < win:
        raise ValueError(f"frames must be at least {win}x{win} for SSIM")
    c1, c2 = k1 * k1, k2 * k2  # dynamic range is 1.0
    xs = np.lib.stride_tricks.sliding_window_view(x, (win, win))
    ys = np.lib.stride_tricks.sliding_window_view(y, (win, win))
    mx = xs.mean(axis=(-2, -1))
    my = ys.mean(axis=(-2, -1))
    vx = (xs * xs).mean(axis=(-2, -1)) - mx * mx
    vy = (ys * ys).mean(axis=(-2, -1)) - my * my
    cov = (xs * ys).mean(axis=(-2, -1)) - mx * my
    num = (2 * mx * my + c1) * (2 * cov + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(np.mean(num / den))


def ssim(a: Video, b: Video) -> float:
    """Mean per-frame luma SSIM over all 8x8 windows (K1=0.01, K2=0.03)."""
    _check_comparable(a, b)
    return float(np.mean([_ssim_frame(ya, yb) for ya, yb in zip(_luma_planes(a), _luma_planes(b))]))


# ---------------------------------------------------------------------------
# VMAF via external binary
# ---------------------------------------------------------------------------


def _write_y4m(v: Video, path: Path) -> None:
    # Real YUV4MPEG2 (C444, 8-bit), consumable by the actual vmaf tool.
    fps_num = int(round(v.frame_rate * 1000))
    header = f"YUV4MPEG2 W{v.width} H{v.height} F{fps_num}:1000 Ip A1:1 C444\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for frame in v.frames:
            fh.write(b"FRAME\n")
            fh.write(to_uint8(to_ycbcr(frame).data).tobytes())


def vmaf_adapter(
    a: Video,
    b: Video,
    binary_path: str,
    timeout: float = 600.0,
) -> float:
    """Pooled mean VMAF of distorted `b` against reference `a`.

    Raises AdapterUnavailableError when the binary is missing so callers
    can fall back to PSNR.
    """
    _check_comparable(a, b)
    if shutil.which(binary_path) is None and not Path(binary_path).is_file():
        raise AdapterUnavailableError(f"vmaf binary not found: {binary_path}")
    with tempfile.TemporaryDirectory(prefix="sharpopt-vmaf-") as td:
        ref = Path(td) / "ref.y4m"
        dist = Path(td) / "dist.y4m"
        out = Path(td) / "vmaf.json"
        _write_y4m(a, ref)
        _write_y4m(b, dist)
        cmd = [
            binary_path,
            "--reference", str(ref),
            "--distorted", str(dist),
            "--output", str(out),
            "--json",
        ]
        try:
            proc = subprocess.run(
                cmd, capture_output=True, text=True, timeout=timeout
            )
        except subprocess.TimeoutExpired as exc:
            raise AdapterError(f"vmaf timed out after {timeout}s", stderr=str(exc)) from exc
        except OSError as exc:
            raise AdapterUnavailableError(f"vmaf could not be executed: {exc}") from exc
        if proc.returncode != 0:
            raise AdapterError(
                f"vmaf exited with {proc.returncode}", stderr=proc.stderr
            )
        try:
            payload = json.loads(out.read_text())
            return float(payload["pooled_metrics"]["vmaf"]["mean"])
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raw = out.read_text() if out.exists() else proc.stdout
            raise AdapterError(
                f"could not parse vmaf output: {exc}", raw_output=raw
            ) from exc


# ---------------------------------------------------------------------------
# Synthetic encoder model (frozen formulas; see module docstring)
# ---------------------------------------------------------------------------


def synthetic_model(level: float, crf: int, complexity: float) -> tuple[float, float]:
    """Closed-form (bitrate_kbps, quality) for the synthetic encoder."""
    if not (0.0 <= level <= 4.0):
        raise ValueError(f"level must be in [0, 4], got {level}")
    if not (0 <= crf <= 51):
        raise ValueError(f"crf must be in [0, 51], got {crf}")
    if not (0.0 < complexity <= 1.0):
        raise ValueError(f"complexity must be in (0, 1], got {complexity}")
    bitrate = 1000.0 * complexity * 2.0 ** ((27.0 - crf) / 6.0) * (1.0 + 0.25 * level)
    g = 6.0 * complexity
    h = 2.0 * complexity + 1.0
    quality = 95.0 - 2.2 * (crf - 27.0) + g * level - h * level * level
    return bitrate, float(np.clip(quality, 0.0, 100.0))


def derive_complexity(v: Video) -> float:
    """Deterministic content complexity in (0, 1] from mean luma gradient."""
    grads = []
    for y in _luma_planes(v):
        gx = np.abs(np.diff(y, axis=1)).mean() if y.shape[1] > 1 else 0.0
        gy = np.abs(np.diff(y, axis=0)).mean() if y.shape[0] > 1 else 0.0
        grads.append(gx + gy)
    return float(np.clip(4.0 * np.mean(grads), 0.05, 1.0))


@dataclass(frozen=True)
class SyntheticEncoder:
    """Hermetic encoder: responds to (level, crf) through synthetic_model.

    complexity=None derives it from the video content at call time;
    tests and labeled sweeps normally pin an explicit value.

    quality_gain/quality_falloff override the complexity-derived g and h
    of the quality parabola. The default derivation couples them so
    tightly that sweeps always favor small levels; explicit overrides
    let callers construct scenarios (steep falloff, strong gain) the
    derivation cannot reach. The bitrate formula is never overridden.
    """

    complexity: float | None = None
    quality_gain: float | None = None
    quality_falloff: float | None = None
    kind: str = field(default="synthetic", init=False)
    metric_name: str = "synthetic"

    def with_complexity(self, c: float) -> "SyntheticEncoder":
        return replace(self, complexity=c)

    def encode_measure(
        self,
        v: Video,
        crf: int,
        *,
        sharpening_level: float = 0.0,
        source: Video | None = None,
    ) -> EncodeResult:
        c = self.complexity if self.complexity is not None else derive_complexity(v)
        bitrate, quality = synthetic_model(sharpening_level, crf, c)
        if self.quality_gain is not None or self.quality_falloff is not None:
            g = self.quality_gain if self.quality_gain is not None else 6.0 * c
            h = self.quality_falloff if self.quality_falloff is not None else 2.0 * c + 1.0
            lam = sharpening_level
            quality = float(
                np.clip(95.0 - 2.2 * (crf - 27.0) + g * lam - h * lam * lam, 0.0, 100.0)
            )
        return EncodeResult(
            bitrate_kbps=bitrate,
            quality=quality,
            metric_name=self.metric_name,
            crf=crf,
            sharpening_level=sharpening_level,
        )


# ---------------------------------------------------------------------------
# External encoder
# ---------------------------------------------------------------------------

_PLACEHOLDERS = ("{input}", "{output}", "{crf}")


@dataclass(frozen=True)
class ExternalEncoder:
    """Subprocess-backed encoder.

    command_template must reference {input}, {output} and {crf}. The
    produced {output} must load back through media.load_video (wrap the
    real encoder in a script that encodes and decodes in one step; see
    README). When the template also names {bitstream}, bitrate is
    measured from that file instead of {output}.

    quality_reference selects what decoded output is compared against:
    "sharpened" (the encoder input, default) or "source" (the
    pre-sharpening video, which callers must pass to encode_measure).
    """

    command_template: str
    metric_name: str = "psnr"
    vmaf_binary: str = "vmaf"
    quality_reference: str = "sharpened"
    timeout: float = 600.0
    kind: str = field(default="external-command", init=False)

    def __post_init__(self):
        missing = [p for p in _PLACEHOLDERS if p not in self.command_template]
        if missing:
            raise ConfigError(
                f"command template is missing placeholders: {', '.join(missing)}"
            )
        if self.quality_reference not in ("source", "sharpened"):
            raise ConfigError(
                f"quality_reference must be 'source' or 'sharpened', "
                f"got {self.quality_reference!r}"
            )
        if self.metric_name not in ("psnr", "ssim", "vmaf"):
            raise ConfigError(f"unknown metric {self.metric_name!r}")

    def _measure_quality(self, reference: Video, decoded: Video) -> float:
        if self.metric_name == "psnr":
            return psnr(reference, decoded)
        if self.metric_name == "ssim":
            return ssim(reference, decoded)
        return vmaf_adapter(reference, decoded, self.vmaf_binary, timeout=self.timeout)

    def encode_measure(
        self,
        v: Video,
        crf: int,
        *,
        sharpening_level: float = 0.0,
        source: Video | None = None,
    ) -> EncodeResult:
        if not (0 <= crf <= 51):
            raise ValueError(f"crf must be in [0, 51], got {crf}")
        if self.quality_reference == "source" and source is None:
            raise ValueError("quality_reference='source' needs the source video")
        with tempfile.TemporaryDirectory(prefix="sharpopt-enc-") as td:
            in_path = Path(td) / "input.raw"
            out_path = Path(td) / "output.raw"
            bs_path = Path(td) / "stream.bin"
            store_video(v, in_path, "raw")
            cmd = self.command_template.format(
                input=str(in_path),
                output=str(out_path),
                crf=crf,
                bitstream=str(bs_path),
            )
            try:
                proc = subprocess.run(
                    cmd,
                    shell=True,
                    capture_output=True,
                    text=True,
                    timeout=self.timeout,
                )
            except subprocess.TimeoutExpired as exc:
                raise AdapterError(
                    f"encoder timed out after {self.timeout}s", stderr=str(exc)
                ) from exc
            if proc.returncode != 0:
                raise AdapterError(
                    f"encoder exited with {proc.returncode}", stderr=proc.stderr
                )
            size_file = bs_path if "{bitstream}" in self.command_template else out_path
            if not size_file.exists():
                raise AdapterError(
                    f"encoder produced no output at {size_file}", stderr=proc.stderr
                )
            bits = size_file.stat().st_size * 8
            bitrate = bits / 1000.0 / v.duration_seconds
            try:
                decoded = load_video(
                    out_path, guess_format(out_path), colorspace=v.colorspace,
                    frame_rate=v.frame_rate,
                )
            except ValueError as exc:
                raise AdapterError(
                    f"could not load encoder output: {exc}", stderr=proc.stderr
                ) from exc
        reference = source if self.quality_reference == "source" else v
        quality = self._measure_quality(reference, decoded)
        return EncodeResult(
            bitrate_kbps=bitrate,
            quality=quality,
            metric_name=self.metric_name,
            crf=crf,
            sharpening_level=sharpening_level,
        )


EncoderAdapter = SyntheticEncoder | ExternalEncoder


def encode_measure(
    v: Video,
    crf: int,
    adapter: EncoderAdapter,
    *,
    sharpening_level: float = 0.0,
    source: Video | None = None,
) -> EncodeResult:
    """Encode one video at one CRF and measure (bitrate, quality)."""
    return adapter.encode_measure(
        v, crf, sharpening_level=sharpening_level, source=source
    )
