"""Pseudo-labeling pipeline: sweep sharpening levels x CRFs, build RD
curves, and assign each video the sharpening level with the lowest
BD-Rate against the unsharpened anchor.

The anchor (level 0.0) contributes an implicit BD-Rate of 0.0, so a
video that no sharpening level improves is labeled 0.0. Ties within
1e-12 resolve toward the lower level.
"""

from __future__ import annotations

import json
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from filelock import FileLock

from .codec import EncodeResult, EncoderAdapter, SyntheticEncoder, encode_measure
from .errors import AdapterUnavailableError, LabelError
from .media import Video, guess_format, load_video
from .rdcurve import BdRateResult, RdCurve, RdPoint, bd_rate
from .sharpen import UsmParams, usm_video

SCHEMA_VERSION = 1
TIE_EPS = 1e-12

DEFAULT_LEVELS = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
DEFAULT_CRFS = (21, 24, 27, 30, 33)


@dataclass(frozen=True)
class SweepConfig:
    levels: tuple[float, ...] = DEFAULT_LEVELS
    crfs: tuple[int, ...] = DEFAULT_CRFS
    encoder: EncoderAdapter = field(default_factory=SyntheticEncoder)
    metric: str = "synthetic"
    jobs: int = 4
    frames_per_video: int = 32

    def __post_init__(self):
        levels = tuple(float(v) for v in self.levels)
        if 0.0 not in levels:
            raise ValueError("sweep levels must include the 0.0 anchor")
        if list(levels) != sorted(set(levels)):
            raise ValueError("sweep levels must be sorted and unique")
        if len(set(self.crfs)) < 4:
            raise ValueError("need at least 4 distinct CRFs for the cubic fit")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if self.frames_per_video < 1:
            raise ValueError("frames_per_video must be >= 1")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "crfs", tuple(int(c) for c in self.crfs))


@dataclass(frozen=True)
class LabelRecord:
    video_id: str
    label: float
    metric_name: str
    bd_rates: tuple[BdRateResult, ...]
    points: tuple[EncodeResult, ...]

    def to_json_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "id": self.video_id,
            "label": self.label,
            "metric": self.metric_name,
            "bd_rates": [
                {
                    "level": b.test_level,
                    "value": b.value,
                    "overlap": [b.overlap[0], b.overlap[1]],
                }
                for b in self.bd_rates
            ],
            "points": [
                {
                    "level": p.sharpening_level,
                    "crf": p.crf,
                    "bitrate_kbps": p.bitrate_kbps,
                    "quality": p.quality,
                }
                for p in self.points
            ],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "LabelRecord":
        if d.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported label record schema: {d.get('schema')}")
        return cls(
            video_id=d["id"],
            label=float(d["label"]),
            metric_name=d.get("metric", ""),
            bd_rates=tuple(
                BdRateResult(
                    value=b["value"],
                    overlap=(b["overlap"][0], b["overlap"][1]),
                    anchor_level=0.0,
                    test_level=b["level"],
                )
                for b in d.get("bd_rates", [])
            ),
            points=tuple(
                EncodeResult(
                    bitrate_kbps=p["bitrate_kbps"],
                    quality=p["quality"],
                    metric_name=d.get("metric", ""),
                    crf=p["crf"],
                    sharpening_level=p["level"],
                )
                for p in d.get("points", [])
            ),
        )


def sample_frames(v: Video, n: int) -> Video:
    """Up to n frames, uniformly spaced over the video."""
    if v.frame_count <= n:
        return v
    idx = np.round(np.linspace(0, v.frame_count - 1, n)).astype(int)
    return Video(tuple(v.frames[i] for i in idx), frame_rate=v.frame_rate)


def choose_label(bd_values: dict[float, float]) -> float:
    """Argmin BD-Rate over levels, anchor's 0.0 included; ties (within
    1e-12) go to the lower level."""
    best_level = 0.0
    best_value = 0.0
    for level in sorted(bd_values):
        if bd_values[level] < best_value - TIE_EPS:
            best_level, best_value = level, bd_values[level]
    return best_level


def _run_sweep(
    source: Video,
    cfg: SweepConfig,
    encoder: EncoderAdapter,
    pool: Executor,
) -> list[EncodeResult]:
    futures = {}
    for level in cfg.levels:
        sharpened = source if level == 0.0 else usm_video(source, UsmParams(amount=level))
        for crf in cfg.crfs:
            futures[(level, crf)] = pool.submit(
                encode_measure,
                sharpened,
                crf,
                encoder,
                sharpening_level=level,
                source=source,
            )
    results: list[EncodeResult] = []
    error = None
    for key in sorted(futures):
        try:
            results.append(futures[key].result())
        except Exception as exc:  # noqa: BLE001 - partial payload wants every failure
            if error is None:
                error = exc
    if error is not None:
        if isinstance(error, AdapterUnavailableError):
            raise error
        raise LabelError(
            f"encode failed at level/crf sweep: {error}", partial=results
        ) from error
    return results


def label_video(
    v: Video,
    cfg: SweepConfig,
    video_id: str = "",
    complexity: float | None = None,
    _pool: Executor | None = None,
) -> LabelRecord:
    """Run the full sweep for one video and pick its pseudo-label.

    `complexity` pins the synthetic encoder's complexity for this video
    (ignored for external encoders). A vmaf-metric encoder whose binary
    is unavailable falls back to PSNR for the whole video.
    """
    encoder = cfg.encoder
    if complexity is not None and isinstance(encoder, SyntheticEncoder):
        encoder = encoder.with_complexity(complexity)

    source = sample_frames(v, cfg.frames_per_video)

    own_pool = None
    pool = _pool
    if pool is None:
        own_pool = ThreadPoolExecutor(max_workers=cfg.jobs)
        pool = own_pool
    try:
        try:
            results = _run_sweep(source, cfg, encoder, pool)
        except AdapterUnavailableError:
            if getattr(encoder, "metric_name", "") != "vmaf":
                raise
            encoder = replace(encoder, metric_name="psnr")
            results = _run_sweep(source, cfg, encoder, pool)
    finally:
        if own_pool is not None:
            own_pool.shutdown(wait=False)

    by_level: dict[float, list[EncodeResult]] = {}
    for r in results:
        by_level.setdefault(r.sharpening_level, []).append(r)

    try:
        curves = {
            level: RdCurve(
                tuple(RdPoint(r.bitrate_kbps, r.quality) for r in pts), level=level
            )
            for level, pts in by_level.items()
        }
        anchor = curves[0.0]
        bd_results = tuple(
            bd_rate(anchor, curves[level]) for level in cfg.levels if level != 0.0
        )
    except Exception as exc:
        raise LabelError(f"could not build RD curves: {exc}", partial=results) from exc

    bd_values = {b.test_level: b.value for b in bd_results}
    chosen = choose_label(bd_values)
    return LabelRecord(
        video_id=video_id,
        label=chosen,
        metric_name=getattr(encoder, "metric_name", cfg.metric),
        bd_rates=bd_results,
        points=tuple(sorted(results, key=lambda r: (r.sharpening_level, r.crf))),
    )


# ---------------------------------------------------------------------------
# Corpus labeling: JSONL in, JSONL out, resumable.
# ---------------------------------------------------------------------------


def _record_line(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True) + "\n"


def read_manifest(path: str | Path) -> list[dict]:
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            if "id" not in entry or "path" not in entry:
                raise ValueError(f"{path}:{lineno}: entry needs 'id' and 'path'")
            entries.append(entry)
    return entries


def _labeled_ids(out_path: Path) -> set:
    if not out_path.exists():
        return set()
    done = set()
    with open(out_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "error" not in rec:
                done.add(rec["id"])
    return done


def label_corpus(
    manifest_path: str | Path,
    cfg: SweepConfig,
    out_path: str | Path,
) -> Path:
    """Label every manifest entry, appending one JSONL record per video.

    Videos already present in the output are skipped, so interrupted
    runs resume where they stopped. Per-video failures become inline
    error records and do not abort the corpus. Output appends are
    serialized through an exclusive file lock.
    """
    out_path = Path(out_path)
    entries = read_manifest(manifest_path)
    done = _labeled_ids(out_path)
    lock = FileLock(str(out_path) + ".lock")

    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        for entry in entries:
            vid = entry["id"]
            if vid in done:
                continue
            try:
                video = load_video(
                    entry["path"],
                    guess_format(entry["path"]),
                    frame_rate=float(entry.get("frame_rate", 30.0)),
                )
                record = label_video(
                    video,
                    cfg,
                    video_id=vid,
                    complexity=entry.get("complexity"),
                    _pool=pool,
                )
                payload = record.to_json_dict()
            except (LabelError, ValueError, OSError) as exc:
                payload = {"schema": SCHEMA_VERSION, "id": vid, "error": str(exc)}
            with lock:
                with open(out_path, "a", encoding="utf-8") as fh:
                    fh.write(_record_line(payload))
            done.add(vid)
    if not out_path.exists():
        out_path.touch()
    return out_path


def read_labels(path: str | Path) -> list[LabelRecord]:
    """Parse successful records from a label manifest."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            if "error" in d:
                continue
            records.append(LabelRecord.from_json_dict(d))
    return records
