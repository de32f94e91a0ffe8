"""Rate-distortion curve fitting and Bjontegaard-Delta computation.

BD-Rate of a test curve against an anchor: fit a cubic to quality ->
log10(bitrate) for each curve by least squares, integrate both
analytically over the overlapping quality interval, and express the
average log-bitrate difference as a fractional bitrate change
(10**delta - 1; negative means the test needs fewer bits at equal
quality). BD-Quality swaps the axes and skips the exponentiation.

Fits are computed in a centered quality variable: the condition guard
on the normal equations then rejects near-duplicate qualities instead
of tripping on the magnitude of raw 0-100 scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FitError, NoOverlapError

MIN_POINTS = 4
CONDITION_LIMIT = 1e10


@dataclass(frozen=True)
class RdPoint:
    bitrate_kbps: float
    quality: float

    def __post_init__(self):
        if not (self.bitrate_kbps > 0):
            raise ValueError(f"bitrate must be positive, got {self.bitrate_kbps}")
        if not np.isfinite(self.quality):
            raise ValueError("quality must be finite")


@dataclass(frozen=True)
class RdCurve:
    """At least 4 (bitrate, quality) samples with distinct qualities.

    Points are stored sorted by quality; `level` tags the sharpening
    level the curve was measured at.
    """

    points: tuple[RdPoint, ...]
    level: float = 0.0

    def __post_init__(self):
        pts = tuple(sorted(self.points, key=lambda p: p.quality))
        if len(pts) < MIN_POINTS:
            raise ValueError(f"need at least {MIN_POINTS} RD points, got {len(pts)}")
        qualities = [p.quality for p in pts]
        for lo, hi in zip(qualities, qualities[1:]):
            if not (hi > lo):
                raise ValueError(f"duplicate quality value {hi} in RD curve")
        object.__setattr__(self, "points", pts)

    @property
    def qualities(self) -> np.ndarray:
        return np.array([p.quality for p in self.points])

    @property
    def bitrates(self) -> np.ndarray:
        return np.array([p.bitrate_kbps for p in self.points])

    @property
    def log_bitrates(self) -> np.ndarray:
        return np.log10(self.bitrates)


@dataclass(frozen=True)
class BdRateResult:
    """value is a fraction: -0.25 means 25% fewer bits at equal quality."""

    value: float
    overlap: tuple[float, float]
    anchor_level: float
    test_level: float

    def __post_init__(self):
        if not (self.value > -1.0):
            raise ValueError("BD-Rate fraction must exceed -1")
        if not (self.overlap[1] > self.overlap[0]):
            raise ValueError("overlap interval is degenerate")


@dataclass(frozen=True)
class _CubicFit:
    """Least-squares cubic in a centered variable u = x - center."""

    coeffs: tuple[float, float, float, float]  # ascending powers of u
    center: float

    def integrate(self, lo: float, hi: float) -> float:
        """Analytic integral of the fitted cubic over [lo, hi]."""
        anti = np.array([0.0] + [c / (k + 1) for k, c in enumerate(self.coeffs)])
        u_lo, u_hi = lo - self.center, hi - self.center
        return float(
            np.polynomial.polynomial.polyval(u_hi, anti)
            - np.polynomial.polynomial.polyval(u_lo, anti)
        )

    def __call__(self, x: np.ndarray | float) -> np.ndarray | float:
        return np.polynomial.polynomial.polyval(
            np.asarray(x) - self.center, np.array(self.coeffs)
        )


def _fit_cubic(x: np.ndarray, y: np.ndarray) -> _CubicFit:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < MIN_POINTS:
        raise ValueError(f"need at least {MIN_POINTS} points, got {x.size}")
    if np.unique(x).size != x.size:
        raise ValueError("duplicate abscissa values")
    center = (x.min() + x.max()) / 2.0
    u = x - center
    vand = np.vander(u, 4, increasing=True)
    normal = vand.T @ vand
    cond = np.linalg.cond(normal)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise FitError(
            f"cubic fit is ill-conditioned (condition number {cond:.3e})"
        )
    coeffs, *_ = np.linalg.lstsq(vand, y, rcond=None)
    return _CubicFit(tuple(coeffs), center)


def fit_log_poly(points: RdCurve | list[RdPoint]) -> np.ndarray:
    """Least-squares cubic of quality -> log10(bitrate).

    Returns coefficients in the quality variable, ascending powers
    [c0, c1, c2, c3]. Interpolates exactly when given 4 points.
    """
    curve = points if isinstance(points, RdCurve) else RdCurve(tuple(points))
    fit = _fit_cubic(curve.qualities, curve.log_bitrates)
    # Map u = q - center back to powers of q.
    shifted = [np.zeros(4) for _ in range(4)]
    base = np.array([1.0])
    for k in range(4):
        shifted[k][: base.size] = base
        base = np.polynomial.polynomial.polymul(base, [-fit.center, 1.0])
    out = np.zeros(4)
    for k, c in enumerate(fit.coeffs):
        out += c * shifted[k]
    return out


def _overlap(a: np.ndarray, b: np.ndarray, axis_name: str) -> tuple[float, float]:
    lo = max(a.min(), b.min())
    hi = min(a.max(), b.max())
    if not (hi > lo):
        raise NoOverlapError(
            f"curves share no {axis_name} interval ({lo:.6g} >= {hi:.6g})"
        )
    return float(lo), float(hi)


def bd_rate(anchor: RdCurve, test: RdCurve) -> BdRateResult:
    """Fractional bitrate change of `test` vs `anchor` at equal quality."""
    lo, hi = _overlap(anchor.qualities, test.qualities, "quality")
    fit_anchor = _fit_cubic(anchor.qualities, anchor.log_bitrates)
    fit_test = _fit_cubic(test.qualities, test.log_bitrates)
    delta = (fit_test.integrate(lo, hi) - fit_anchor.integrate(lo, hi)) / (hi - lo)
    return BdRateResult(
        value=float(10.0 ** delta - 1.0),
        overlap=(lo, hi),
        anchor_level=anchor.level,
        test_level=test.level,
    )


def bd_quality(anchor: RdCurve, test: RdCurve) -> float:
    """Average quality difference of `test` vs `anchor` at equal bitrate."""
    lo, hi = _overlap(anchor.log_bitrates, test.log_bitrates, "log-bitrate")
    fit_anchor = _fit_cubic(anchor.log_bitrates, anchor.qualities)
    fit_test = _fit_cubic(test.log_bitrates, test.qualities)
    return float(
        (fit_test.integrate(lo, hi) - fit_anchor.integrate(lo, hi)) / (hi - lo)
    )


# ---------------------------------------------------------------------------
# Minimal SVG rendering of RD curves (polylines, no dependencies)
# ---------------------------------------------------------------------------

_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def render_rd_svg(
    curves: list[RdCurve],
    width: int = 640,
    height: int = 480,
    title: str = "rate-distortion",
) -> str:
    """Quality vs log10(bitrate) as an SVG with one polyline per curve."""
    if not curves:
        raise ValueError("nothing to plot")
    pad = 48
    xs = np.concatenate([c.log_bitrates for c in curves])
    ys = np.concatenate([c.qualities for c in curves])
    x0, x1 = xs.min(), xs.max()
    y0, y1 = ys.min(), ys.max()
    x_span = (x1 - x0) or 1.0
    y_span = (y1 - y0) or 1.0

    def sx(x):
        return pad + (x - x0) / x_span * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y0) / y_span * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" '
        f'y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.0f}" y="{height - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">log10 bitrate (kbps)</text>',
        f'<text x="14" y="{height / 2:.0f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 14 {height / 2:.0f})">quality</text>',
    ]
    for i, curve in enumerate(curves):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(
            f"{sx(x):.2f},{sy(y):.2f}"
            for x, y in zip(curve.log_bitrates, curve.qualities)
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        for x, y in zip(curve.log_bitrates, curve.qualities):
            parts.append(
                f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}"/>'
            )
        parts.append(
            f'<text x="{width - pad + 4}" y="{pad + 16 * i}" font-family="sans-serif" '
            f'font-size="11" fill="{color}">level {curve.level:g}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
