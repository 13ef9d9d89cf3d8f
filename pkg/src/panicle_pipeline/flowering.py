"""Flowering-time estimation from multi-date panicle counts.

The count series across flight dates is summarized by a cubic least-squares
fit on centered time (u = day - mean(day), which keeps the 4x4 system well
conditioned for day values near 100).  The flowering day is where that curve
first rises through half of the ultimate count, the maximum observed count
across dates; the crossing is located by a 0.01-day sign scan followed by
bisection.  Extrapolation outside the observed date range is refused: a
curve that never reaches the half level is an explicit ``NoCrossing``
outcome, not a guess.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .datasets import CountSeries, DetectionSet
from .errors import AllZero, DegenerateDesign, InsufficientData, NoCrossing, ValidationError
from .evaluation import DEFAULT_COUNT_SCORE_FLOOR, count_detections

SCAN_STEP = 0.01
CURVE_SAMPLE_STEP = 0.1
CROSSING_TOLERANCE = 1e-6


@dataclass(frozen=True)
class CubicFit:
    """Least-squares cubic in centered time u = day - t_center.

    ``coefficients`` are (a0, a1, a2, a3) so the fitted count at day t is
    ``a0 + a1*u + a2*u**2 + a3*u**3`` with ``u = t - t_center``.
    """

    coefficients: tuple[float, float, float, float]
    t_center: float
    residual_rms: float

    def value_at(self, day: float) -> float:
        u = day - self.t_center
        a0, a1, a2, a3 = self.coefficients
        return ((a3 * u + a2) * u + a1) * u + a0

    def derivative_at(self, day: float) -> float:
        u = day - self.t_center
        _, a1, a2, a3 = self.coefficients
        return (3 * a3 * u + 2 * a2) * u + a1


@dataclass(frozen=True)
class FloweringEstimate:
    """The estimated flowering day and the quantities that determined it."""

    flowering_day: float
    ultimate_count: int
    half_level: float
    bracket: tuple[float, float]


def fit_cubic_points(days: Sequence[float], values: Sequence[float]) -> CubicFit:
    """Fit a cubic to raw (day, value) samples by linear least squares.

    The system is solved on centered time with numpy's least-squares driver
    (LAPACK orthogonal factorization), which leaves the residuals orthogonal
    to {1, u, u^2, u^3} to machine precision.
    """
    if len(days) != len(values):
        raise ValidationError("days and values must have the same length")
    if len(days) < 4:
        raise InsufficientData(f"cubic fit needs at least 4 observations, got {len(days)}")
    if len(set(days)) != len(days):
        raise DegenerateDesign("repeated days make the cubic fit singular")

    t = np.asarray(days, dtype=float)
    y = np.asarray(values, dtype=float)
    t_center = float(t.mean())
    u = t - t_center
    design = np.vander(u, 4, increasing=True)
    coefficients, *_ = np.linalg.lstsq(design, y, rcond=None)
    residuals = design @ coefficients - y
    residual_rms = float(np.sqrt(np.mean(residuals**2)))
    return CubicFit(
        coefficients=tuple(float(c) for c in coefficients),
        t_center=t_center,
        residual_rms=residual_rms,
    )


def fit_cubic(series: CountSeries) -> CubicFit:
    """Fit the panicle count curve for a multi-date series."""
    return fit_cubic_points(series.days, series.counts)


def flowering_time(series: CountSeries, fit: CubicFit) -> FloweringEstimate:
    """Locate the earliest rising crossing of the half-of-ultimate level.

    The ultimate count is the maximum observed count in the series (the
    fitted cubic eventually diverges, so its own maximum is unusable).  The
    crossing is searched only within [first_day, last_day]: a 0.01-day grid
    scan finds the first bracket where the curve rises through the half
    level, then bisection tightens it until the fitted count is within
    ``CROSSING_TOLERANCE`` panicles of the level.
    """
    if not series.observations:
        raise InsufficientData("empty count series")
    ultimate = max(series.counts)
    if ultimate == 0:
        raise AllZero("every observed count is zero; flowering is undefined")
    half = ultimate / 2.0

    first_day, last_day = series.days[0], series.days[-1]
    steps = math.floor((last_day - first_day) / SCAN_STEP + 1e-9)
    grid = [first_day + SCAN_STEP * i for i in range(steps + 1)]
    grid[-1] = float(last_day)

    residual_at = lambda t: fit.value_at(t) - half

    for i, t in enumerate(grid):
        f_here = residual_at(t)
        if f_here == 0.0 and fit.derivative_at(t) > 0.0:
            return FloweringEstimate(t, ultimate, half, (t, t))
        if i + 1 < len(grid) and f_here < 0.0 <= residual_at(grid[i + 1]):
            lo, hi = t, grid[i + 1]
            mid = (lo + hi) / 2.0
            for _ in range(200):
                mid = (lo + hi) / 2.0
                f_mid = residual_at(mid)
                if abs(f_mid) <= CROSSING_TOLERANCE:
                    break
                if f_mid < 0.0:
                    lo = mid
                else:
                    hi = mid
            return FloweringEstimate(mid, ultimate, half, (t, grid[i + 1]))

    peak = max(fit.value_at(t) for t in grid)
    raise NoCrossing(
        f"fitted curve never rises through {half:g} within days "
        f"[{first_day}, {last_day}] (curve max {peak:.3f})"
    )


def build_series(
    per_date_detections: Mapping[int, DetectionSet],
    score_floor: float = DEFAULT_COUNT_SCORE_FLOOR,
    min_area: float = 0.0,
) -> CountSeries:
    """Total filtered detection counts per flight date, in day order."""
    if not per_date_detections:
        raise ValidationError("need detections for at least one date")
    observations = []
    for day in sorted(per_date_detections):
        per_image = count_detections(per_date_detections[day], score_floor=score_floor, min_area=min_area)
        observations.append((day, sum(per_image.values())))
    return CountSeries(tuple(observations))


def series_from_detections(
    det: DetectionSet,
    score_floor: float = DEFAULT_COUNT_SCORE_FLOOR,
    min_area: float = 0.0,
) -> CountSeries:
    """Build a count series from one detection set spanning several dates.

    Every image record must carry ``days_after_planting``; images sharing a
    date are summed together.
    """
    by_day: dict[int, list[str]] = {}
    for record in det.images:
        if record.days_after_planting is None:
            raise ValidationError(f"image {record.image_id!r} has no days_after_planting")
        by_day.setdefault(record.days_after_planting, []).append(record.image_id)
    per_image = count_detections(det, score_floor=score_floor, min_area=min_area)
    observations = [
        (day, sum(per_image[i] for i in ids)) for day, ids in sorted(by_day.items())
    ]
    return CountSeries(tuple(observations))


def sample_curve(fit: CubicFit, first_day: float, last_day: float) -> list[tuple[float, float]]:
    """Fitted curve sampled at 0.1-day steps across [first_day, last_day]."""
    steps = math.floor((last_day - first_day) / CURVE_SAMPLE_STEP + 1e-9)
    return [
        (first_day + CURVE_SAMPLE_STEP * i, fit.value_at(first_day + CURVE_SAMPLE_STEP * i))
        for i in range(steps + 1)
    ]


def curve_csv(fit: CubicFit, series: CountSeries) -> str:
    """Companion CSV of the sampled fitted curve: ``day,fitted_count``."""
    lines = ["day,fitted_count"]
    for day, value in sample_curve(fit, series.days[0], series.days[-1]):
        lines.append(f"{day:.1f},{value:.6f}")
    return "\n".join(lines) + "\n"


def estimate_to_dict(estimate: FloweringEstimate, fit: CubicFit) -> dict:
    return {
        "flowering_day": estimate.flowering_day,
        "ultimate_count": estimate.ultimate_count,
        "half_level": estimate.half_level,
        "residual_rms": fit.residual_rms,
        "bracket": list(estimate.bracket),
        "coefficients": list(fit.coefficients),
        "t_center": fit.t_center,
    }


# ---------------------------------------------------------------------------
# SVG plot

_SVG_WIDTH, _SVG_HEIGHT = 640, 420
_MARGIN_LEFT, _MARGIN_RIGHT, _MARGIN_TOP, _MARGIN_BOTTOM = 60, 20, 20, 45


def curve_svg(series: CountSeries, fit: CubicFit, estimate: FloweringEstimate) -> str:
    """Plot of the count series, fitted curve, half level, and flowering day.

    Hand-rolled SVG so output bytes are fully deterministic for a given
    input, which keeps report directories diff- and cache-friendly.
    """
    first_day, last_day = series.days[0], series.days[-1]
    samples = sample_curve(fit, first_day, last_day)
    y_top = max(
        max(series.counts),
        max(v for _, v in samples),
    ) * 1.08 + 1e-9
    y_top = max(y_top, estimate.half_level * 1.08)

    plot_w = _SVG_WIDTH - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = _SVG_HEIGHT - _MARGIN_TOP - _MARGIN_BOTTOM

    def px(day: float) -> float:
        return _MARGIN_LEFT + (day - first_day) / (last_day - first_day) * plot_w

    def py(count: float) -> float:
        return _MARGIN_TOP + (1.0 - count / y_top) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_WIDTH}" height="{_SVG_HEIGHT}" '
        f'viewBox="0 0 {_SVG_WIDTH} {_SVG_HEIGHT}">',
        f'<rect width="{_SVG_WIDTH}" height="{_SVG_HEIGHT}" fill="white"/>',
        f'<line x1="{_MARGIN_LEFT}" y1="{py(0):.2f}" x2="{_SVG_WIDTH - _MARGIN_RIGHT}" '
        f'y2="{py(0):.2f}" stroke="black"/>',
        f'<line x1="{_MARGIN_LEFT}" y1="{_MARGIN_TOP}" x2="{_MARGIN_LEFT}" '
        f'y2="{py(0):.2f}" stroke="black"/>',
    ]

    for day in series.days:
        x = px(day)
        parts.append(f'<line x1="{x:.2f}" y1="{py(0):.2f}" x2="{x:.2f}" y2="{py(0) + 4:.2f}" stroke="black"/>')
        parts.append(
            f'<text x="{x:.2f}" y="{py(0) + 18:.2f}" font-size="11" text-anchor="middle">{day}</text>'
        )
    for level in (0, estimate.half_level, estimate.ultimate_count):
        parts.append(
            f'<text x="{_MARGIN_LEFT - 6}" y="{py(level) + 4:.2f}" font-size="11" '
            f'text-anchor="end">{level:g}</text>'
        )
    parts.append(
        f'<text x="{_MARGIN_LEFT + plot_w / 2:.2f}" y="{_SVG_HEIGHT - 8}" font-size="12" '
        f'text-anchor="middle">days after planting</text>'
    )

    curve_points = " ".join(f"{px(d):.2f},{py(v):.2f}" for d, v in samples)
    parts.append(f'<polyline points="{curve_points}" fill="none" stroke="#1f77b4" stroke-width="2"/>')

    half_y = py(estimate.half_level)
    parts.append(
        f'<line x1="{_MARGIN_LEFT}" y1="{half_y:.2f}" x2="{_SVG_WIDTH - _MARGIN_RIGHT}" '
        f'y2="{half_y:.2f}" stroke="#7f7f7f" stroke-dasharray="6 4"/>'
    )
    parts.append(
        f'<text x="{_SVG_WIDTH - _MARGIN_RIGHT - 4}" y="{half_y - 6:.2f}" font-size="11" '
        f'text-anchor="end" fill="#7f7f7f">half of ultimate = {estimate.half_level:g}</text>'
    )

    flowering_x = px(estimate.flowering_day)
    parts.append(
        f'<line x1="{flowering_x:.2f}" y1="{_MARGIN_TOP}" x2="{flowering_x:.2f}" '
        f'y2="{py(0):.2f}" stroke="#d62728" stroke-dasharray="4 3"/>'
    )
    parts.append(
        f'<text x="{flowering_x + 5:.2f}" y="{_MARGIN_TOP + 14}" font-size="11" '
        f'fill="#d62728">flowering day {estimate.flowering_day:.2f}</text>'
    )

    for day, count in series.observations:
        parts.append(f'<circle cx="{px(day):.2f}" cy="{py(count):.2f}" r="4" fill="#ff7f0e"/>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
