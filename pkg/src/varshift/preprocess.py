"""Series conditioning before variance-shift detection.

Detrending (LOWESS), AR(1) prewhitening, first differences, monthly anomaly
normalization, stepwise-mean removal and running standard deviations.

Every function accepts a plain sequence or a :class:`TimeSeries`. Plain input
gives an ``ndarray`` back; a ``TimeSeries`` gives a ``TimeSeries`` whose labels
follow the values (leading labels are dropped when the output is shorter).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateSampleError, InputError, ParameterError

_YEAR = re.compile(r"^\s*(-?\d{1,4})\s*$")
_YEAR_MONTH = re.compile(r"^\s*(-?\d{1,4})-(\d{1,2})\s*$")

MONTH_NAMES = ("January", "February", "March", "April", "May", "June", "July",
               "August", "September", "October", "November", "December")


def parse_time_label(text: str) -> tuple[int, int | None]:
    """Parse ``YYYY`` or ``YYYY-MM`` into ``(year, month)``; month is None for annual labels."""
    m = _YEAR_MONTH.match(text)
    if m:
        month = int(m.group(2))
        if not 1 <= month <= 12:
            raise InputError(f"month out of range in time label {text!r}")
        return int(m.group(1)), month
    m = _YEAR.match(text)
    if m:
        return int(m.group(1)), None
    raise InputError(f"unrecognized time label {text!r} (expected YYYY or YYYY-MM)")


def _ordinal(label: tuple[int, int | None]) -> int:
    year, month = label
    return year if month is None else year * 12 + month - 1


@dataclass(frozen=True)
class TimeSeries:
    """Observations with optional time labels (``YYYY`` or ``YYYY-MM``) and period."""

    values: np.ndarray
    labels: tuple[str, ...] | None = None
    period: int | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise InputError("time series values must be one-dimensional")
        object.__setattr__(self, "values", v)
        if self.labels is not None:
            labels = tuple(str(s).strip() for s in self.labels)
            if len(labels) != v.size:
                raise InputError(f"{len(labels)} labels for {v.size} values")
            parsed = [parse_time_label(s) for s in labels]
            kinds = {p[1] is None for p in parsed}
            if len(kinds) > 1:
                raise InputError("time labels mix annual and monthly formats")
            ords = [_ordinal(p) for p in parsed]
            for i in range(1, len(ords)):
                if ords[i] <= ords[i - 1]:
                    raise InputError(f"time labels not strictly increasing at position {i + 1} ({labels[i]!r})")
            object.__setattr__(self, "labels", labels)
            monthly = parsed and parsed[0][1] is not None
            if self.period is None and monthly:
                object.__setattr__(self, "period", 12)
            elif monthly and self.period != 12:
                raise InputError(f"monthly labels imply period 12, got period {self.period}")
        if self.period is not None and self.period < 1:
            raise InputError(f"period must be positive, got {self.period}")

    def __len__(self) -> int:
        return self.values.size

    @property
    def first_month(self) -> int:
        """Calendar month (1-12) of the first observation; 1 when unlabeled."""
        if self.labels:
            month = parse_time_label(self.labels[0])[1]
            if month is not None:
                return month
        return 1

    def label(self, index: int) -> str:
        """Label for a 0-based position, or the 1-based position as text."""
        if self.labels is not None:
            return self.labels[index]
        return str(index + 1)

    def replace_values(self, values: Sequence[float], drop_leading: int = 0) -> "TimeSeries":
        labels = self.labels[drop_leading:] if self.labels is not None else None
        return TimeSeries(np.asarray(values, dtype=float), labels, self.period)


def _unwrap(series) -> tuple[np.ndarray, TimeSeries | None]:
    if isinstance(series, TimeSeries):
        return series.values, series
    return np.asarray(series, dtype=float), None


def _wrap(values: np.ndarray, source: TimeSeries | None, drop_leading: int = 0):
    if source is None:
        return values
    return source.replace_values(values, drop_leading)


@dataclass(frozen=True)
class StepwiseMean:
    """Piecewise-constant mean: ``change_points`` are 0-based first indices of new segments."""

    change_points: tuple[int, ...]
    means: tuple[float, ...]

    def __post_init__(self):
        cps = tuple(int(c) for c in self.change_points)
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise ParameterError("stepwise-mean change points must be strictly increasing")
        if len(self.means) != len(cps) + 1:
            raise ParameterError(f"{len(cps)} change points need {len(cps) + 1} segment means, got {len(self.means)}")
        object.__setattr__(self, "change_points", cps)
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))

    @classmethod
    def fit(cls, series, change_points: Sequence[int]) -> "StepwiseMean":
        x, _ = _unwrap(series)
        bounds = _segment_bounds(x.size, change_points)
        return cls(tuple(change_points), tuple(float(x[a:b].mean()) for a, b in bounds))

    def evaluate(self, n: int) -> np.ndarray:
        out = np.empty(n)
        for (a, b), m in zip(_segment_bounds(n, self.change_points), self.means):
            out[a:b] = m
        return out


def _segment_bounds(n: int, change_points: Sequence[int]) -> list[tuple[int, int]]:
    edges = [0] + [int(c) for c in change_points] + [n]
    bounds = list(zip(edges[:-1], edges[1:]))
    for j, (a, b) in enumerate(bounds):
        if b <= a:
            raise ParameterError(f"segment {j + 1} is empty (change points {list(change_points)}, n={n})")
    return bounds


def _tricube(u: np.ndarray) -> np.ndarray:
    u = np.clip(np.abs(u), 0.0, 1.0)
    return (1.0 - u**3) ** 3


def _local_linear(t: np.ndarray, y: np.ndarray, w: np.ndarray, t0: float) -> float:
    sw = w.sum()
    if not sw > 0:
        raise DegenerateSampleError(f"no positive weights in the neighborhood of t={t0}")
    tm = (w * t).sum() / sw
    ym = (w * y).sum() / sw
    dt = t - tm
    sxx = (w * dt * dt).sum()
    # Guard against a single effective support point; fall back to a local mean.
    if sxx <= 1e-12 * max(1.0, (w * t * t).sum()):
        return float(ym)
    slope = (w * dt * (y - ym)).sum() / sxx
    return float(ym + slope * (t0 - tm))


def lowess_detrend(series, fraction: float = 0.1, iterations: int = 0, times: Sequence[float] | None = None):
    """Local-linear LOWESS trend with tricube weights. Returns ``(trend, residuals)``.

    Each point is fitted from its ``ceil(fraction*n)`` nearest neighbors in
    time (positions ``0..n-1`` unless ``times`` is given). ``iterations``
    robustness passes (0-5) reweight by the bisquare of residuals over six
    median absolute residuals.
    """
    x, src = _unwrap(series)
    n = x.size
    if not 0.0 < fraction <= 1.0:
        raise ParameterError(f"smoothing fraction must lie in (0, 1], got {fraction}")
    if not 0 <= iterations <= 5:
        raise ParameterError(f"robustness iterations must be in 0..5, got {iterations}")
    q = math.ceil(fraction * n)
    if n < 4 or fraction * n < 2:
        raise ParameterError(f"LOWESS window too small: n={n}, fraction={fraction} gives {q} neighbors")
    t = np.arange(n, dtype=float) if times is None else np.asarray(times, dtype=float)
    if t.shape != x.shape:
        raise ParameterError("times and values must have the same length")
    robust = np.ones(n)
    trend = np.empty(n)
    for it in range(iterations + 1):
        for i in range(n):
            d = np.abs(t - t[i])
            h = np.partition(d, q - 1)[q - 1]
            w = _tricube(d / h) if h > 0 else (d == 0).astype(float)
            trend[i] = _local_linear(t, x, w * robust, t[i])
        if it == iterations:
            break
        res = x - trend
        s = np.median(np.abs(res))
        if s == 0:
            break
        u = np.clip(res / (6.0 * s), -1.0, 1.0)
        robust = (1.0 - u * u) ** 2
    resid = x - trend
    return _wrap(trend, src), _wrap(resid, src)


def ar1_coefficient(series) -> float:
    """Lag-1 OLS coefficient of ``x[i]`` on ``x[i-1]``, each side centered on its own mean."""
    x, _ = _unwrap(series)
    if x.size < 3:
        raise ParameterError(f"AR(1) estimation needs at least 3 observations, got {x.size}")
    prev = x[:-1] - x[:-1].mean()
    curr = x[1:] - x[1:].mean()
    sxx = float(np.dot(prev, prev))
    if not sxx > 0:
        raise DegenerateSampleError("lagged series has zero variance; AR(1) coefficient undefined")
    return float(np.dot(prev, curr) / sxx)


def prewhiten(series, phi: float):
    """``e[i] = x[i] - phi*x[i-1]``; one observation shorter than the input."""
    x, src = _unwrap(series)
    if x.size < 2:
        raise ParameterError("prewhitening needs at least 2 observations")
    return _wrap(x[1:] - phi * x[:-1], src, drop_leading=1)


def first_differences(series):
    """``d[i] = x[i+1] - x[i]``; labelled by the later observation."""
    x, src = _unwrap(series)
    if x.size < 2:
        raise ParameterError("differencing needs at least 2 observations")
    return _wrap(np.diff(x), src, drop_leading=1)


def monthly_anomalies(series, first_month: int | None = None):
    """Subtract each calendar month's mean and divide by its sample (n-1) standard deviation."""
    x, src = _unwrap(series)
    if src is not None and src.period not in (None, 12):
        raise ParameterError(f"monthly anomalies need period 12, got {src.period}")
    if first_month is None:
        first_month = src.first_month if src is not None else 1
    if not 1 <= first_month <= 12:
        raise ParameterError(f"first_month must be 1..12, got {first_month}")
    if x.size < 24:
        raise ParameterError(f"monthly anomalies need at least two complete years, got {x.size} values")
    months = (np.arange(x.size) + first_month - 1) % 12
    out = np.empty_like(x)
    for m in range(12):
        sel = months == m
        vals = x[sel]
        sd = float(np.std(vals, ddof=1))
        if not sd > 0:
            raise DegenerateSampleError(f"{MONTH_NAMES[m]} has zero variance; cannot normalize")
        out[sel] = (vals - vals.mean()) / sd
    return _wrap(out, src)


def remove_stepwise_mean(series, steps: StepwiseMean | Sequence[int]):
    """Residuals about a piecewise-constant mean.

    ``steps`` is either a :class:`StepwiseMean` (its means are used as given)
    or 0-based change point indices (segment means are fitted).
    """
    x, src = _unwrap(series)
    if not isinstance(steps, StepwiseMean):
        steps = StepwiseMean.fit(x, steps)
    return _wrap(x - steps.evaluate(x.size), src)


def running_std(series, window: int):
    """Centered running sample standard deviation; NaN where the window overhangs the ends."""
    x, src = _unwrap(series)
    if int(window) != window or window < 2 or window % 2 == 0:
        raise ParameterError(f"window must be an odd integer >= 3, got {window}")
    if window > x.size:
        raise ParameterError(f"window {window} exceeds series length {x.size}")
    half = window // 2
    out = np.full(x.size, np.nan)
    view = np.lib.stride_tricks.sliding_window_view(x, window)
    out[half : x.size - half] = view.std(axis=1, ddof=1)
    return _wrap(out, src)
