"""Sequential regime shift detector (SRSD) for changes in variance.

Observations are screened one at a time against an F-test band around the
current regime variance. A value outside the band opens a candidate shift,
which is confirmed only if the residual sum of squares index (RSSI) keeps its
sign over ``l`` consecutive points. Regime variances are Huber-weighted so
isolated outliers neither inflate a regime nor trigger spurious shifts.

All indices are 0-based positions in the input; a change point is the first
observation of the new regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateSampleError, DetectorStateError, InputError, ParameterError
from .kernels import f_quantile, two_pass_robust_variance, variance_ratio_pvalue


class Direction(str, Enum):
    UP = "up"
    DOWN = "down"


class EventKind(str, Enum):
    NONE = "none"
    PENDING_OPENED = "pending_opened"
    PENDING_DISSOLVED = "pending_dissolved"
    SHIFT_CONFIRMED = "shift_confirmed"


@lru_cache(maxsize=256)
def _critical_f(p: float, cutoff: int) -> float:
    return f_quantile(p / 2.0, cutoff - 1, cutoff - 1)


@dataclass(frozen=True)
class DetectorConfig:
    """SRSD tuning: target probability ``p``, cut-off length ``l``, Huber constant ``h``."""

    p: float = 0.1
    l: int = 30
    h: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ParameterError(f"p must lie in (0, 1), got {self.p}")
        if int(self.l) != self.l or self.l < 4:
            raise ParameterError(f"cut-off length l must be an integer >= 4, got {self.l}")
        if not self.h > 0:
            raise ParameterError(f"Huber constant h must be positive, got {self.h}")

    @property
    def f_critical(self) -> float:
        """Two-tailed critical ratio ``F(p/2, l-1, l-1)``."""
        return _critical_f(float(self.p), int(self.l))


def critical_variances(regime_variance: float, f_cr: float) -> tuple[float, float]:
    """Lower and upper critical variances around a regime variance."""
    if not (regime_variance > 0 and f_cr > 0):
        raise ParameterError("regime variance and F_cr must both be positive")
    return regime_variance / f_cr, regime_variance * f_cr


def incremental_variance(variance: float, weight_sum: float, x: float, weight: float) -> tuple[float, float]:
    """Fold one weighted observation into a running about-zero variance.

    ``weight_sum`` is the running sum of squared weights. Returns the updated
    ``(variance, weight_sum)``.
    """
    w2 = weight * weight
    new_sum = weight_sum + w2
    return (weight_sum * variance + w2 * x * x) / new_sum, new_sum


@dataclass
class RegimeState:
    start_index: int
    variance: float
    weight_sum: float
    f_critical: float

    @property
    def critical_pair(self) -> tuple[float, float]:
        return self.variance / self.f_critical, self.variance * self.f_critical


@dataclass
class PendingShift:
    """A candidate change point under the RSSI test."""

    candidate_index: int
    direction: Direction
    critical: float
    scale: float
    cutoff: int
    rssi_sum: float = 0.0
    trace: list[float] = field(default_factory=list)

    @property
    def points_seen(self) -> int:
        return len(self.trace)

    @property
    def rssi_partial(self) -> float:
        return self.rssi_sum / self.cutoff

    def extend(self, x: float, h: float) -> float:
        """Add one observation to the RSSI and return the new partial value."""
        ax = abs(x)
        w = 1.0 if ax == 0.0 else min(1.0, h * self.scale / ax)
        wx = w * x
        self.rssi_sum += wx * wx - self.critical
        value = self.rssi_sum / self.cutoff
        self.trace.append(value)
        return value

    @property
    def sign_held(self) -> bool:
        if self.direction is Direction.UP:
            return self.rssi_sum > 0.0
        return self.rssi_sum < 0.0

    @property
    def complete(self) -> bool:
        return self.points_seen >= self.cutoff


@dataclass(frozen=True)
class ChangePoint:
    index: int
    direction: Direction
    observed_p: float = math.nan
    rssi_trace: tuple[float, ...] = ()


@dataclass(frozen=True)
class Event:
    kind: EventKind
    index: int
    change_point: ChangePoint | None = None


@dataclass(frozen=True)
class Regime:
    """A constant-variance interval ``[start, end]`` (inclusive)."""

    start: int
    end: int
    variance: float
    weighted_variance: float

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class DetectionResult:
    n: int
    config: DetectorConfig
    regimes: tuple[Regime, ...]
    change_points: tuple[ChangePoint, ...]
    pending: PendingShift | None
    # F-test p-value of the points from the pending candidate onward against
    # the regime before it; NaN when nothing is pending
    pending_p: float = math.nan

    @property
    def indices(self) -> list[int]:
        return [cp.index for cp in self.change_points]


def initialize(prefix: Sequence[float], config: DetectorConfig, start_index: int = 0) -> RegimeState:
    """Seed a regime from its first ``l`` observations."""
    x = np.asarray(prefix, dtype=float)
    if x.size < config.l:
        raise InputError(f"need at least l={config.l} observations to seed a regime, got {x.size}")
    var, w = two_pass_robust_variance(x[: config.l], config.h)
    if not var > 0:
        raise DegenerateSampleError(
            f"regime seeded at index {start_index} has zero variance; rescale or clean the input"
        )
    return RegimeState(start_index, var, float(np.sum(w * w)), config.f_critical)


class SRSDMonitor:
    """Streaming SRSD state machine.

    Feed observations with :meth:`update`; each call returns the events it
    caused. The first regime is seeded from the first ``l`` observations and
    screening starts at the second one. After a confirmed shift at ``c`` the new
    regime is seeded from ``c .. c+l-1`` and screening resumes at ``c+1``. A
    dissolved candidate joins the current regime and screening resumes right
    after it, so every observation is screened against the regime it ends in.
    """

    def __init__(self, config: DetectorConfig):
        self.config = config
        self.values: list[float] = []
        self.regime: RegimeState | None = None
        self.pending: PendingShift | None = None
        self.change_points: list[ChangePoint] = []
        self._closed_weighted: list[float] = []
        self._cursor = 0
        self._counted = -1

    @property
    def initialized(self) -> bool:
        return self.regime is not None

    def update(self, x: float) -> list[Event]:
        """Consume one observation (the monitoring step)."""
        x = float(x)
        if not math.isfinite(x):
            raise InputError(f"non-finite observation at index {len(self.values)}")
        self.values.append(x)
        return self._advance()

    monitor_step = update

    def extend(self, xs: Iterable[float]) -> list[Event]:
        new = [float(v) for v in xs]
        for j, v in enumerate(new):
            if not math.isfinite(v):
                raise InputError(f"non-finite observation at index {len(self.values) + j}")
        self.values.extend(new)
        return self._advance()

    def ingest(self, x: float) -> ChangePoint | None:
        """Consume one observation on an initialized detector.

        Returns the change point confirmed by this observation, if any.
        """
        if self.regime is None:
            raise DetectorStateError("detector is not initialized; feed at least l observations first")
        confirmed = None
        for ev in self.update(x):
            if ev.kind is EventKind.SHIFT_CONFIRMED:
                confirmed = ev.change_point
        return confirmed

    def _seed(self, start: int) -> None:
        l = self.config.l
        self.regime = initialize(self.values[start : start + l], self.config, start)
        self._counted = start + l - 1
        self._cursor = start + 1

    def _accept(self, i: int) -> None:
        # Points inside the seeding window already contribute to the estimate.
        if i <= self._counted:
            return
        reg = self.regime
        x = self.values[i]
        ax = abs(x)
        w = 1.0 if ax == 0.0 else min(1.0, self.config.h * math.sqrt(reg.variance) / ax)
        reg.variance, reg.weight_sum = incremental_variance(reg.variance, reg.weight_sum, x, w)
        self._counted = i

    def _advance(self) -> list[Event]:
        events: list[Event] = []
        cfg = self.config
        vals = self.values
        n = len(vals)
        if self.regime is None:
            if n < cfg.l:
                return events
            self._seed(0)
        h = cfg.h
        while True:
            pend = self.pending
            if pend is not None:
                k = pend.candidate_index + pend.points_seen
                if k >= n:
                    break
                pend.extend(vals[k], h)
                if not pend.sign_held:
                    c = pend.candidate_index
                    self.pending = None
                    self._accept(c)
                    self._cursor = c + 1
                    events.append(Event(EventKind.PENDING_DISSOLVED, c))
                elif pend.complete:
                    c = pend.candidate_index
                    cp = ChangePoint(c, pend.direction, rssi_trace=tuple(pend.trace))
                    self.change_points.append(cp)
                    self._closed_weighted.append(self.regime.variance)
                    self.pending = None
                    self._seed(c)
                    events.append(Event(EventKind.SHIFT_CONFIRMED, c, cp))
                continue

            i = self._cursor
            if i >= n:
                break
            reg = self.regime
            lo, hi = reg.critical_pair
            x = vals[i]
            q = x * x
            if lo <= q <= hi:
                self._accept(i)
                self._cursor = i + 1
                continue
            if q > hi:
                self.pending = PendingShift(i, Direction.UP, hi, math.sqrt(hi), cfg.l)
            else:
                self.pending = PendingShift(i, Direction.DOWN, lo, math.sqrt(lo), cfg.l)
            events.append(Event(EventKind.PENDING_OPENED, i))
        return events

    def result(self) -> DetectionResult:
        """Snapshot of confirmed regimes, change points and any trailing candidate."""
        n = len(self.values)
        x = np.asarray(self.values, dtype=float)
        starts = [0] + [cp.index for cp in self.change_points]
        ends = [s - 1 for s in starts[1:]] + [n - 1]
        weighted = list(self._closed_weighted)
        weighted.append(self.regime.variance if self.regime is not None else math.nan)
        regimes = []
        for s, e, wv in zip(starts, ends, weighted):
            seg = x[s : e + 1]
            var = float(np.dot(seg, seg) / (seg.size - 1)) if seg.size > 1 else math.nan
            regimes.append(Regime(s, e, var, wv))
        cps = []
        for j, cp in enumerate(self.change_points):
            before, after = regimes[j], regimes[j + 1]
            try:
                pv = variance_ratio_pvalue(after.variance, after.length, before.variance, before.length)
            except (ParameterError, DegenerateSampleError):
                pv = math.nan
            cps.append(ChangePoint(cp.index, cp.direction, pv, cp.rssi_trace))
        pending = None
        pending_p = math.nan
        if self.pending is not None:
            p = self.pending
            pending = PendingShift(p.candidate_index, p.direction, p.critical, p.scale, p.cutoff, p.rssi_sum, list(p.trace))
            before, after = x[starts[-1] : p.candidate_index], x[p.candidate_index :]
            if before.size > 1 and after.size > 1:
                try:
                    pending_p = variance_ratio_pvalue(float(np.dot(after, after) / (after.size - 1)), after.size,
                                                      float(np.dot(before, before) / (before.size - 1)), before.size)
                except (ParameterError, DegenerateSampleError):
                    pending_p = math.nan
        return DetectionResult(n, self.config, tuple(regimes), tuple(cps), pending, pending_p)


def detect(series: Sequence[float], config: DetectorConfig | None = None) -> DetectionResult:
    """Run SRSD over a complete series."""
    config = config or DetectorConfig()
    values = np.asarray(getattr(series, "values", series), dtype=float)
    if values.size < config.l + 1:
        raise InputError(f"series of length {values.size} is too short for l={config.l} (need >= l+1)")
    mon = SRSDMonitor(config)
    mon.extend(values.tolist())
    return mon.result()


def confirmed_indices(series: Sequence[float], config: DetectorConfig) -> list[int]:
    """Indices of confirmed change points only (fast path for simulations)."""
    mon = SRSDMonitor(config)
    mon.extend(series)
    return [cp.index for cp in mon.change_points]
