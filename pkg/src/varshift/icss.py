"""Iterated cumulative sums of squares (ICSS) for retrospective variance breaks.

The centered CUSUM of squares ``D_k = C_k/C_n - k/n`` drifts away from zero
when the variance changes; its scaled maximum ``sqrt(n/2) * max|D_k|`` is
compared with a critical value ``D*``. Segments are bisected around the
significant maxima and the candidate set is then refined until it is stable.

Internally ICSS marks the *last* observation of a regime. :func:`icss`
returns first-of-new-regime indices (0-based) so results line up with SRSD.

``D*`` is looked up once for the full series length and reused for every
sub-segment (``dstar_policy="series"``, the way a printed table indexed by
sample size is normally used). ``dstar_policy="segment"`` looks up a separate
value for each segment length instead.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConvergenceError, DegenerateSampleError, ParameterError
from .kernels import replicate_rng, variance_ratio_pvalue

MIN_SEGMENT = 8
MAX_PASSES = 50
SAME_POINT_TOLERANCE = 2

TABLE_ENV_VAR = "VARSHIFT_CRITVAL_TABLE"
TABLE_VERSION = 1
DEFAULT_LENGTHS = (8, 10, 15, 20, 25, 50, 75, 100, 150, 200, 300, 500, 750, 1000)
DEFAULT_ALPHAS = (0.01, 0.05, 0.10)
DEFAULT_REPS = 100_000
DEFAULT_SEED = 19940901
DSTAR_POLICIES = ("series", "segment")


@dataclass(frozen=True)
class CusumCurve:
    start: int
    stop: int
    d: np.ndarray
    k_star: int
    m: float

    @property
    def length(self) -> int:
        return self.stop - self.start


def centered_cusum(segment: Sequence[float], offset: int = 0) -> CusumCurve:
    """Centered, normalized CUSUM of squares over one segment.

    ``k_star`` is the absolute index (``offset`` + local position) of the first
    maximum of ``|D_k|``.
    """
    x = np.asarray(segment, dtype=float)
    n = x.size
    if n < 2:
        raise ParameterError("CUSUM of squares needs at least two observations")
    c = np.cumsum(x * x)
    total = c[-1]
    if not total > 0:
        raise DegenerateSampleError("segment has zero sum of squares")
    d = c / total - np.arange(1, n + 1) / n
    d[-1] = 0.0
    return _curve_from_d(d, offset)


def _curve_from_d(d: np.ndarray, offset: int) -> CusumCurve:
    n = d.size
    pos = int(np.argmax(np.abs(d)))
    m = math.sqrt(n / 2.0) * abs(float(d[pos]))
    return CusumCurve(offset, offset + n, d, offset + pos, m)


def max_statistic(curve: CusumCurve) -> tuple[float, int]:
    return curve.m, curve.k_star


def asymptotic_critical_value(alpha: float) -> float:
    """Upper ``alpha`` quantile of sup|B(t)| for a Brownian bridge B."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")

    def tail(x: float) -> float:
        s = 0.0
        for k in range(1, 101):
            term = math.exp(-2.0 * k * k * x * x)
            s += term if k % 2 else -term
            if term < 1e-18:
                break
        return 2.0 * s

    lo, hi = 0.2, 5.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if tail(mid) > alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def simulate_null(length: int, alpha: float | Sequence[float], reps: int = DEFAULT_REPS, seed: int = DEFAULT_SEED,
                  batch: int = 2000):
    """Empirical ``1 - alpha`` quantile(s) of the max statistic under constant variance.

    Pass a sequence of alphas to get a list of quantiles from the same draws.
    """
    if length < 2:
        raise ParameterError("length must be at least 2")
    if reps < 10_000:
        raise ParameterError(f"reps must be at least 10000, got {reps}")
    alphas = [alpha] if np.isscalar(alpha) else list(alpha)
    for a in alphas:
        if not 0.0 < a < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {a}")
    rng = replicate_rng(seed, length)
    ramp = np.arange(1, length + 1) / length
    stats = np.empty(reps)
    done = 0
    while done < reps:
        b = min(batch, reps - done)
        z = rng.standard_normal((b, length))
        c = np.cumsum(z * z, axis=1)
        d = c / c[:, -1:] - ramp
        stats[done : done + b] = np.abs(d).max(axis=1)
        done += b
    stats *= math.sqrt(length / 2.0)
    q = [float(np.quantile(stats, 1.0 - a, method="higher")) for a in alphas]
    return q[0] if np.isscalar(alpha) else q


@dataclass
class CriticalValueTable:
    """``D*`` by (segment length, alpha), interpolated log-linearly in length."""

    values: dict[tuple[int, float], float]
    reps: int
    seed: int
    provenance: str = "simulated"
    _by_alpha: dict[float, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        by: dict[float, list[tuple[int, float]]] = {}
        for (n, a), v in self.values.items():
            by.setdefault(round(a, 10), []).append((n, v))
        self._by_alpha = {}
        for a, pairs in by.items():
            pairs.sort()
            self._by_alpha[a] = (np.log([p[0] for p in pairs]), np.array([p[1] for p in pairs]))

    @property
    def alphas(self) -> list[float]:
        return sorted(self._by_alpha)

    @property
    def lengths(self) -> list[int]:
        return sorted({n for n, _ in self.values})

    def lookup(self, length: int, alpha: float) -> float:
        key = round(alpha, 10)
        if key not in self._by_alpha:
            raise ParameterError(
                f"no critical values for alpha={alpha}; available {self.alphas} "
                "(regenerate the table with `varshift critvals`)"
            )
        if length < MIN_SEGMENT:
            raise ParameterError(f"segment length {length} is below the minimum of {MIN_SEGMENT}")
        logn, vals = self._by_alpha[key]
        if length > math.exp(logn[-1]) + 1e-9:
            return asymptotic_critical_value(alpha)
        if length <= math.exp(logn[0]) + 1e-9:
            return float(vals[0])
        return float(np.interp(math.log(length), logn, vals))

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# varshift ICSS critical values, format version {TABLE_VERSION}\n")
        buf.write(f"# provenance: {self.provenance}(reps={self.reps}, seed={self.seed})\n")
        w = csv.writer(buf, delimiter="\t", lineterminator="\n")
        w.writerow(["length", "alpha", "d_star", "reps", "seed"])
        for (n, a) in sorted(self.values):
            w.writerow([n, f"{a:g}", f"{self.values[(n, a)]:.6f}", self.reps, self.seed])
        return buf.getvalue()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def from_text(cls, text: str) -> "CriticalValueTable":
        values = {}
        reps = seed = None
        rows = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        reader = csv.DictReader(rows, delimiter="\t")
        for row in reader:
            values[(int(row["length"]), float(row["alpha"]))] = float(row["d_star"])
            reps, seed = int(row["reps"]), int(row["seed"])
        if not values:
            raise ParameterError("critical value table is empty")
        return cls(values, reps, seed)

    @classmethod
    def load(cls, path: str | Path) -> "CriticalValueTable":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def generate(cls, lengths: Iterable[int] = DEFAULT_LENGTHS, alphas: Iterable[float] = DEFAULT_ALPHAS,
                 reps: int = DEFAULT_REPS, seed: int = DEFAULT_SEED) -> "CriticalValueTable":
        alphas = sorted(alphas)
        values = {}
        for n in lengths:
            for a, v in zip(alphas, simulate_null(n, alphas, reps, seed)):
                values[(int(n), float(a))] = v
        return cls(values, reps, seed)


_DEFAULT_TABLE: CriticalValueTable | None = None


def default_table() -> CriticalValueTable:
    """The shipped table, or the file named by ``$VARSHIFT_CRITVAL_TABLE``."""
    global _DEFAULT_TABLE
    override = os.environ.get(TABLE_ENV_VAR)
    if override:
        return CriticalValueTable.load(override)
    if _DEFAULT_TABLE is None:
        text = resources.files("varshift").joinpath("data/critical_values.tsv").read_text(encoding="utf-8")
        _DEFAULT_TABLE = CriticalValueTable.from_text(text)
    return _DEFAULT_TABLE


def critical_value(length: int, alpha: float = 0.05, table: CriticalValueTable | None = None) -> float:
    return (table or default_table()).lookup(length, alpha)


class _Segmenter:
    def __init__(self, x: np.ndarray, alpha: float, table: CriticalValueTable, policy: str = "series"):
        if policy not in DSTAR_POLICIES:
            raise ParameterError(f"dstar_policy must be one of {DSTAR_POLICIES}, got {policy!r}")
        self.csum = np.concatenate([[0.0], np.cumsum(x * x)])
        self.n = x.size
        self.alpha = alpha
        self.table = table
        self.policy = policy
        self._dstar: dict[int, float] = {}

    def dstar(self, length: int) -> float:
        if self.policy == "series":
            length = self.n
        v = self._dstar.get(length)
        if v is None:
            v = self._dstar[length] = self.table.lookup(length, self.alpha)
        return v

    def test(self, start: int, stop: int) -> tuple[bool, int]:
        """Significance and k* (absolute, last point of old regime) on ``x[start:stop]``."""
        length = stop - start
        if length < MIN_SEGMENT:
            return False, -1
        c = self.csum[start + 1 : stop + 1] - self.csum[start]
        total = c[-1]
        if not total > 0:
            return False, -1
        d = np.abs(c / total - np.arange(1, length + 1) / length)
        pos = int(np.argmax(d))
        m = math.sqrt(length / 2.0) * float(d[pos])
        return m > self.dstar(length), start + pos

    def bracket(self, start: int, stop: int) -> list[int]:
        sig, k = self.test(start, stop)
        if not sig:
            return []
        first = k
        while True:
            sig, k2 = self.test(start, first + 1)
            if not sig or k2 >= first:
                break
            first = k2
        t1 = k + 1
        while True:
            sig, k3 = self.test(t1, stop)
            if not sig:
                break
            t1 = k3 + 1
        last = t1 - 1
        if first >= last:
            return [first]
        return [first] + self.bracket(first + 1, last + 1) + [last]

    def refine(self, points: list[int]) -> list[int]:
        current = sorted(set(points))
        for _ in range(MAX_PASSES):
            bounds = [-1] + current + [self.n - 1]
            new = []
            for j in range(1, len(bounds) - 1):
                sig, k = self.test(bounds[j - 1] + 1, bounds[j + 1] + 1)
                if sig:
                    new.append(k)
            new = sorted(set(new))
            if len(new) == len(current) and all(abs(a - b) <= SAME_POINT_TOLERANCE for a, b in zip(new, current)):
                return new
            current = new
        raise ConvergenceError(f"ICSS refinement did not settle within {MAX_PASSES} passes", current)


def icss_last_points(series: Sequence[float], alpha: float = 0.05, table: CriticalValueTable | None = None,
                     dstar_policy: str = "series") -> list[int]:
    """ICSS change points as last-of-old-regime indices (0-based)."""
    x = np.asarray(getattr(series, "values", series), dtype=float)
    if not np.all(np.isfinite(x)):
        raise ParameterError("series contains non-finite values")
    if x.size < 2 * MIN_SEGMENT:
        raise ParameterError(f"ICSS needs at least {2 * MIN_SEGMENT} observations, got {x.size}")
    if not np.dot(x, x) > 0:
        raise DegenerateSampleError("series has zero sum of squares")
    seg = _Segmenter(x, alpha, table or default_table(), dstar_policy)
    candidates = seg.bracket(0, x.size)
    if not candidates:
        return []
    return seg.refine(candidates)


def icss(series: Sequence[float], alpha: float = 0.05, table: CriticalValueTable | None = None,
         dstar_policy: str = "series") -> list[int]:
    """ICSS change points as first-of-new-regime indices (0-based)."""
    return [k + 1 for k in icss_last_points(series, alpha, table, dstar_policy)]


@dataclass(frozen=True)
class IcssSegment:
    """Regime ``[start, end]`` (inclusive, 0-based) with its about-zero variance."""

    start: int
    end: int
    variance: float

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class IcssResult:
    n: int
    alpha: float
    change_points: tuple[int, ...]
    segments: tuple[IcssSegment, ...]
    p_values: tuple[float, ...]
    directions: tuple[str, ...]


def icss_detect(series: Sequence[float], alpha: float = 0.05, table: CriticalValueTable | None = None,
                dstar_policy: str = "series") -> IcssResult:
    """ICSS change points plus per-regime variances and adjacent-regime F-test p-values."""
    x = np.asarray(getattr(series, "values", series), dtype=float)
    points = icss(x, alpha, table, dstar_policy)
    edges = [0] + points + [x.size]
    segs = []
    for a, b in zip(edges[:-1], edges[1:]):
        seg = x[a:b]
        var = float(np.dot(seg, seg) / (seg.size - 1)) if seg.size > 1 else math.nan
        segs.append(IcssSegment(a, b - 1, var))
    pvals, dirs = [], []
    for before, after in zip(segs[:-1], segs[1:]):
        try:
            pvals.append(variance_ratio_pvalue(after.variance, after.length, before.variance, before.length))
        except (ParameterError, DegenerateSampleError):
            pvals.append(math.nan)
        dirs.append("up" if after.variance > before.variance else "down")
    return IcssResult(x.size, alpha, tuple(points), tuple(segs), tuple(pvals), tuple(dirs))
