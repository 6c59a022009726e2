"""Numerical kernels: F distribution, Huber weighting, robust variance, seeded normals.

Variances here are taken about zero (sums of squares), since the observations
are modelled as zero-mean noise whose variance shifts between regimes.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import DegenerateSampleError, NumericalError, ParameterError

_EPS = 1e-15
_TINY = 1e-300
_CF_MAXIT = 1000
_QUANTILE_MAXIT = 200


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    # Modified Lentz evaluation of the incomplete-beta continued fraction.
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise NumericalError(
        "incomplete beta continued fraction did not converge",
        {"a": a, "b": b, "x": x, "iterations": _CF_MAXIT},
    )


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if not (a > 0 and b > 0):
        raise ParameterError(f"beta parameters must be positive, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise ParameterError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return min(1.0, front * _beta_continued_fraction(a, b, x) / a)
    return max(0.0, 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b)


def _check_df(v1: float, v2: float) -> None:
    if not (v1 > 0 and v2 > 0):
        raise ParameterError(f"degrees of freedom must be positive, got ({v1}, {v2})")


def f_tail_probability(f: float, v1: float, v2: float) -> float:
    """Upper tail ``P(F > f)`` of the F distribution with (v1, v2) degrees of freedom."""
    _check_df(v1, v2)
    if not f > 0:
        raise ParameterError(f"F statistic must be positive, got {f}")
    return regularized_incomplete_beta(v2 / 2.0, v1 / 2.0, v2 / (v2 + v1 * f))


def _f_pdf(f: float, v1: float, v2: float) -> float:
    log_pdf = (
        (v1 / 2.0) * math.log(v1 / v2)
        + (v1 / 2.0 - 1.0) * math.log(f)
        - ((v1 + v2) / 2.0) * math.log1p(v1 * f / v2)
        - (math.lgamma(v1 / 2.0) + math.lgamma(v2 / 2.0) - math.lgamma((v1 + v2) / 2.0))
    )
    return math.exp(log_pdf)


def f_quantile(upper_tail: float, v1: float, v2: float) -> float:
    """Return ``f`` such that ``P(F > f) = upper_tail``.

    Bisection on a doubling bracket, accelerated by Newton steps that are only
    accepted when they stay strictly inside the bracket.
    """
    _check_df(v1, v2)
    if not 0.0 < upper_tail < 1.0:
        raise ParameterError(f"upper_tail must lie in (0, 1), got {upper_tail}")

    lo, hi = 0.0, 1.0
    grow = 0
    while f_tail_probability(hi, v1, v2) > upper_tail:
        lo, hi = hi, hi * 2.0
        grow += 1
        if grow > 1100:
            raise NumericalError("could not bracket F quantile", {"upper_tail": upper_tail, "v1": v1, "v2": v2})

    f = 0.5 * (lo + hi)
    for it in range(_QUANTILE_MAXIT):
        g = f_tail_probability(f, v1, v2) - upper_tail
        if g == 0.0:
            return f
        if g > 0:
            lo = f
        else:
            hi = f
        if hi - lo <= 4e-16 * hi:
            return 0.5 * (lo + hi)
        slope = -_f_pdf(f, v1, v2)
        step = f - g / slope if slope != 0.0 else math.nan
        f = step if lo < step < hi else 0.5 * (lo + hi)
    raise NumericalError(
        "F quantile inversion did not converge",
        {"upper_tail": upper_tail, "v1": v1, "v2": v2, "bracket": (lo, hi), "iterations": _QUANTILE_MAXIT},
    )


def two_tailed_f_pvalue(f: float, v1: float, v2: float) -> float:
    """Two-tailed p-value of a variance ratio ``f`` with (v1, v2) degrees of freedom."""
    tail = f_tail_probability(f, v1, v2)
    return min(1.0, 2.0 * min(tail, 1.0 - tail))


def variance_ratio_pvalue(var_a: float, n_a: int, var_b: float, n_b: int) -> float:
    """Two-tailed F-test p-value comparing two regimes of lengths ``n_a`` and ``n_b``."""
    if n_a < 2 or n_b < 2:
        raise ParameterError("each regime needs at least two observations")
    if not (var_a > 0 and var_b > 0):
        raise DegenerateSampleError("variances must be positive for an F-test")
    return two_tailed_f_pvalue(var_a / var_b, n_a - 1, n_b - 1)


def mad_about_zero(values: Sequence[float]) -> float:
    """Median of absolute values (no normal-consistency factor)."""
    arr = np.abs(np.asarray(values, dtype=float))
    if arr.size == 0:
        raise ParameterError("MAD of an empty sample is undefined")
    return float(np.median(arr))


def huber_weight(x: float, scale: float, h: float) -> float:
    """Huber-type weight ``min(1, h*scale/|x|)``.

    Zero is never down-weighted; with zero scale any nonzero value gets weight 0.
    """
    if not h > 0:
        raise ParameterError(f"Huber constant must be positive, got {h}")
    if scale < 0:
        raise ParameterError(f"scale must be nonnegative, got {scale}")
    ax = abs(x)
    if ax == 0.0:
        return 1.0
    return min(1.0, h * scale / ax)


def huber_weights(values: Sequence[float], scale: float, h: float) -> np.ndarray:
    """Vectorised :func:`huber_weight`."""
    if not h > 0:
        raise ParameterError(f"Huber constant must be positive, got {h}")
    ax = np.abs(np.asarray(values, dtype=float))
    out = np.ones_like(ax)
    nz = ax > 0
    out[nz] = np.minimum(1.0, h * scale / ax[nz])
    return out


def weighted_variance(values: Sequence[float], weights: Sequence[float]) -> float:
    """Weighted about-zero variance ``sum(w^2 x^2) / (V1 - V2/V1)``.

    ``V1 = sum(w^2)`` and ``V2 = sum(w^4)``; with unit weights this is
    ``sum(x^2) / (n - 1)``.
    """
    x = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if x.shape != w.shape:
        raise ParameterError("values and weights must have the same length")
    if np.any(w < 0) or np.any(w > 1):
        raise ParameterError("weights must lie in [0, 1]")
    w2 = w * w
    v1 = float(w2.sum())
    v2 = float((w2 * w2).sum())
    denom = v1 - v2 / v1 if v1 > 0 else 0.0
    if not denom > 0:
        raise DegenerateSampleError("weighted sample has no degrees of freedom (V1 - V2/V1 <= 0)")
    return float((w2 * x * x).sum()) / denom


def two_pass_robust_variance(values: Sequence[float], h: float) -> tuple[float, np.ndarray]:
    """Huber-weighted about-zero variance with one reweighting pass.

    Pass one scales by the MAD about zero, pass two by the square root of the
    pass-one variance. Returns the pass-two variance and weights.
    """
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise ParameterError("robust variance needs at least two observations")
    w = huber_weights(x, mad_about_zero(x), h)
    var = weighted_variance(x, w)
    w = huber_weights(x, math.sqrt(var), h)
    return weighted_variance(x, w), w


def replicate_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator for replicate ``index`` of a seeded experiment.

    Streams are keyed on ``(seed, index)`` so results never depend on the order
    in which replicates are drawn.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(index,))))


RNG_ALGORITHM = "numpy.PCG64 via SeedSequence(entropy=seed, spawn_key=(index,))"


class GaussianStream:
    """Reproducible stream of N(mean, variance) deviates."""

    def __init__(self, seed: int, mean: float = 0.0, variance: float = 1.0, index: int = 0):
        if variance < 0:
            raise ParameterError(f"variance must be nonnegative, got {variance}")
        self.seed = seed
        self.mean = float(mean)
        self.sd = math.sqrt(variance)
        self._rng = replicate_rng(seed, index)

    def draw(self, size: int) -> np.ndarray:
        z = self._rng.standard_normal(size)
        return self.mean + self.sd * z

    def __iter__(self):
        while True:
            yield from self.draw(256)
