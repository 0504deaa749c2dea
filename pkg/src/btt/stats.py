"""Ten-statistic summarization of tensor snapshots.

Every tensor observed during training (gradients, weights, activations) is
reduced to the same ten numbers before it is stored. The serialization order
is frozen so trace files are byte-stable:

    [avg, var, median, min, max, q3, q1, skewness, kurtosis, zero_ratio]

All sums use exact (correctly rounded) summation, so the result is identical
for any permutation of the input and reproducible across independent
implementations of the same definitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInput

STAT_ORDER = (
    "avg",
    "var",
    "median",
    "min",
    "max",
    "q3",
    "q1",
    "skewness",
    "kurtosis",
    "zero_ratio",
)

_NAN = float("nan")


def _feq(a: float, b: float) -> bool:
    """Value equality where NaN == NaN (for record round-trip comparisons)."""
    if math.isnan(a) and math.isnan(b):
        return True
    return a == b


@dataclass(frozen=True, eq=False)
class StatVector:
    """The ten summary statistics of one tensor snapshot.

    var is the population variance; kurtosis is excess kurtosis; both
    skewness and kurtosis are 0 by convention when var == 0. For inputs
    containing NaN (or both +inf and -inf) every statistic except
    zero_ratio is NaN; with single-signed infinities the order statistics
    stay well defined while the central moments are NaN.
    """

    avg: float
    var: float
    median: float
    min: float
    max: float
    q3: float
    q1: float
    skewness: float
    kurtosis: float
    zero_ratio: float

    def as_tuple(self) -> tuple[float, ...]:
        """Statistics in the frozen serialization order."""
        return tuple(getattr(self, name) for name in STAT_ORDER)

    @classmethod
    def from_tuple(cls, values: Sequence[float]) -> "StatVector":
        if len(values) != len(STAT_ORDER):
            raise InvalidInput(f"expected {len(STAT_ORDER)} statistics, got {len(values)}")
        return cls(**{name: float(v) for name, v in zip(STAT_ORDER, values)})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StatVector):
            return NotImplemented
        return all(_feq(a, b) for a, b in zip(self.as_tuple(), other.as_tuple()))

    def __hash__(self) -> int:
        return hash(tuple(0.0 if math.isnan(v) else v for v in self.as_tuple()))


def _ieee_div(a: float, b: float) -> float:
    """Division with IEEE semantics for a zero denominator (b is nonnegative here)."""
    try:
        return a / b
    except ZeroDivisionError:
        if a == 0.0 or math.isnan(a):
            return math.nan
        return math.inf if a > 0 else -math.inf


def _exact_sum(values: list) -> float:
    """Correctly rounded sum of finite floats.

    Falls back to plain left-to-right IEEE accumulation if the exact
    algorithm overflows mid-stream, keeping the function total.
    """
    try:
        return math.fsum(values)
    except OverflowError:
        s = 0.0
        for v in values:
            s += v
        return s


def _moment_sum(arr: np.ndarray) -> float:
    """Sum of moment terms; elementwise overflow propagates as infinity."""
    has_p = bool(np.isposinf(arr).any())
    has_n = bool(np.isneginf(arr).any())
    if has_p and has_n:
        return math.nan
    if has_p:
        return math.inf
    if has_n:
        return -math.inf
    return _exact_sum(arr.tolist())


def _quantile(sorted_values: Sequence[float], p: float) -> float:
    """Linear interpolation at rank p*(n-1) on an ascending sequence."""
    n = len(sorted_values)
    pos = p * (n - 1)
    lo = math.floor(pos)
    hi = math.ceil(pos)
    vlo = sorted_values[lo]
    vhi = sorted_values[hi]
    if lo == hi or vlo == vhi:
        return vlo
    return vlo + (pos - lo) * (vhi - vlo)


def compute_stat_vector(values: Iterable[float] | np.ndarray) -> StatVector:
    """Summarize a sequence of reals into the ten frozen statistics.

    Quartiles interpolate at rank p*(n-1); moments are population moments;
    zero_ratio counts exact zeros. Non-finite inputs are not an error:
    they propagate into the statistics so that downstream gradient checks
    can observe them.
    """
    arr = np.asarray(values, dtype=np.float64).ravel()
    n = arr.size
    if n == 0:
        raise InvalidInput("cannot summarize an empty sequence")

    zero_ratio = float(np.count_nonzero(arr == 0.0)) / n

    has_nan = bool(np.isnan(arr).any())
    has_pinf = bool(np.isposinf(arr).any())
    has_ninf = bool(np.isneginf(arr).any())

    if has_nan or (has_pinf and has_ninf):
        return StatVector(_NAN, _NAN, _NAN, _NAN, _NAN, _NAN, _NAN, _NAN, _NAN, zero_ratio)

    srt = np.sort(arr).tolist()
    vmin = srt[0]
    vmax = srt[-1]
    median = _quantile(srt, 0.5)
    q1 = _quantile(srt, 0.25)
    q3 = _quantile(srt, 0.75)

    if has_pinf or has_ninf:
        avg = math.inf if has_pinf else -math.inf
        return StatVector(avg, _NAN, median, vmin, vmax, q3, q1, _NAN, _NAN, zero_ratio)

    avg = _exact_sum(arr.tolist()) / n
    with np.errstate(all="ignore"):
        d = arr - avg
        d2 = d * d
        d3 = d2 * d
        d4 = d2 * d2
    m2 = _moment_sum(d2) / n
    if m2 == 0.0:
        skewness = 0.0
        kurtosis = 0.0
    else:
        m3 = _moment_sum(d3) / n
        m4 = _moment_sum(d4) / n
        skewness = _ieee_div(m3, m2 * math.sqrt(m2))
        kurtosis = _ieee_div(m4, m2 * m2) - 3.0
    return StatVector(avg, m2, median, vmin, vmax, q3, q1, skewness, kurtosis, zero_ratio)
