"""One-sided pooled-variance two-sample t-test on raw force samples."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import FilteredDataError
from .traces import ForceTrace

_CF_EPS = 1e-16
_CF_TINY = 1e-300
_CF_MAX_ITER = 100_000


def _beta_continued_fraction(x: float, a: float, b: float) -> float:
    """Modified-Lentz evaluation of the incomplete-beta continued fraction."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = _CF_TINY if abs(d) < _CF_TINY else d
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _CF_TINY if abs(d) < _CF_TINY else d
        c = 1.0 + aa / c
        c = _CF_TINY if abs(c) < _CF_TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _CF_TINY if abs(d) < _CF_TINY else d
        c = 1.0 + aa / c
        c = _CF_TINY if abs(c) < _CF_TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(x: float, a: float, b: float, x_complement: float | None = None) -> float:
    """``I_x(a, b)``.

    ``x_complement`` may carry ``1 - x`` computed without cancellation, which
    matters for the Student tail where ``x`` sits very close to one.
    """
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    y = 1.0 - x if x_complement is None else x_complement
    if x <= 0.0:
        return 0.0
    if y <= 0.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log(y))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _beta_continued_fraction(x, a, b) / a
    return 1.0 - math.exp(log_front) * _beta_continued_fraction(y, b, a) / b


def p_value_student_upper(t: float, dof: float) -> float:
    """``P(T > t)`` for Student's t with ``dof`` degrees of freedom."""
    if dof < 1:
        raise ValueError("dof must be >= 1")
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    if t == 0:
        return 0.5
    t2 = t * t
    x = dof / (dof + t2)
    tail = 0.5 * regularized_incomplete_beta(x, 0.5 * dof, 0.5, x_complement=t2 / (dof + t2))
    return tail if t > 0 else 1.0 - tail


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    degrees_of_freedom: int
    p_value: float
    reject_null: bool
    alpha: float = 0.01
    tail: str = "greater"
    mean_a: float = math.nan
    mean_b: float = math.nan

    def to_dict(self) -> dict:
        return asdict(self)


def _raw_samples(sample, label: str) -> np.ndarray:
    if isinstance(sample, ForceTrace):
        if sample.filtered:
            raise FilteredDataError(f"{label} is a filtered trace; tests must use raw samples")
        return sample.samples
    values = np.asarray(sample, dtype=float).ravel()
    if getattr(sample, "filtered", False):
        raise FilteredDataError(f"{label} is marked filtered; tests must use raw samples")
    return values


def t_test_one_sided(sample_a, sample_b, alpha: float = 0.01) -> TTestResult:
    """Test ``mean(a) > mean(b)`` with the pooled (equal-variance) Student statistic.

    Raw arrays or unfiltered :class:`ForceTrace` objects are accepted. Samples are
    treated as independent draws even though force records are autocorrelated.
    """
    a = _raw_samples(sample_a, "sample_a")
    b = _raw_samples(sample_b, "sample_b")
    n1, n2 = a.size, b.size
    if n1 < 2 or n2 < 2:
        raise ValueError("each sample needs at least two values")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    dof = n1 + n2 - 2
    m1, m2 = float(a.mean()), float(b.mean())
    pooled = ((n1 - 1) * a.var(ddof=1) + (n2 - 1) * b.var(ddof=1)) / dof
    diff = m1 - m2
    if pooled == 0:
        t = 0.0 if diff == 0 else math.copysign(math.inf, diff)
    else:
        t = diff / math.sqrt(pooled * (1.0 / n1 + 1.0 / n2))
    p = p_value_student_upper(t, dof)
    return TTestResult(t, dof, p, p < alpha, alpha, "greater", m1, m2)
