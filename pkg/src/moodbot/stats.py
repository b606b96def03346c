"""Statistical battery: Pearson r, Student-t CDF, paired TOST, pooled t-test.

The t CDF is computed through the regularized incomplete beta function
(continued-fraction evaluation, Lentz's method) so the module has no
dependency beyond the standard library; accuracy is better than 1e-10
in absolute terms for df up to 1000.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


class UndefinedStatisticError(ValueError):
    """A statistic is undefined for the given data (e.g. zero variance)."""


@dataclass(frozen=True)
class TostResult:
    """Outcome of a paired two-one-sided-tests equivalence procedure."""

    t_lower: float
    t_upper: float
    p_lower: float
    p_upper: float
    df: int
    equivalent: bool
    degenerate: bool = False  # zero spread in the paired differences


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation coefficient, clamped to [-1, 1]."""
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 2:
        raise ValueError("need at least two observations")
    mx = sum(x) / n
    my = sum(y) / n
    sxx = syy = sxy = 0.0
    for xi, yi in zip(x, y):
        dx = xi - mx
        dy = yi - my
        sxx += dx * dx
        syy += dy * dy
        sxy += dx * dy
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedStatisticError("zero variance in one of the inputs")
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


# --- Student's t distribution ------------------------------------------------

_BETACF_MAX_ITER = 300
_BETACF_EPS = 1e-15
_FPMIN = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log(1.0 - x)
    )
    front = math.exp(ln_front)
    # Use the symmetry transform so the continued fraction converges fast.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(t: float, df: float) -> float:
    """CDF of Student's t with `df` degrees of freedom."""
    if df <= 0.0:
        raise ValueError(f"df must be positive, got {df}")
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, x)
    return 1.0 - tail if t > 0 else tail


def t_sf(t: float, df: float) -> float:
    """Upper-tail probability P(T > t)."""
    return t_cdf(-t, df)


# --- tests built on the t distribution ---------------------------------------


def _mean_sd(values: Sequence[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    ss = sum((v - mean) ** 2 for v in values)
    return mean, math.sqrt(ss / (n - 1))


def _t_statistic(numerator: float, se: float) -> float:
    if se > 0.0:
        return numerator / se
    if numerator == 0.0:
        return 0.0
    return math.inf if numerator > 0 else -math.inf


def paired_tost(
    before: Sequence[float],
    after: Sequence[float],
    delta_lower: float = 0.5,
    delta_upper: float = 0.5,
    alpha: float = 0.05,
) -> TostResult:
    """Paired-sample equivalence test with bounds (-delta_lower, +delta_upper).

    Tests H01: mean difference <= -delta_lower and H02: mean difference
    >= +delta_upper on d_i = after_i - before_i; equivalence is declared
    when both one-sided tests reject at `alpha`.
    """
    if len(before) != len(after):
        raise ValueError(f"length mismatch: {len(before)} vs {len(after)}")
    n = len(before)
    if n < 3:
        raise ValueError("need at least three pairs")
    diffs = [a - b for b, a in zip(before, after)]
    mean, sd = _mean_sd(diffs)
    se = sd / math.sqrt(n)
    df = n - 1
    t_lower = _t_statistic(mean + delta_lower, se)
    t_upper = _t_statistic(mean - delta_upper, se)
    p_lower = t_sf(t_lower, df)
    p_upper = t_cdf(t_upper, df)
    return TostResult(
        t_lower=t_lower,
        t_upper=t_upper,
        p_lower=p_lower,
        p_upper=p_upper,
        df=df,
        equivalent=p_lower < alpha and p_upper < alpha,
        degenerate=se == 0.0,
    )


def independent_t(
    group_a: Sequence[float], group_b: Sequence[float]
) -> tuple[float, int, float]:
    """Pooled-variance two-sample t-test; returns (t, df, two-sided p)."""
    na, nb = len(group_a), len(group_b)
    if na < 2 or nb < 2:
        raise ValueError("each group needs at least two observations")
    mean_a = sum(group_a) / na
    mean_b = sum(group_b) / nb
    ssa = sum((v - mean_a) ** 2 for v in group_a)
    ssb = sum((v - mean_b) ** 2 for v in group_b)
    df = na + nb - 2
    pooled_var = (ssa + ssb) / df
    if pooled_var == 0.0:
        raise UndefinedStatisticError("zero pooled variance")
    se = math.sqrt(pooled_var * (1.0 / na + 1.0 / nb))
    t = (mean_a - mean_b) / se
    p = 2.0 * t_sf(abs(t), df)
    return t, df, p
