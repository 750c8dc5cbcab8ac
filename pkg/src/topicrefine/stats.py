"""Replication statistics: descriptive summaries with confidence intervals,
two-sample t-tests, one-way ANOVA, and the special functions behind their
p-values."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError

_MAX_ITER = 300
_TOL = 1e-12


@dataclass(frozen=True)
class DescriptiveStats:
    mean: float
    std: float
    min: float
    max: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class TTestResult:
    mean_difference: float
    t_statistic: float
    p_value: float
    significant: bool


@dataclass(frozen=True)
class AnovaResult:
    f_statistic: float
    p_value: float
    eta_squared: float


def _betacf(a, b, x):
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _TOL:
            return h
    raise NumericError("incomplete beta continued fraction did not converge")


def reg_incomplete_beta(a, b, x):
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise DomainError("a, b must be positive")
    if x < 0 or x > 1:
        raise DomainError("x must be in [0,1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log(1.0 - x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(t, df):
    if df < 1:
        raise DomainError("df must be >= 1")
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * reg_incomplete_beta(df / 2.0, 0.5, x)
    return 1.0 - tail if t > 0 else tail


def t_ppf(q, df, lo=-1e3, hi=1e3):
    """Two-sided-friendly quantile via bisection on the CDF."""
    if not 0.0 < q < 1.0:
        raise DomainError("quantile must be in (0,1)")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if t_cdf(mid, df) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def f_sf(F, d1, d2):
    """Survival function P(X > F) of the F distribution."""
    if d1 < 1 or d2 < 1:
        raise DomainError("degrees of freedom must be >= 1")
    if F <= 0:
        return 1.0
    x = d2 / (d2 + d1 * F)
    return reg_incomplete_beta(d2 / 2.0, d1 / 2.0, x)


def descriptive(samples, confidence=0.95):
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.size
    if n < 2:
        raise DomainError("need >= 2 samples")
    mean = float(samples.mean())
    std = float(samples.std(ddof=1))
    tcrit = t_ppf(0.5 + confidence / 2.0, n - 1)
    half = tcrit * std / math.sqrt(n)
    return DescriptiveStats(mean=mean, std=std, min=float(samples.min()),
                            max=float(samples.max()),
                            ci_low=mean - half, ci_high=mean + half)


def t_test(a, b, alpha=0.05):
    """Pooled-variance two-sample Student t, two-sided."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise DomainError("both samples need n >= 2")
    na, nb = a.size, b.size
    diff = float(a.mean() - b.mean())
    sp2 = (((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1))
           / (na + nb - 2))
    if sp2 == 0.0:
        if diff == 0.0:
            return TTestResult(mean_difference=0.0, t_statistic=0.0,
                               p_value=1.0, significant=False)
        raise DomainError("zero pooled variance with unequal means")
    t = diff / math.sqrt(sp2 * (1.0 / na + 1.0 / nb))
    p = 2.0 * (1.0 - t_cdf(abs(t), na + nb - 2))
    p = min(max(p, 0.0), 1.0)
    return TTestResult(mean_difference=diff, t_statistic=t, p_value=p,
                       significant=p < alpha)


def anova(groups):
    """One-way ANOVA with eta-squared effect size."""
    groups = [np.asarray(g, dtype=np.float64) for g in groups]
    if len(groups) < 2 or any(g.size < 2 for g in groups):
        raise DomainError("need >= 2 groups with n >= 2 each")
    all_vals = np.concatenate(groups)
    grand = all_vals.mean()
    ss_between = sum(g.size * (g.mean() - grand) ** 2 for g in groups)
    ss_within = sum(((g - g.mean()) ** 2).sum() for g in groups)
    ss_total = ss_between + ss_within
    df_between = len(groups) - 1
    df_within = all_vals.size - len(groups)
    if ss_within == 0.0:
        if ss_between == 0.0:
            return AnovaResult(f_statistic=0.0, p_value=1.0, eta_squared=0.0)
        raise DomainError("zero within-group variance with distinct means")
    f = (ss_between / df_between) / (ss_within / df_within)
    eta2 = ss_between / ss_total if ss_total > 0 else 0.0
    return AnovaResult(f_statistic=float(f), p_value=f_sf(float(f), df_between,
                                                          df_within),
                       eta_squared=float(eta2))


@dataclass
class ReplicationSet:
    approach: str
    samples: list
    seeds: list


def replication_tables(replications, baseline="refined-coherence"):
    """Shape the replication map into descriptive / t-test / ANOVA reports."""
    desc = {name: descriptive(r.samples) for name, r in replications.items()}
    base = replications[baseline]
    ttests = []
    for name, r in replications.items():
        if name == baseline:
            continue
        result = t_test(np.asarray(r.samples), np.asarray(base.samples))
        ttests.append((name, result))
    ttests.sort(key=lambda item: item[1].mean_difference)
    aov = anova([r.samples for r in replications.values()])
    return desc, ttests, aov
