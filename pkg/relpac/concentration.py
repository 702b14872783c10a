"""
Streaming statistics and empirical Bernstein confidence bounds.

All logarithms are natural logarithms. Empirical variances use the 1/m
convention, matching the constants of the Bernstein bound.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.special

from relpac.errors import DomainError

LOG3 = math.log(3.0)


@dataclass(frozen=True)
class Range:
    """Known support [a, b] of a bounded random variable."""

    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise DomainError('range bounds must be finite, got [%r, %r]'
                              % (self.a, self.b))
        if not self.a < self.b:
            raise DomainError('range needs a < b, got [%r, %r]'
                              % (self.a, self.b))

    @property
    def width(self):
        return self.b - self.a

    def contains(self, values):
        values = np.asarray(values)
        return bool(np.all((values >= self.a) & (values <= self.b)))


@dataclass(frozen=True)
class Schedule:
    """
    Confidence-level sequence d_m = delta * c * m**(-p), c = (p - 1) / p.

    The sequence sums to delta * c * zeta(p), which is at most delta for
    p >= 2, and log(3 / d_m) / m goes to zero for every p > 1.
    """

    delta: float
    p: float = 2.0

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise DomainError('delta must lie in (0, 1), got %r' % self.delta)
        if not self.p > 1:
            raise DomainError('p must be > 1, got %r' % self.p)

    @property
    def c(self):
        return (self.p - 1.0) / self.p

    def log_term(self, m):
        """
        log(3 / d_m), evaluated as log 3 - log delta - log c + p log m.

        Accepts scalars or integer arrays; never underflows for large m.
        """
        m = np.asarray(m, dtype=float)
        if np.any(m < 1):
            raise DomainError('m must be >= 1')
        value = LOG3 - math.log(self.delta) - math.log(self.c) + self.p * np.log(m)
        return float(value) if value.ndim == 0 else value

    def total_budget(self):
        """Closed form of sum_{m >= 1} d_m."""
        return self.delta * self.c * float(scipy.special.zeta(self.p))


def dm(schedule, m):
    """Confidence budget d_m spent at sample size m."""
    if m < 1:
        raise DomainError('d_m is defined for m >= 1, got %r' % m)
    return schedule.delta * schedule.c * float(m) ** (-schedule.p)


def merge_moments(n, mean, m2, nb, mb, m2b):
    """
    Combine (count, mean, sum of squared deviations) of two samples.

    Works elementwise on numpy arrays as well as on scalars.
    """
    total = n + nb
    d = mb - mean
    new_mean = mean + d * nb / total
    new_m2 = m2 + m2b + d * d * n * nb / total
    return total, new_mean, new_m2


@dataclass(frozen=True)
class RunningStats:
    """
    Count, empirical mean and 1/m empirical variance of a stream.

    ``m2`` is the running sum of squared deviations from the mean
    (Welford's update), so ``var = m2 / m``.
    """

    m: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @property
    def var(self):
        if self.m <= 1:
            return 0.0
        return max(self.m2 / self.m, 0.0)

    def push(self, x):
        m = self.m + 1
        delta = x - self.mean
        mean = self.mean + delta / m
        m2 = self.m2 + delta * (x - mean)
        return RunningStats(m, mean, m2)

    def extend(self, values):
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            return self
        mb = float(values.mean())
        m2b = float(np.sum((values - mb) ** 2))
        m, mean, m2 = merge_moments(self.m, self.mean, self.m2,
                                    values.size, mb, m2b)
        return RunningStats(int(m), float(mean), float(m2))

    def trajectory(self, values):
        """
        Statistics after each prefix of ``values`` appended to this stream.

        Returns the arrays (m, mean, m2), one entry per prefix length.
        Prefix sums are taken on values shifted by the current mean (or the
        first value for an empty stream) to keep the subtraction stable.
        """
        values = np.asarray(values, dtype=float)
        shift = self.mean if self.m else values[0]
        y = values - shift
        k = np.arange(1, values.size + 1, dtype=float)
        s1 = np.cumsum(y)
        s2 = np.cumsum(y * y)
        mb = shift + s1 / k
        m2b = np.maximum(s2 - s1 * s1 / k, 0.0)
        m, mean, m2 = merge_moments(self.m, self.mean, self.m2, k, mb, m2b)
        return m.astype(np.int64), mean, m2


def push(stats, x):
    return stats.push(x)


def bernstein_half_width(var, width, m, log_term):
    """sqrt(2 var log_term / m) + 3 width log_term / m, elementwise."""
    var = np.maximum(var, 0.0)
    return np.sqrt(2.0 * var * log_term / m) + 3.0 * width * log_term / m


def half_width(stats, bounds, schedule):
    """Half-length c_m of the level 1 - d_m confidence interval."""
    if stats.m < 1:
        raise DomainError('half_width needs at least one sample')
    return float(bernstein_half_width(stats.var, bounds.width, stats.m,
                                      schedule.log_term(stats.m)))


def bernstein_event_holds(true_mean, stats, bounds, x):
    """True when |mean - true_mean| is within the Bernstein bound at level x."""
    if stats.m < 1:
        raise DomainError('the Bernstein event needs at least one sample')
    if not 0 < x < 1:
        raise DomainError('x must lie in (0, 1), got %r' % x)
    bound = bernstein_half_width(stats.var, bounds.width, stats.m,
                                 math.log(3.0 / x))
    return bool(abs(stats.mean - true_mean) <= bound)


def bennett_deviation(second_moment, upper, x, m):
    """
    Bound on m * (mean_m(U) - E[U]) holding with probability >= 1 - exp(-x).

    Valid for i.i.d. U <= upper almost surely; ``second_moment`` is E[U**2].
    """
    if m < 1 or x <= 0:
        raise DomainError('need m >= 1 and x > 0')
    return math.sqrt(2.0 * m * second_moment * x) + max(0.0, upper) * x / 3.0


def variance_upper_bound(sigma2, bounds, x, m):
    """
    Threshold exceeded by the empirical variance with probability <= exp(-x).
    """
    if m < 1 or x <= 0:
        raise DomainError('need m >= 1 and x > 0')
    w2 = bounds.width ** 2
    return sigma2 + math.sqrt(2.0 * sigma2 * w2 * x / m) + x * w2 / (3.0 * m)


def log_lemma_bound(q, k):
    """
    Upper bound (2 / k) log(2q / k) on solutions t of log(q t) / t = k.

    Any t' at or above the bound also satisfies log(q t') / t' <= k.
    """
    if q <= 0 or k <= 0:
        raise DomainError('q and k must be positive')
    ratio = 2.0 * q / k
    if ratio <= 1:
        raise DomainError('2q/k must exceed 1, got %r' % ratio)
    return 2.0 / k * math.log(ratio)
