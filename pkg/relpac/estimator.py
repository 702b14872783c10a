"""
Monte-Carlo mean estimation in relative precision with adaptive stopping.

Samples are drawn until the Bernstein half-width c_m falls below
epsilon * |mean_m|; the returned estimate shrinks the empirical mean towards
zero by epsilon * c_M.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from relpac.concentration import Range, RunningStats, bernstein_half_width
from relpac.errors import CapExceeded, DomainError

logger = logging.getLogger(__name__)

DEFAULT_CAP = 10 ** 9
MAX_CHUNK = 2 ** 20
GAMMA = (math.sqrt(2.0 + 2.0 * math.sqrt(2.0) + 2.0 / 3.0) + 3.0) ** 2


@dataclass(frozen=True)
class ArmOracle:
    """
    A samplable bounded random variable.

    ``sampler(rng, size)`` returns ``size`` independent draws as a numpy
    array; every draw must lie in ``bounds``.
    """

    sampler: Callable
    bounds: Range

    def draw(self, rng, size=1):
        values = np.asarray(self.sampler(rng, size), dtype=float)
        assert values.shape == (size,), 'sampler returned shape %r' % (values.shape,)
        assert self.bounds.contains(values), 'draw outside [%r, %r]' % (
            self.bounds.a, self.bounds.b)
        return values


@dataclass(frozen=True)
class Estimate:
    value: float
    stopping_time: int
    epsilon_used: float
    achieved_half_width: float
    sign: int
    mean_at_stop: float
    stats: RunningStats


@dataclass(frozen=True)
class ComplexityBound:
    nu: float
    gamma: float
    K: int
    expected_M_bound: float
    tail_probability: float


def _check_epsilon(epsilon):
    if not 0 < epsilon < 1:
        raise DomainError('epsilon must lie in (0, 1), got %r' % epsilon)


def estimate_mean(arm, epsilon, schedule, cap=DEFAULT_CAP, rng=None,
                  max_chunk=MAX_CHUNK):
    """
    Estimate E[Z] to relative precision epsilon with probability 1 - delta.

    Parameters:
    -----------
    arm: ArmOracle to sample from
    epsilon: relative precision in (0, 1)
    schedule: Schedule giving d_m (its delta is the failure probability)
    cap: maximal number of draws before giving up with CapExceeded
    rng: numpy Generator owned by this arm
    max_chunk: largest number of draws requested from the sampler at once;
        use 1 to draw strictly one sample at a time

    Returns:
    --------
    Estimate at the first m with c_m <= epsilon * |mean_m|. Draws fetched
    past that m are discarded and not counted.
    """
    _check_epsilon(epsilon)
    if cap < 1:
        raise DomainError('cap must be >= 1, got %r' % cap)
    if max_chunk < 1:
        raise DomainError('max_chunk must be >= 1, got %r' % max_chunk)
    if rng is None:
        rng = np.random.default_rng()

    width = arm.bounds.width
    stats = RunningStats()
    chunk = 1
    while stats.m < cap:
        values = arm.draw(rng, min(chunk, cap - stats.m))
        m, mean, m2 = stats.trajectory(values)
        c = bernstein_half_width(m2 / m, width, m, schedule.log_term(m))
        hits = np.flatnonzero(c <= epsilon * np.abs(mean))
        if hits.size:
            j = hits[0]
            stats = RunningStats(int(m[j]), float(mean[j]), float(m2[j]))
            sign = 1 if mean[j] > 0 else -1
            return Estimate(
                value=float(mean[j] - epsilon * sign * c[j]),
                stopping_time=stats.m,
                epsilon_used=epsilon,
                achieved_half_width=float(c[j]),
                sign=sign,
                mean_at_stop=float(mean[j]),
                stats=stats)
        stats = RunningStats(int(m[-1]), float(mean[-1]), float(m2[-1]))
        chunk = min(2 * chunk, max_chunk)
        logger.debug('no stop after %d draws (c=%.3g, mean=%.3g)',
                     stats.m, c[-1], stats.mean)
    raise CapExceeded(cap, stats)


def complexity_bound(mu, sigma2, epsilon, schedule, bounds):
    """
    High-probability ceiling K on the stopping time and the bound on E[M].

    P(M > K) <= 4 delta / 3 and E[M] <= K + 4 delta / 3, for 0 < delta <= 3/4.
    """
    if mu == 0:
        raise DomainError('the bound requires a nonzero mean')
    if sigma2 < 0:
        raise DomainError('sigma2 must be nonnegative')
    _check_epsilon(epsilon)
    if schedule.delta > 0.75:
        raise DomainError('the bound holds for delta <= 3/4, got %r'
                          % schedule.delta)
    target = epsilon ** 2 * mu ** 2
    spread = max(sigma2, target)
    nu = min(spread / bounds.width ** 2,
             target / ((1.0 + epsilon) ** 2 * spread * GAMMA))
    p = schedule.p
    K = math.ceil(2.0 / nu * (p * math.log(2.0 * p / nu)
                              + math.log(3.0 / (schedule.c * schedule.delta))))
    tail = 4.0 * schedule.delta / 3.0
    return ComplexityBound(nu=nu, gamma=GAMMA, K=int(K),
                           expected_M_bound=K + tail, tail_probability=tail)
