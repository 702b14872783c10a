"""
Maximizers of E[Z(xi)] over a finite arm set, PAC in relative precision.

``nonadaptive_maximize`` estimates every arm to relative precision and keeps
the best estimate. ``adaptive_maximize`` resamples only the arms whose upper
confidence bound reaches the best lower bound, re-admitting arms when their
interval catches up again. ``ucbv_maximize`` and ``median_elimination`` are
the comparison baselines.

Every algorithm takes ``rng`` as either an integer seed or one numpy
Generator per arm; arm i always draws from its own stream.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from relpac.concentration import (RunningStats, Schedule, bernstein_half_width,
                                  half_width, merge_moments)
from relpac.errors import CapExceeded, DomainError
from relpac.estimator import DEFAULT_CAP, MAX_CHUNK, estimate_mean

logger = logging.getLogger(__name__)

NONADAPTIVE = 'nonadaptive'
ADAPTIVE = 'adaptive'
UCBV = 'ucbv'
MEDIAN_ELIMINATION = 'me'


def epsilon_from_tau(tau, positive_means=False):
    """Per-arm relative precision giving a tau-optimal arm overall."""
    if not 0 < tau < 1:
        raise DomainError('tau must lie in (0, 1), got %r' % tau)
    if positive_means:
        return tau / (2.0 - tau)
    return tau / (2.0 + tau)


def arm_streams(seed, n_arms):
    """One independent Philox stream per arm, keyed by the arm index."""
    return [np.random.Generator(np.random.Philox(
        np.random.SeedSequence(seed, spawn_key=(i,)))) for i in range(n_arms)]


def _streams(rng, n_arms):
    if isinstance(rng, (list, tuple)):
        if len(rng) != n_arms:
            raise DomainError('need one generator per arm, got %d for %d arms'
                              % (len(rng), n_arms))
        return list(rng)
    return arm_streams(rng, n_arms)


def _check_pac_args(tau, lam, batch_size=1):
    if not 0 < tau < 1:
        raise DomainError('tau must lie in (0, 1), got %r' % tau)
    if not 0 < lam < 1:
        raise DomainError('lambda must lie in (0, 1), got %r' % lam)
    if batch_size < 1:
        raise DomainError('batch_size must be >= 1, got %r' % batch_size)


@dataclass(frozen=True)
class ArmState:
    stats: RunningStats
    c: float
    eps_rel: float
    beta_lo: float
    beta_hi: float
    sign: int

    @property
    def estimate(self):
        """Mean shrunk by eps_rel * c when eps_rel < 1, the raw mean otherwise."""
        if self.stats.m == 0:
            return math.nan
        if self.eps_rel < 1:
            return self.stats.mean - self.eps_rel * self.sign * self.c
        return self.stats.mean


def arm_state(stats, bounds, schedule):
    if stats.m == 0:
        return ArmState(stats, math.inf, math.inf, -math.inf, math.inf, 1)
    c = half_width(stats, bounds, schedule)
    eps_rel = c / abs(stats.mean) if stats.mean != 0 else math.inf
    sign = 1 if stats.mean >= 0 else -1
    return ArmState(stats, c, eps_rel, stats.mean - c, stats.mean + c, sign)


@dataclass(frozen=True)
class HistoryEntry:
    iteration: int
    sampled: np.ndarray
    counts: np.ndarray
    beta_lo: np.ndarray
    beta_hi: np.ndarray
    active: np.ndarray


@dataclass(frozen=True)
class SelectionResult:
    algorithm: str
    chosen: int
    estimates: np.ndarray
    counts: np.ndarray
    means: np.ndarray
    beta_lo: np.ndarray
    beta_hi: np.ndarray
    active: np.ndarray
    iterations: int = 0
    active_history: Optional[Tuple[HistoryEntry, ...]] = None

    @property
    def total_samples(self):
        return int(self.counts.sum())


def _argmax_lowest(values, candidates):
    """Index in ``candidates`` maximizing ``values``; ties go to the lowest."""
    return int(candidates[np.argmax(values[candidates])])


def nonadaptive_maximize(arms, tau, lam, schedule_p=2.0, positive_means=False,
                         cap=DEFAULT_CAP, rng=None, max_chunk=MAX_CHUNK):
    """
    Estimate every arm with relative precision eps and return the best estimate.

    eps = tau / (2 + tau) (tau / (2 - tau) for positive means) and each
    estimate fails with probability at most delta = lam / #arms.
    """
    _check_pac_args(tau, lam)
    n = len(arms)
    epsilon = epsilon_from_tau(tau, positive_means)
    schedule = Schedule(lam / n, schedule_p)
    streams = _streams(rng, n)

    states = []
    estimates = np.empty(n)
    for i, arm in enumerate(arms):
        try:
            estimate = estimate_mean(arm, epsilon, schedule, cap, streams[i],
                                     max_chunk=max_chunk)
        except CapExceeded as err:
            raise CapExceeded(err.cap, err.stats, arm=i) from None
        estimates[i] = estimate.value
        states.append(arm_state(estimate.stats, arm.bounds, schedule))
        logger.debug('arm %d stopped at M=%d', i, estimate.stopping_time)

    counts = np.array([s.stats.m for s in states], dtype=np.int64)
    chosen = int(np.argmax(estimates))
    logger.info('%s: chose arm %d after %d samples', NONADAPTIVE, chosen,
                counts.sum())
    return SelectionResult(
        algorithm=NONADAPTIVE,
        chosen=chosen,
        estimates=estimates,
        counts=counts,
        means=np.array([s.stats.mean for s in states]),
        beta_lo=np.array([s.beta_lo for s in states]),
        beta_hi=np.array([s.beta_hi for s in states]),
        active=np.arange(n))


class _ArmTable:
    """Per-arm sample moments and confidence intervals, stored as arrays."""

    def __init__(self, arms, schedule):
        n = len(arms)
        self.schedule = schedule
        self.width = np.array([arm.bounds.width for arm in arms])
        self.m = np.zeros(n, dtype=np.int64)
        self.mean = np.zeros(n)
        self.m2 = np.zeros(n)
        self.c = np.full(n, np.inf)
        self.eps = np.full(n, np.inf)
        self.beta_lo = np.full(n, -np.inf)
        self.beta_hi = np.full(n, np.inf)

    def stats(self, i):
        return RunningStats(int(self.m[i]), float(self.mean[i]), float(self.m2[i]))

    def check_cap(self, index, batch_size, cap):
        over = index[self.m[index] + batch_size > cap]
        if over.size:
            i = int(over[0])
            raise CapExceeded(cap, self.stats(i), arm=i)

    def add(self, index, values):
        """Merge a (len(index), batch) block of draws into the listed arms."""
        nb = values.shape[1]
        mb = values.mean(axis=1)
        m2b = ((values - mb[:, None]) ** 2).sum(axis=1)
        m, mean, m2 = merge_moments(self.m[index], self.mean[index],
                                    self.m2[index], nb, mb, m2b)
        c = bernstein_half_width(m2 / m, self.width[index], m,
                                 self.schedule.log_term(m))
        self.m[index] = m
        self.mean[index] = mean
        self.m2[index] = m2
        self._set_interval(index, mean, c)

    def add_one(self, i, values):
        """Scalar version of ``add`` for a single arm."""
        stats = self.stats(i)
        stats = stats.push(float(values[0])) if values.size == 1 else stats.extend(values)
        c = float(bernstein_half_width(stats.var, self.width[i], stats.m,
                                       self.schedule.log_term(stats.m)))
        self.m[i] = stats.m
        self.mean[i] = stats.mean
        self.m2[i] = stats.m2
        self.c[i] = c
        self.beta_lo[i] = stats.mean - c
        self.beta_hi[i] = stats.mean + c
        self.eps[i] = c / abs(stats.mean) if stats.mean != 0 else math.inf

    def _set_interval(self, index, mean, c):
        self.c[index] = c
        self.beta_lo[index] = mean - c
        self.beta_hi[index] = mean + c
        absmean = np.abs(mean)
        with np.errstate(divide='ignore'):
            self.eps[index] = np.where(absmean > 0, c / absmean, np.inf)

    def select_active(self):
        """Every arm whose upper bound reaches the best lower bound."""
        return np.flatnonzero(self.beta_hi >= self.beta_lo.max())

    def estimates(self):
        sign = np.where(self.mean >= 0, 1.0, -1.0)
        with np.errstate(invalid='ignore'):
            shrunk = self.mean - self.eps * sign * self.c
        estimates = np.where(self.eps < 1, shrunk, self.mean)
        estimates[self.m == 0] = np.nan
        return estimates

    def result(self, algorithm, active, iterations, history):
        estimates = self.estimates()
        if active.size == 1:
            chosen = int(active[0])
        else:
            chosen = _argmax_lowest(estimates, active)
        logger.info('%s: chose arm %d after %d iterations and %d samples',
                    algorithm, chosen, iterations, self.m.sum())
        return SelectionResult(
            algorithm=algorithm,
            chosen=chosen,
            estimates=estimates,
            counts=self.m.copy(),
            means=np.where(self.m > 0, self.mean, np.nan),
            beta_lo=self.beta_lo.copy(),
            beta_hi=self.beta_hi.copy(),
            active=active,
            iterations=iterations,
            active_history=None if history is None else tuple(history))


def _keep_going(table, active, threshold):
    return active.size > 1 and table.eps[active].max() > threshold


def adaptive_maximize(arms, tau, lam, schedule_p=2.0, positive_means=False,
                      batch_size=1, cap=DEFAULT_CAP, rng=None,
                      record_history=False):
    """
    Adaptive racing maximizer.

    While more than one arm is active and some active arm has relative
    half-width eps_rel above the threshold, draw ``batch_size`` samples from
    every active arm, then re-admit every arm (sampled or not) whose upper
    bound reaches the largest lower bound.
    """
    _check_pac_args(tau, lam, batch_size)
    n = len(arms)
    threshold = epsilon_from_tau(tau, positive_means)
    table = _ArmTable(arms, Schedule(lam / n, schedule_p))
    streams = _streams(rng, n)
    history = [] if record_history else None

    active = np.arange(n)
    iterations = 0
    while _keep_going(table, active, threshold):
        table.check_cap(active, batch_size, cap)
        values = np.stack([arms[i].draw(streams[i], batch_size) for i in active])
        table.add(active, values)
        sampled = active
        active = table.select_active()
        iterations += 1
        if history is not None:
            history.append(HistoryEntry(iterations, sampled, table.m.copy(),
                                        table.beta_lo.copy(),
                                        table.beta_hi.copy(), active))
        if iterations % 100 == 0:
            logger.debug('iteration %d: %d active arms, max eps_rel %.4g',
                         iterations, active.size, table.eps[active].max())
    return table.result(ADAPTIVE, active, iterations, history)


def ucbv_maximize(arms, tau, lam, schedule_p=2.0, positive_means=False,
                  batch_size=1, cap=DEFAULT_CAP, rng=None, record_history=False):
    """
    Same loop and stopping rule as ``adaptive_maximize``, but each iteration
    samples only the active arm with the highest upper bound.

    Unsampled arms have an infinite upper bound, so every arm is drawn once
    before any arm is drawn twice.
    """
    _check_pac_args(tau, lam, batch_size)
    n = len(arms)
    threshold = epsilon_from_tau(tau, positive_means)
    table = _ArmTable(arms, Schedule(lam / n, schedule_p))
    streams = _streams(rng, n)
    history = [] if record_history else None

    active = np.arange(n)
    iterations = 0
    while _keep_going(table, active, threshold):
        leader = _argmax_lowest(table.beta_hi, active)
        if table.m[leader] + batch_size > cap:
            raise CapExceeded(cap, table.stats(leader), arm=leader)
        table.add_one(leader, arms[leader].draw(streams[leader], batch_size))
        active = table.select_active()
        iterations += 1
        if history is not None:
            history.append(HistoryEntry(iterations, np.array([leader]),
                                        table.m.copy(), table.beta_lo.copy(),
                                        table.beta_hi.copy(), active))
        if iterations % 1000000 == 0:
            logger.debug('iteration %d: %d active arms, max eps_rel %.4g',
                         iterations, active.size, table.eps[active].max())
    return table.result(UCBV, active, iterations, history)


def _round_mean(arm, rng, count, max_chunk):
    total = 0.0
    left = count
    while left:
        size = min(left, max_chunk)
        total += float(arm.draw(rng, size).sum())
        left -= size
    return total / count


def median_elimination(arms, eps_abs, delta, rng=None, cap=DEFAULT_CAP,
                       rescale=True, max_chunk=MAX_CHUNK):
    """
    Median Elimination for absolute precision eps_abs with confidence delta.

    Each round samples every surviving arm ceil(4 / eps_l**2 * log(3 / delta_l))
    times, keeps the upper half by empirical mean (ties to the lowest index),
    then shrinks eps_l by 3/4 and halves delta_l, starting from eps_abs / 4 and
    delta / 2. With ``rescale`` the draws are mapped onto [0, 1] through the
    envelope of all ranges, which amounts to dividing eps_abs by its width.
    The harness runs it with ``rescale=False`` unless told otherwise.
    """
    if not eps_abs > 0:
        raise DomainError('eps_abs must be positive, got %r' % eps_abs)
    if not 0 < delta < 1:
        raise DomainError('delta must lie in (0, 1), got %r' % delta)
    n = len(arms)
    streams = _streams(rng, n)
    width = 1.0
    if rescale:
        width = (max(arm.bounds.b for arm in arms)
                 - min(arm.bounds.a for arm in arms))

    eps_l = eps_abs / width / 4.0
    delta_l = delta / 2.0
    counts = np.zeros(n, dtype=np.int64)
    means = np.full(n, np.nan)
    survivors = np.arange(n)
    rounds = 0
    while survivors.size > 1:
        size = (4.0 / eps_l ** 2 * math.log(3.0 / delta_l) if eps_l ** 2 > 0
                else math.inf)
        # the round size can exceed int64 (or be inf), so compare before numpy
        if size > cap - int(counts[survivors].max()):
            i = int(survivors[np.argmax(counts[survivors])])
            raise CapExceeded(cap, RunningStats(int(counts[i])), arm=i)
        per_arm = math.ceil(size)
        for i in survivors:
            means[i] = _round_mean(arms[i], streams[i], per_arm, max_chunk)
        counts[survivors] += per_arm
        keep = math.ceil(survivors.size / 2)
        order = np.argsort(-means[survivors], kind='stable')
        survivors = np.sort(survivors[order[:keep]])
        rounds += 1
        logger.debug('round %d: %d draws per arm, %d survivors',
                     rounds, per_arm, survivors.size)
        eps_l *= 0.75
        delta_l /= 2.0

    chosen = int(survivors[0])
    logger.info('%s: chose arm %d after %d rounds and %d samples',
                MEDIAN_ELIMINATION, chosen, rounds, counts.sum())
    return SelectionResult(
        algorithm=MEDIAN_ELIMINATION,
        chosen=chosen,
        estimates=means.copy(),
        counts=counts,
        means=means,
        beta_lo=np.full(n, np.nan),
        beta_hi=np.full(n, np.nan),
        active=survivors,
        iterations=rounds)
