"""
Benchmark harness for the toy problem: seeded runs, PAC checks against oracle
means, (tau, lambda) sweeps and the runtime model T = M t* + N.

Seeds are derived, never drawn: replication r of master seed s runs with
``replication_seed(s, r)`` and arm i of that run draws from the Philox stream
keyed by (run seed, i). Re-running any replication reproduces it exactly.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from relpac import bandit
from relpac.concentration import Range
from relpac.config import ALGORITHMS, replication_workers
from relpac.errors import ConfigurationError, DomainError, RelpacError
from relpac.estimator import DEFAULT_CAP, ArmOracle
from relpac.problems import ArmSet, UniformShifted

logger = logging.getLogger(__name__)

RUNS_COLUMNS = ['algorithm', 'seed', 'tau', 'lambda', 'p', 'chosen_index',
                'chosen_xi', 'total_samples', 'wall_other_s', 'success',
                'iterations', 'error']
SWEEP_COLUMNS = ['algorithm', 'tau', 'lambda', 'reps', 'mean_M', 'std_M',
                 'success_rate', 'failures']
PROFILE_COLUMNS = ['arm_index', 'xi', 'true_mean', 'count', 'estimate',
                   'beta_lo', 'beta_hi']
HISTORY_COLUMNS = ['iteration', 'arm_index', 'xi', 'count', 'beta_lo', 'beta_hi',
                   'active']


@dataclass(frozen=True)
class ToySpec:
    xi_min: float = 3.0
    step: float = 0.04
    count: int = 101
    noise_half_width: float = 1.0 / 20.0

    @property
    def grid(self):
        return self.xi_min + self.step * np.arange(self.count)


def toy_function(xi):
    return np.sin(xi) + np.sin(10.0 * xi / 3.0)


def toy_arms(spec=ToySpec()):
    """
    Arms f(xi) + U[-h, h) on the toy grid, with f(xi) = sin(xi) + sin(10 xi / 3).

    Returns:
    --------
    (ArmSet labelled by xi, oracle means f(xi))
    """
    grid = spec.grid
    means = toy_function(grid)
    h = spec.noise_half_width
    arms = tuple(ArmOracle(UniformShifted(float(f), h), Range(f - h, f + h))
                 for f in means)
    return ArmSet(arms, grid), means


def toy_subgrid(stride=10, spec=ToySpec()):
    """Every ``stride``-th toy arm, e.g. the 11-arm grid for stride 10."""
    arms, means = toy_arms(spec)
    indices = list(range(0, len(arms), stride))
    return arms.subset(indices), means[indices]


def replication_seed(master_seed, replication):
    """64-bit run seed of one replication, a pure function of its inputs."""
    sequence = np.random.SeedSequence(master_seed, spawn_key=(replication,))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class RunOptions:
    p: float = 2.0
    positive_means: bool = False
    batch_size: int = 1
    cap: int = DEFAULT_CAP
    me_rescale: bool = False
    record_history: bool = False


@dataclass(frozen=True)
class RunReport:
    algorithm: str
    seed: int
    tau: float
    lam: float
    p: float
    chosen_index: int
    chosen_xi: float
    total_samples: int
    per_arm_counts: np.ndarray
    wall_other: float
    success: bool
    iterations: int
    error: Optional[str] = None
    result: Optional[bandit.SelectionResult] = field(default=None, repr=False)


class _SamplerClock:
    """Accumulates the wall time spent inside samplers."""

    def __init__(self):
        self.elapsed = 0.0

    def wrap(self, sampler):
        def timed(rng, size):
            start = time.perf_counter()
            try:
                return sampler(rng, size)
            finally:
                self.elapsed += time.perf_counter() - start
        return timed


def check_algorithm(algorithm):
    if algorithm not in ALGORITHMS:
        raise ConfigurationError('unknown algorithm %r (known: %s)'
                                 % (algorithm, ', '.join(ALGORITHMS)))


def _select(algorithm, arms, oracle_means, tau, lam, opts, seed):
    if algorithm == bandit.NONADAPTIVE:
        return bandit.nonadaptive_maximize(
            arms, tau, lam, opts.p, positive_means=opts.positive_means,
            cap=opts.cap, rng=seed)
    if algorithm == bandit.ADAPTIVE:
        return bandit.adaptive_maximize(
            arms, tau, lam, opts.p, positive_means=opts.positive_means,
            batch_size=opts.batch_size, cap=opts.cap, rng=seed,
            record_history=opts.record_history)
    if algorithm == bandit.UCBV:
        return bandit.ucbv_maximize(
            arms, tau, lam, opts.p, positive_means=opts.positive_means,
            batch_size=opts.batch_size, cap=opts.cap, rng=seed,
            record_history=opts.record_history)
    # the absolute tolerance is tied to the (oracle) best mean
    eps_abs = tau * abs(float(np.max(oracle_means)))
    return bandit.median_elimination(arms, eps_abs, lam, rng=seed, cap=opts.cap,
                                     rescale=opts.me_rescale)


def pac_success(oracle_means, chosen, tau):
    """Whether the chosen arm is within tau |best mean| of the best mean."""
    best = float(np.max(oracle_means))
    return bool(best - float(oracle_means[chosen]) <= tau * abs(best))


def run_once(algorithm, arms, oracle_means, tau, lam, opts=RunOptions(), seed=0):
    """
    Run one algorithm once and check its choice against the oracle means.

    ``wall_other`` is the elapsed wall time minus the time spent inside
    samplers. Library errors are reported in the ``error`` field instead of
    being raised.
    """
    check_algorithm(algorithm)
    oracle_means = np.asarray(oracle_means, dtype=float)
    if len(oracle_means) != len(arms):
        raise ConfigurationError('got %d oracle means for %d arms'
                                 % (len(oracle_means), len(arms)))
    clock = _SamplerClock()
    timed_arms = arms.with_samplers(clock.wrap)

    start = time.perf_counter()
    try:
        result = _select(algorithm, timed_arms, oracle_means, tau, lam, opts, seed)
    except RelpacError as err:
        wall_other = time.perf_counter() - start - clock.elapsed
        logger.warning('%s run with seed %d failed: %s', algorithm, seed, err)
        return RunReport(algorithm, seed, tau, lam, opts.p, -1, math.nan, 0,
                         np.zeros(len(arms), dtype=np.int64), wall_other, False,
                         0, error=type(err).__name__)
    wall_other = time.perf_counter() - start - clock.elapsed

    return RunReport(
        algorithm=algorithm,
        seed=seed,
        tau=tau,
        lam=lam,
        p=opts.p,
        chosen_index=result.chosen,
        chosen_xi=arms.label(result.chosen),
        total_samples=result.total_samples,
        per_arm_counts=result.counts,
        wall_other=wall_other,
        success=pac_success(oracle_means, result.chosen, tau),
        iterations=result.iterations,
        result=result)


def runtime_model(report, t_star):
    """Modelled runtime M t* + N of a run, in seconds."""
    if t_star < 0:
        raise DomainError('t_star must be nonnegative, got %r' % t_star)
    return report.total_samples * t_star + report.wall_other


def runtime_table(reports_by_algorithm, t_stars):
    """Mean modelled runtime, one row per t* and one column per algorithm."""
    table = pd.DataFrame(index=pd.Index(list(t_stars), name='t_star'))
    for algorithm, reports in reports_by_algorithm.items():
        table[algorithm] = [np.mean([runtime_model(r, t) for r in reports])
                            for t in t_stars]
    return table


def run_replications(algorithm, arms, oracle_means, tau, lam, reps, master_seed,
                     opts=RunOptions(), workers=None):
    """Reports of ``reps`` seeded replications, sorted by replication index."""
    check_algorithm(algorithm)
    if reps < 1:
        raise ConfigurationError('reps must be >= 1, got %r' % reps)
    seeds = [replication_seed(master_seed, r) for r in range(reps)]

    def one(seed):
        return run_once(algorithm, arms, oracle_means, tau, lam, opts, seed)

    workers = max(1, int(workers)) if workers is not None else replication_workers()
    if workers == 1:
        return [one(seed) for seed in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, seeds))


@dataclass(frozen=True)
class PacSummary:
    success_rate: float
    mean_M: float
    std_M: float
    failures: int
    reports: Sequence[RunReport]


def summarize(reports):
    completed = pd.Series([r.total_samples for r in reports if r.error is None],
                          dtype=float)
    return PacSummary(
        success_rate=float(np.mean([r.success for r in reports])),
        mean_M=float(completed.mean()) if len(completed) else math.nan,
        std_M=float(completed.std()) if len(completed) > 1 else math.nan,
        failures=sum(r.error is not None for r in reports),
        reports=reports)


def verify_pac(algorithm, arms, oracle_means, tau, lam, reps, master_seed,
               opts=RunOptions(), workers=None):
    """
    Empirical frequency of the relative PAC event over seeded replications.

    Failed replications count as unsuccessful and are excluded from the
    sample-count statistics.
    """
    reports = run_replications(algorithm, arms, oracle_means, tau, lam, reps,
                               master_seed, opts, workers)
    summary = summarize(reports)
    logger.info('%s tau=%g lambda=%g: success %.3f, mean M %.4g over %d reps',
                algorithm, tau, lam, summary.success_rate, summary.mean_M, reps)
    return summary


@dataclass(frozen=True)
class SweepGrid:
    taus: Sequence[float]
    lambdas: Sequence[float]
    reps: int = 30
    algorithm: str = bandit.ADAPTIVE

    def __post_init__(self):
        if len(self.taus) == 0 or len(self.lambdas) == 0:
            raise ConfigurationError('a sweep needs at least one tau and one lambda')
        for name, values in (('tau', self.taus), ('lambda', self.lambdas)):
            bad = [v for v in values if not 0 < v < 1]
            if bad:
                raise ConfigurationError('%s values must lie in (0, 1), got %r'
                                         % (name, bad))
        if self.reps < 1:
            raise ConfigurationError('reps must be >= 1, got %r' % self.reps)
        check_algorithm(self.algorithm)


def summary_row(algorithm, tau, lam, reps, summary):
    return {'algorithm': algorithm, 'tau': tau, 'lambda': lam, 'reps': reps,
            'mean_M': summary.mean_M, 'std_M': summary.std_M,
            'success_rate': summary.success_rate, 'failures': summary.failures}


def sweep(grid, arms, oracle_means, master_seed, opts=RunOptions(), workers=None):
    """One row per (tau, lambda) cell with sample-count statistics."""
    rows = []
    for tau in grid.taus:
        for lam in grid.lambdas:
            try:
                summary = verify_pac(grid.algorithm, arms, oracle_means, tau, lam,
                                     grid.reps, master_seed, opts, workers)
            except RelpacError as err:
                logger.warning('sweep cell tau=%g lambda=%g failed: %s',
                               tau, lam, err)
                summary = PacSummary(0.0, math.nan, math.nan, grid.reps, ())
            rows.append(summary_row(grid.algorithm, tau, lam, grid.reps, summary))
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def loglog_slope(x, y):
    """Least-squares slope of log(y) against log(x)."""
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


def reports_frame(reports, timing=True):
    """runs.csv rows; ``timing=False`` leaves wall_other_s empty."""
    rows = [{'algorithm': r.algorithm, 'seed': r.seed, 'tau': r.tau,
             'lambda': r.lam, 'p': r.p, 'chosen_index': r.chosen_index,
             'chosen_xi': r.chosen_xi, 'total_samples': r.total_samples,
             'wall_other_s': r.wall_other if timing else math.nan,
             'success': r.success, 'iterations': r.iterations,
             'error': r.error or ''} for r in reports]
    return pd.DataFrame(rows, columns=RUNS_COLUMNS)


def profile_frame(result, arms, oracle_means):
    """Final per-arm state of one run (profile.csv rows)."""
    n = len(arms)
    return pd.DataFrame({
        'arm_index': np.arange(n),
        'xi': [arms.label(i) for i in range(n)],
        'true_mean': np.asarray(oracle_means, dtype=float),
        'count': result.counts,
        'estimate': result.estimates,
        'beta_lo': result.beta_lo,
        'beta_hi': result.beta_hi,
    }, columns=PROFILE_COLUMNS)


def history_frame(result, arms):
    """
    Active set and per-arm counts after every iteration of a recorded run.

    One row per (iteration, arm); ``active`` marks the arms that stay in the
    race for the next iteration. Needs a result of ``adaptive_maximize`` or
    ``ucbv_maximize`` run with ``record_history=True``.
    """
    if result.active_history is None:
        raise ConfigurationError('%s run has no recorded history'
                                 % result.algorithm)
    history = result.active_history
    n = len(arms)
    if not history:
        return pd.DataFrame(columns=HISTORY_COLUMNS)
    active = np.zeros((len(history), n), dtype=bool)
    for row, entry in enumerate(history):
        active[row, entry.active] = True
    return pd.DataFrame({
        'iteration': np.repeat([entry.iteration for entry in history], n),
        'arm_index': np.tile(np.arange(n), len(history)),
        'xi': np.tile([arms.label(i) for i in range(n)], len(history)),
        'count': np.concatenate([entry.counts for entry in history]),
        'beta_lo': np.concatenate([entry.beta_lo for entry in history]),
        'beta_hi': np.concatenate([entry.beta_hi for entry in history]),
        'active': active.ravel(),
    }, columns=HISTORY_COLUMNS)
