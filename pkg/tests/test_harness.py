import math
import time

import numpy as np
import pandas as pd
import pytest

from relpac import harness
from relpac.bandit import (ADAPTIVE, MEDIAN_ELIMINATION, NONADAPTIVE, UCBV,
                           adaptive_maximize, median_elimination)
from relpac.config import replication_workers
from relpac.errors import ConfigurationError, DomainError
from relpac.problems import ArmSet

from conftest import degenerate_arm


@pytest.fixture(scope="module")
def toy():
    return harness.toy_arms()


@pytest.fixture(scope="module")
def subgrid():
    return harness.toy_subgrid()


def test_toy_function_values(toy):
    arms, means = toy
    assert len(arms) == 101
    assert harness.toy_function(3.0) == pytest.approx(-0.40290, abs=1e-5)
    assert means[0] == pytest.approx(-0.40290, abs=1e-5)


def test_toy_argmax_by_brute_force(toy):
    arms, means = toy
    best = int(np.argmax(means))
    assert best == 80
    assert arms.label(best) == pytest.approx(6.2)
    assert means[best] == pytest.approx(0.886, abs=1e-3)


def test_toy_arm_ranges(toy):
    arms, means = toy
    for i in (0, 50, 100):
        assert arms[i].bounds.a == pytest.approx(means[i] - 0.05)
        assert arms[i].bounds.b == pytest.approx(means[i] + 0.05)
        draws = arms[i].draw(np.random.default_rng(i), 1000)
        assert abs(draws.mean() - means[i]) < 0.01


def test_toy_subgrid(subgrid):
    arms, means = subgrid
    assert len(arms) == 11
    assert arms.label(8) == pytest.approx(6.2)
    assert int(np.argmax(means)) == 8


def test_replication_seed_is_pure():
    assert harness.replication_seed(42, 3) == harness.replication_seed(42, 3)
    seeds = {harness.replication_seed(42, r) for r in range(100)}
    assert len(seeds) == 100
    assert harness.replication_seed(1, 0) != harness.replication_seed(2, 0)


def test_run_once_adaptive_toy(toy):
    arms, means = toy
    report = harness.run_once(ADAPTIVE, arms, means, 0.1, 0.1, seed=5)
    assert report.error is None
    assert report.success
    assert report.chosen_xi == pytest.approx(arms.label(report.chosen_index))
    assert report.total_samples == report.per_arm_counts.sum()
    assert report.wall_other >= 0


def test_run_once_two_degenerate_arms_806():
    arms = ArmSet((degenerate_arm(1.0, 0.0, 2.0), degenerate_arm(0.5, 0.0, 2.0)))
    means = np.array([1.0, 0.5])
    totals = {harness.run_once(ADAPTIVE, arms, means, 0.1, 0.1, seed=s).total_samples
              for s in range(3)}
    assert totals == {806}


def test_run_once_unknown_algorithm_draws_nothing():
    calls = []

    def sampler(rng, size):
        calls.append(size)
        return np.ones(size)

    arms = ArmSet((degenerate_arm(1.0),)).with_samplers(lambda _: sampler)
    with pytest.raises(ConfigurationError):
        harness.run_once('bogus', arms, [1.0], 0.1, 0.1)
    assert calls == []


def test_run_once_records_cap_failures():
    arms = ArmSet((degenerate_arm(1.0), degenerate_arm(0.0, -1.0, 1.0)))
    opts = harness.RunOptions(cap=2000)
    report = harness.run_once(NONADAPTIVE, arms, [1.0, 0.0], 0.1, 0.1, opts, seed=0)
    assert report.error == 'CapExceeded'
    assert not report.success
    assert report.result is None


def test_median_elimination_cap_failures_are_aggregated():
    arms = ArmSet((degenerate_arm(0.9), degenerate_arm(0.5)))
    # a tiny best mean makes the absolute tolerance, and the round size, huge
    summary = harness.verify_pac(MEDIAN_ELIMINATION, arms, [1e-11, 0.0], 0.1, 0.1,
                                 3, 0, workers=1)
    assert summary.failures == 3
    assert summary.success_rate == 0.0
    assert all(r.error == 'CapExceeded' for r in summary.reports)


def test_harness_runs_median_elimination_unscaled_by_default():
    arms = ArmSet((degenerate_arm(0.9, -1.0, 2.0), degenerate_arm(0.5, -1.0, 2.0)))
    means = [0.9, 0.5]
    default = harness.run_once(MEDIAN_ELIMINATION, arms, means, 0.2, 0.1, seed=0)
    raw = median_elimination(arms, 0.2 * 0.9, 0.1, rng=0, rescale=False)
    assert default.total_samples == raw.total_samples
    scaled = harness.run_once(MEDIAN_ELIMINATION, arms, means, 0.2, 0.1,
                              harness.RunOptions(me_rescale=True), seed=0)
    assert scaled.total_samples > default.total_samples


def test_success_uses_oracle_means_only():
    means = np.array([1.0, 0.95, 0.5])
    assert harness.pac_success(means, 1, 0.1)
    assert not harness.pac_success(means, 2, 0.1)
    negative = np.array([-1.0, -1.05, -2.0])
    assert harness.pac_success(negative, 1, 0.1)
    assert not harness.pac_success(negative, 2, 0.1)


def test_runtime_model():
    report = harness.RunReport(ADAPTIVE, 0, 0.1, 0.1, 2.0, 0, 0.0, 1000,
                               np.array([1000]), 0.5, True, 10)
    assert harness.runtime_model(report, 0.01) == pytest.approx(10.5)
    assert harness.runtime_model(report, 0.0) == 0.5
    with pytest.raises(DomainError):
        harness.runtime_model(report, -1.0)


def test_runtime_table_layout():
    fast = harness.RunReport(ADAPTIVE, 0, 0.1, 0.1, 2.0, 0, 0.0, 100,
                             np.array([100]), 1.0, True, 1)
    slow = harness.RunReport(NONADAPTIVE, 0, 0.1, 0.1, 2.0, 0, 0.0, 10 ** 6,
                             np.array([10 ** 6]), 0.1, True, 1)
    table = harness.runtime_table({ADAPTIVE: [fast], NONADAPTIVE: [slow]}, [0, 1e-6, 1])
    assert list(table.columns) == [ADAPTIVE, NONADAPTIVE]
    assert table.loc[1.0, NONADAPTIVE] == pytest.approx(10 ** 6 + 0.1)
    assert table.loc[0, ADAPTIVE] == 1.0


def test_wall_other_excludes_sampler_time(subgrid):
    arms, means = subgrid

    def slowed(sampler):
        def sample(rng, size):
            time.sleep(2e-4)
            return sampler(rng, size)
        return sample

    plain = harness.run_once(ADAPTIVE, arms, means, 0.2, 0.1, seed=1)
    slow = harness.run_once(ADAPTIVE, arms.with_samplers(slowed), means, 0.2, 0.1, seed=1)
    assert slow.total_samples == plain.total_samples
    assert slow.wall_other <= 1.2 * plain.wall_other + 0.05


def test_verify_single_arm():
    arms = ArmSet((degenerate_arm(0.4),))
    summary = harness.verify_pac(ADAPTIVE, arms, [0.4], 0.1, 0.1, reps=3, master_seed=0)
    assert summary.success_rate == 1.0
    assert summary.mean_M == 0.0
    assert summary.failures == 0
    assert len(summary.reports) == 3


def test_verify_counts_failures():
    arms = ArmSet((degenerate_arm(1.0), degenerate_arm(0.0, -1.0, 1.0)))
    summary = harness.verify_pac(NONADAPTIVE, arms, [1.0, 0.0], 0.1, 0.1, reps=2,
                                 master_seed=0, opts=harness.RunOptions(cap=2000))
    assert summary.failures == 2
    assert summary.success_rate == 0.0
    assert math.isnan(summary.mean_M)


def test_threaded_replications_match_sequential(subgrid):
    arms, means = subgrid
    sequential = harness.run_replications(ADAPTIVE, arms, means, 0.2, 0.1, 4, 7, workers=1)
    threaded = harness.run_replications(ADAPTIVE, arms, means, 0.2, 0.1, 4, 7, workers=3)
    assert [r.seed for r in sequential] == [r.seed for r in threaded]
    assert [r.total_samples for r in sequential] == [r.total_samples for r in threaded]
    assert [r.chosen_index for r in sequential] == [r.chosen_index for r in threaded]


def test_replication_workers_from_environment():
    assert replication_workers({}) == 1
    assert replication_workers({'RELPAC_THREADS': '4'}) == 4
    assert replication_workers({'RELPAC_THREADS': 'many'}) == 1
    assert replication_workers({'RELPAC_THREADS': '0'}) == 1


def test_verify_adaptive_toy(toy):
    arms, means = toy
    summary = harness.verify_pac(ADAPTIVE, arms, means, 0.1, 0.1, reps=30, master_seed=42)
    assert summary.success_rate >= 0.9
    assert 5e2 <= summary.mean_M <= 2e4


def test_sweep_grid_validation():
    with pytest.raises(ConfigurationError):
        harness.SweepGrid([], [0.1])
    with pytest.raises(ConfigurationError):
        harness.SweepGrid([0.1], [1.5])
    with pytest.raises(ConfigurationError):
        harness.SweepGrid([0.1], [0.1], reps=0)
    with pytest.raises(ConfigurationError):
        harness.SweepGrid([0.1], [0.1], algorithm='bogus')


def test_sweep_rows_are_reproducible(subgrid):
    arms, means = subgrid
    grid = harness.SweepGrid([0.4, 0.2], [0.1], reps=3)
    first = harness.sweep(grid, arms, means, master_seed=1)
    second = harness.sweep(grid, arms, means, master_seed=1)
    assert list(first.columns) == harness.SWEEP_COLUMNS
    assert len(first) == 2
    pd.testing.assert_frame_equal(first, second)
    assert first.mean_M.iloc[1] > first.mean_M.iloc[0]


def test_reports_frame_round_trip(tmp_path, subgrid):
    arms, means = subgrid
    reports = harness.run_replications(ADAPTIVE, arms, means, 0.2, 0.1, 3, 0)
    frame = harness.reports_frame(reports)
    path = tmp_path / "runs.csv"
    frame.to_csv(path, index=False)
    parsed = pd.read_csv(path, keep_default_na=False, na_values=[''])
    assert list(parsed.columns) == harness.RUNS_COLUMNS
    np.testing.assert_array_equal(parsed.total_samples, [r.total_samples for r in reports])
    np.testing.assert_array_equal(parsed.seed.astype('uint64'),
                                  np.array([r.seed for r in reports], dtype='uint64'))
    assert parsed.success.tolist() == [r.success for r in reports]
    np.testing.assert_allclose(parsed.chosen_xi, [r.chosen_xi for r in reports])


def test_reports_frame_without_timing(subgrid):
    arms, means = subgrid
    report = harness.run_once(ADAPTIVE, arms, means, 0.2, 0.1, seed=0)
    frame = harness.reports_frame([report], timing=False)
    assert frame.wall_other_s.isna().all()


def test_profile_frame(subgrid):
    arms, means = subgrid
    report = harness.run_once(ADAPTIVE, arms, means, 0.2, 0.1, seed=0)
    frame = harness.profile_frame(report.result, arms, means)
    assert list(frame.columns) == harness.PROFILE_COLUMNS
    assert len(frame) == 11
    assert frame['count'].sum() == report.total_samples
    assert (frame.beta_lo <= frame.beta_hi).all()


def test_history_frame_two_degenerate_arms():
    arms = ArmSet((degenerate_arm(1.0, 0.0, 2.0), degenerate_arm(0.5, 0.0, 2.0)))
    result = adaptive_maximize(arms, 0.1, 0.1, rng=0, record_history=True)
    frame = harness.history_frame(result, arms)
    assert list(frame.columns) == harness.HISTORY_COLUMNS
    assert len(frame) == 2 * 403
    # both arms are drawn every iteration until the lower one drops out
    np.testing.assert_array_equal(frame['count'], frame.iteration)
    last = frame[frame.iteration == 403]
    assert last.active.tolist() == [True, False]
    assert frame[frame.iteration < 403].active.all()


def test_history_frame_tracks_the_active_set(subgrid):
    arms, means = subgrid
    opts = harness.RunOptions(record_history=True)
    report = harness.run_once(ADAPTIVE, arms, means, 0.2, 0.1, opts, seed=0)
    frame = harness.history_frame(report.result, arms)
    assert frame.iteration.max() == report.iterations
    final = frame[frame.iteration == report.iterations]
    np.testing.assert_array_equal(final['count'], report.per_arm_counts)
    np.testing.assert_array_equal(np.flatnonzero(final.active), report.result.active)
    sizes = frame.groupby('iteration').active.sum()
    assert sizes.iloc[-1] <= sizes.iloc[0] <= len(arms)


def test_history_frame_needs_a_recorded_run(subgrid):
    arms, means = subgrid
    report = harness.run_once(NONADAPTIVE, arms, means, 0.2, 0.1, seed=0)
    with pytest.raises(ConfigurationError):
        harness.history_frame(report.result, arms)


def test_loglog_slope():
    x = np.array([0.4, 0.2, 0.1, 0.05])
    assert harness.loglog_slope(x, 3.0 * x ** -2) == pytest.approx(-2.0)


@pytest.mark.slow
def test_adaptive_success_rate_over_200_runs(toy):
    arms, means = toy
    summary = harness.verify_pac(ADAPTIVE, arms, means, 0.1, 0.1, reps=200, master_seed=42)
    assert summary.success_rate >= 0.9
    assert 5e2 <= summary.mean_M <= 2e4


@pytest.mark.slow
def test_sample_counts_shrink_with_tau(toy):
    arms, means = toy
    taus = [0.4, 0.2, 0.1, 0.05]
    table = harness.sweep(harness.SweepGrid(taus, [0.1], reps=10), arms, means, 3)
    slope = harness.loglog_slope(taus, table.mean_M.to_numpy())
    assert -2.6 <= slope <= -1.4

    by_lambda = harness.sweep(harness.SweepGrid([0.1], [0.2, 0.05], reps=10), arms, means, 3)
    low, high = sorted(by_lambda.mean_M)
    assert high / low < 2


@pytest.mark.slow
def test_sample_count_ordering_on_the_toy(toy):
    arms, means = toy
    adaptive = harness.verify_pac(ADAPTIVE, arms, means, 0.1, 0.1, 30, 0)
    nonadaptive = harness.verify_pac(NONADAPTIVE, arms, means, 0.1, 0.1, 5, 0)
    me = harness.verify_pac(MEDIAN_ELIMINATION, arms, means, 0.1, 0.1, 5, 0)
    assert 2e7 <= nonadaptive.mean_M <= 1e9
    assert 2e6 <= me.mean_M <= 2e8
    assert nonadaptive.mean_M / adaptive.mean_M >= 1e3
    assert me.mean_M > 10 * adaptive.mean_M
    for summary in (nonadaptive, me):
        assert summary.success_rate >= 0.9

    t_stars = [0, 1e-6, 1e-4, 1e-2, 1]
    table = harness.runtime_table({ADAPTIVE: adaptive.reports,
                                   NONADAPTIVE: nonadaptive.reports,
                                   MEDIAN_ELIMINATION: me.reports}, t_stars)
    assert (table.idxmin(axis=1) == ADAPTIVE).all()


def test_ucbv_needs_more_samples_on_the_subgrid(subgrid):
    arms, means = subgrid
    adaptive = harness.verify_pac(ADAPTIVE, arms, means, 0.1, 0.1, 3, 0)
    ucbv = harness.verify_pac(UCBV, arms, means, 0.1, 0.1, 3, 0)
    assert ucbv.mean_M >= 10 * adaptive.mean_M
    assert ucbv.success_rate >= 0.9


@pytest.mark.slow
def test_ucbv_full_grid(toy):
    arms, means = toy
    summary = harness.verify_pac(UCBV, arms, means, 0.1, 0.1, 5, 0)
    assert 2e7 <= summary.mean_M <= 2e9
    assert summary.success_rate >= 0.9
