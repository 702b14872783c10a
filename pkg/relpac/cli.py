"""
relpac command line: estimation, maximizer runs, sweeps, PAC checks and the
complexity bound. Data goes to stdout (or --out) as CSV, logs go to stderr.

Exit status: 0 on success, 2 on a configuration or domain error, 3 when an
arm hits its sampling cap.
"""

import argparse
import dataclasses
import logging
import sys

import numpy as np
import pandas as pd

from relpac import bandit, harness
from relpac.concentration import Range, Schedule
from relpac.config import ALGORITHMS, DEFAULTS, CliConfig
from relpac.errors import CapExceeded, ConfigurationError, DomainError
from relpac.estimator import complexity_bound, estimate_mean
from relpac.problems import load_problem

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIGURATION = 2
EXIT_CAP = 3

ESTIMATE_COLUMNS = ['rep', 'seed', 'arm_index', 'value', 'stopping_time',
                    'epsilon', 'half_width', 'sign', 'mean_at_stop']


def load_arms(problem):
    """``toy``, ``toy-subgrid`` or the path of a problem file."""
    if problem == 'toy':
        return harness.toy_arms()
    if problem == 'toy-subgrid':
        return harness.toy_subgrid()
    return load_problem(problem)


def write_frame(frame, out):
    if out:
        frame.to_csv(out, index=False)
        logger.info('wrote %d rows to %s', len(frame), out)
    else:
        frame.to_csv(sys.stdout, index=False)


def run_options(config):
    return harness.RunOptions(p=config.p, positive_means=config.positive_means,
                              batch_size=config.batch_size, cap=config.cap,
                              me_rescale=config.me_rescale,
                              record_history=bool(config.history_out))


def cmd_estimate(config):
    arms, _ = load_arms(config.problem)
    if config.arm >= len(arms):
        raise ConfigurationError('arm index %d out of range (%d arms)'
                                 % (config.arm, len(arms)))
    epsilon = config.relative_precision
    schedule = Schedule(config.delta, config.p)
    rows = []
    for rep in range(config.reps):
        seed = harness.replication_seed(config.seed, rep)
        rng = bandit.arm_streams(seed, config.arm + 1)[config.arm]
        estimate = estimate_mean(arms[config.arm], epsilon, schedule, config.cap, rng)
        rows.append([rep, seed, config.arm, estimate.value, estimate.stopping_time,
                     epsilon, estimate.achieved_half_width, estimate.sign,
                     estimate.mean_at_stop])
    write_frame(pd.DataFrame(rows, columns=ESTIMATE_COLUMNS), config.out)
    return EXIT_OK


def _single_run(config):
    arms, means = load_arms(config.problem)
    report = harness.run_once(config.algorithm, arms, means, config.tau,
                              config.lam, run_options(config), config.seed)
    return arms, means, report


def _status(report):
    if report.error is None:
        return EXIT_OK
    return EXIT_CAP if report.error == CapExceeded.__name__ else EXIT_CONFIGURATION


def cmd_run(config):
    _, _, report = _single_run(config)
    write_frame(harness.reports_frame([report], timing=config.timing), config.out)
    return _status(report)


def cmd_profile(config):
    arms, means, report = _single_run(config)
    if report.result is None:
        logger.error('run failed with %s, no profile written', report.error)
        return _status(report)
    write_frame(harness.profile_frame(report.result, arms, means), config.out)
    if config.history_out:
        write_frame(harness.history_frame(report.result, arms), config.history_out)
    return EXIT_OK


def cmd_verify(config):
    arms, means = load_arms(config.problem)
    summary = harness.verify_pac(config.algorithm, arms, means, config.tau,
                                 config.lam, config.reps, config.seed,
                                 run_options(config))
    row = harness.summary_row(config.algorithm, config.tau, config.lam,
                              config.reps, summary)
    frame = pd.DataFrame([row], columns=harness.SWEEP_COLUMNS)
    if config.t_star is not None:
        frame['mean_T'] = np.mean([harness.runtime_model(r, config.t_star)
                                   for r in summary.reports])
    write_frame(frame, config.out)
    if config.runs_out:
        timing = config.timing or config.t_star is not None
        write_frame(harness.reports_frame(summary.reports, timing=timing),
                    config.runs_out)
    return EXIT_OK


def cmd_sweep(config):
    arms, means = load_arms(config.problem)
    grid = harness.SweepGrid(config.taus, config.lambdas, config.reps,
                             config.algorithm)
    write_frame(harness.sweep(grid, arms, means, config.seed, run_options(config)),
                config.out)
    return EXIT_OK


def cmd_bound(config):
    bound = complexity_bound(config.mu, config.sigma2, config.relative_precision,
                             Schedule(config.delta, config.p),
                             Range(config.a, config.b))
    lines = ['nu=%.6g' % bound.nu,
             'gamma=%.6g' % bound.gamma,
             'K=%d' % bound.K,
             'expected_M_bound=%.6g' % bound.expected_M_bound,
             'tail_probability=%.6g' % bound.tail_probability]
    text = '\n'.join(lines) + '\n'
    if config.out:
        with open(config.out, 'w', encoding='utf-8') as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMAND_HANDLERS = {
    'estimate': cmd_estimate,
    'run': cmd_run,
    'profile': cmd_profile,
    'verify': cmd_verify,
    'sweep': cmd_sweep,
    'bound': cmd_bound,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('-v', '--verbose', action='store_true',
                        help='log progress at DEBUG level on stderr')
    common.add_argument('--out', default=None, help='output file (default stdout)')
    common.add_argument('--p', type=float, default=DEFAULTS['p'],
                        help='exponent of the confidence schedule')

    sampling = argparse.ArgumentParser(add_help=False)
    sampling.add_argument('--problem', default=DEFAULTS['problem'],
                          help='toy, toy-subgrid or a problem file')
    sampling.add_argument('--seed', type=int, default=DEFAULTS['seed'])
    sampling.add_argument('--cap', type=int, default=DEFAULTS['cap'],
                          help='per-arm sampling cap')
    sampling.add_argument('--positive-means', action='store_true',
                          help='use tau / (2 - tau) for arms known to be positive')

    algorithm = argparse.ArgumentParser(add_help=False)
    algorithm.add_argument('--alg', dest='algorithm', choices=ALGORITHMS,
                           default=DEFAULTS['algorithm'])
    algorithm.add_argument('--batch-size', type=int, default=DEFAULTS['batch_size'])
    algorithm.add_argument('--me-rescale', action='store_true',
                           help='median elimination on draws mapped onto [0, 1]')

    single = argparse.ArgumentParser(add_help=False)
    single.add_argument('--tau', type=float, required=True)
    single.add_argument('--lambda', dest='lam', type=float, required=True)

    parser = argparse.ArgumentParser(
        prog='relpac',
        description='PAC best-arm identification in relative precision.')
    sub = parser.add_subparsers(dest='command', required=True)

    p_est = sub.add_parser('estimate', parents=[common, sampling],
                           help='estimate one arm mean in relative precision')
    precision = p_est.add_mutually_exclusive_group(required=True)
    precision.add_argument('--epsilon', type=float)
    precision.add_argument('--tau', type=float)
    p_est.add_argument('--delta', type=float, default=DEFAULTS['delta'])
    p_est.add_argument('--arm', type=int, default=0, help='arm index')
    p_est.add_argument('--reps', type=int, default=1)

    p_run = sub.add_parser('run', parents=[common, sampling, algorithm, single],
                           help='one seeded maximizer run (runs.csv row)')
    p_run.add_argument('--timing', action='store_true',
                       help='record the measured non-sampling time')

    p_prof = sub.add_parser('profile', parents=[common, sampling, algorithm, single],
                            help='per-arm final state of one run (profile.csv)')
    p_prof.add_argument('--history-out', default=None,
                        help='also write the active set and counts after every '
                             'iteration (adaptive and ucbv only)')

    p_ver = sub.add_parser('verify', parents=[common, sampling, algorithm, single],
                           help='success rate of the relative PAC event')
    p_ver.add_argument('--reps', type=int, default=DEFAULTS['verify_reps'])
    p_ver.add_argument('--t-star', type=float, default=None,
                       help='cost of one draw in seconds; adds a mean_T column')
    p_ver.add_argument('--runs-out', default=None,
                       help='also write every replication as runs.csv')
    p_ver.add_argument('--timing', action='store_true')

    p_sw = sub.add_parser('sweep', parents=[common, sampling, algorithm],
                          help='sample counts over a (tau, lambda) grid')
    p_sw.add_argument('--taus', type=float, nargs='+', required=True)
    p_sw.add_argument('--lambdas', type=float, nargs='+', required=True)
    p_sw.add_argument('--reps', type=int, default=DEFAULTS['reps'])

    p_bd = sub.add_parser('bound', parents=[common],
                          help='complexity bound on the stopping time')
    p_bd.add_argument('--mu', type=float, required=True)
    p_bd.add_argument('--sigma2', type=float, required=True)
    precision = p_bd.add_mutually_exclusive_group(required=True)
    precision.add_argument('--epsilon', type=float)
    precision.add_argument('--tau', type=float)
    p_bd.add_argument('--delta', type=float, default=DEFAULTS['delta'])
    p_bd.add_argument('--a', type=float, default=0.0)
    p_bd.add_argument('--b', type=float, default=1.0)
    p_bd.add_argument('--positive-means', action='store_true')
    return parser


def config_from_args(args):
    names = {f.name for f in dataclasses.fields(CliConfig)}
    values = {k: v for k, v in vars(args).items() if k in names}
    for key in ('taus', 'lambdas'):
        if key in values:
            values[key] = tuple(values[key])
    return CliConfig(**values)


def parse_and_dispatch(argv=None):
    """Run one command; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        stream=sys.stderr,
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        config = config_from_args(args)
        return COMMAND_HANDLERS[args.command](config)
    except (ConfigurationError, DomainError) as err:
        print('relpac %s: error: %s' % (args.command, err), file=sys.stderr)
        return EXIT_CONFIGURATION
    except CapExceeded as err:
        print('relpac %s: %s' % (args.command, err), file=sys.stderr)
        return EXIT_CAP


def main():
    sys.exit(parse_and_dispatch())

