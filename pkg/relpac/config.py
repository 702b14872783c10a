"""Command-line configuration, defaults and environment settings."""

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Tuple

from relpac import bandit
from relpac.errors import ConfigurationError
from relpac.estimator import DEFAULT_CAP

logger = logging.getLogger(__name__)

COMMANDS = ('estimate', 'run', 'sweep', 'verify', 'bound', 'profile')
ALGORITHMS = (bandit.NONADAPTIVE, bandit.ADAPTIVE, bandit.UCBV,
              bandit.MEDIAN_ELIMINATION)
THREADS_VARIABLE = 'RELPAC_THREADS'

DEFAULTS = {
    'p': 2.0,
    'cap': DEFAULT_CAP,
    'reps': 30,
    'verify_reps': 200,
    'seed': 0,
    'batch_size': 1,
    'problem': 'toy',
    'delta': 0.1,
    'algorithm': bandit.ADAPTIVE,
}


def _open_unit(name, value):
    if value is not None and not 0 < value < 1:
        raise ConfigurationError('%s must lie in (0, 1), got %r' % (name, value))


@dataclass(frozen=True)
class CliConfig:
    """Validated parameters of one command-line invocation."""

    command: str
    tau: Optional[float] = None
    lam: Optional[float] = None
    epsilon: Optional[float] = None
    delta: float = DEFAULTS['delta']
    p: float = DEFAULTS['p']
    algorithm: str = DEFAULTS['algorithm']
    reps: int = DEFAULTS['reps']
    seed: int = DEFAULTS['seed']
    cap: int = DEFAULTS['cap']
    batch_size: int = DEFAULTS['batch_size']
    positive_means: bool = False
    t_star: Optional[float] = None
    out: Optional[str] = None
    runs_out: Optional[str] = None
    history_out: Optional[str] = None
    problem: str = DEFAULTS['problem']
    me_rescale: bool = False
    timing: bool = False
    arm: int = 0
    mu: Optional[float] = None
    sigma2: Optional[float] = None
    a: float = 0.0
    b: float = 1.0
    taus: Tuple[float, ...] = field(default_factory=tuple)
    lambdas: Tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigurationError('unknown command %r' % self.command)
        if self.tau is not None and self.epsilon is not None:
            raise ConfigurationError('--tau and --epsilon are mutually exclusive')
        for name in ('tau', 'lam', 'epsilon', 'delta'):
            _open_unit(name.replace('lam', 'lambda'), getattr(self, name))
        for value in self.taus:
            _open_unit('tau', value)
        for value in self.lambdas:
            _open_unit('lambda', value)
        if not self.p > 1:
            raise ConfigurationError('p must be > 1, got %r' % self.p)
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError('unknown algorithm %r (known: %s)'
                                     % (self.algorithm, ', '.join(ALGORITHMS)))
        for name in ('reps', 'cap', 'batch_size'):
            if getattr(self, name) < 1:
                raise ConfigurationError('%s must be >= 1, got %r'
                                         % (name, getattr(self, name)))
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigurationError('seed must be a 64-bit unsigned integer')
        if self.t_star is not None and not (math.isfinite(self.t_star)
                                            and self.t_star >= 0):
            raise ConfigurationError('t_star must be >= 0, got %r' % self.t_star)
        if self.arm < 0:
            raise ConfigurationError('arm index must be >= 0, got %r' % self.arm)
        if self.sigma2 is not None and self.sigma2 < 0:
            raise ConfigurationError('sigma2 must be >= 0, got %r' % self.sigma2)
        if not self.a < self.b:
            raise ConfigurationError('need a < b, got a=%r b=%r' % (self.a, self.b))
        if self.history_out and self.algorithm not in (bandit.ADAPTIVE, bandit.UCBV):
            raise ConfigurationError('--history-out needs --alg %s or %s'
                                     % (bandit.ADAPTIVE, bandit.UCBV))
        self._check_required()

    def _check_required(self):
        needed = {
            'estimate': ('tau|epsilon',),
            'run': ('tau', 'lam'),
            'profile': ('tau', 'lam'),
            'verify': ('tau', 'lam'),
            'sweep': ('taus', 'lambdas'),
            'bound': ('mu', 'sigma2', 'tau|epsilon'),
        }[self.command]
        for names in needed:
            if all(getattr(self, n) in (None, ()) for n in names.split('|')):
                flags = ' or '.join('--' + n.replace('lam', 'lambda')
                                    for n in names.split('|'))
                raise ConfigurationError('%s needs %s' % (self.command, flags))

    @property
    def relative_precision(self):
        """epsilon, or the per-arm precision implied by tau."""
        if self.epsilon is not None:
            return self.epsilon
        return bandit.epsilon_from_tau(self.tau, self.positive_means)


def replication_workers(environ=None):
    """Worker count from RELPAC_THREADS; 1 when unset or invalid."""
    environ = os.environ if environ is None else environ
    raw = environ.get(THREADS_VARIABLE)
    if raw is None or raw == '':
        return 1
    try:
        workers = int(raw)
    except ValueError:
        workers = 0
    if workers < 1:
        logger.warning('ignoring %s=%r, running replications sequentially',
                       THREADS_VARIABLE, raw)
        return 1
    return workers
