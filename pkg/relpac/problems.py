"""
Arm distributions, arm families and the plain-text problem-file format.

A problem file holds one arm per line::

    # comment
    arm dist=degenerate value=1.0 a=0 b=1
    arm dist=uniform-shifted center=0.886 half_width=0.05 xi=6.2
    arm dist=bernoulli-affine p=0.3 low=-1 high=2 mean=-0.1

``a``/``b`` default to the support of the distribution, ``xi`` labels the
arm and ``mean`` overrides the analytic mean used as oracle.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from relpac.concentration import Range
from relpac.errors import ConfigurationError, DomainError
from relpac.estimator import ArmOracle

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Degenerate:
    value: float

    def __call__(self, rng, size):
        return np.full(size, self.value)

    @property
    def mean(self):
        return self.value

    @property
    def support(self):
        # a point mass has no proper interval; widen by one unit
        return Range(self.value - 0.5, self.value + 0.5)


@dataclass(frozen=True)
class UniformShifted:
    """center + U[-half_width, half_width), half-open on the right."""

    center: float
    half_width: float

    def __call__(self, rng, size):
        low = self.center - self.half_width
        high = self.center + self.half_width
        # low + (high - low) * u can round one ulp past high
        return np.minimum(rng.uniform(low, high, size), high)

    @property
    def mean(self):
        return self.center

    @property
    def support(self):
        return Range(self.center - self.half_width,
                     self.center + self.half_width)


@dataclass(frozen=True)
class BernoulliAffine:
    """low + (high - low) * Bernoulli(p)."""

    p: float
    low: float
    high: float

    def __call__(self, rng, size):
        return self.low + (self.high - self.low) * rng.binomial(1, self.p, size)

    @property
    def mean(self):
        return self.low + self.p * (self.high - self.low)

    @property
    def support(self):
        return Range(self.low, self.high)


@dataclass(frozen=True)
class ArmSet:
    """Ordered arms; the position of an arm is its identity."""

    arms: Tuple[ArmOracle, ...]
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.arms) == 0:
            raise ConfigurationError('an arm set needs at least one arm')
        if self.labels is not None and len(self.labels) != len(self.arms):
            raise ConfigurationError('got %d labels for %d arms'
                                     % (len(self.labels), len(self.arms)))

    def __len__(self):
        return len(self.arms)

    def __getitem__(self, index):
        return self.arms[index]

    def label(self, index):
        if self.labels is None:
            return float(index)
        return float(self.labels[index])

    def subset(self, indices):
        indices = list(indices)
        labels = None if self.labels is None else np.asarray(self.labels)[indices]
        return ArmSet(tuple(self.arms[i] for i in indices), labels)

    def with_samplers(self, wrap):
        """Same arms with every sampler passed through ``wrap``."""
        arms = tuple(ArmOracle(wrap(arm.sampler), arm.bounds) for arm in self.arms)
        return ArmSet(arms, self.labels)


# tag -> (distribution class, required parameter names)
DISTRIBUTIONS = {
    'degenerate': (Degenerate, ('value',)),
    'uniform-shifted': (UniformShifted, ('center', 'half_width')),
    'bernoulli-affine': (BernoulliAffine, ('p', 'low', 'high')),
}
OPTIONAL_FIELDS = ('a', 'b', 'xi', 'mean')


def _parse_float(text, lineno, field):
    try:
        return float(text)
    except ValueError:
        raise ConfigurationError('line %d: field %r is not a number: %r'
                                 % (lineno, field, text))


def parse_arm_line(line, lineno):
    """Parse one ``arm`` line into (ArmOracle, xi or None, oracle mean)."""
    tokens = line.split()
    if tokens[0] != 'arm':
        raise ConfigurationError('line %d: expected "arm", got %r'
                                 % (lineno, tokens[0]))
    fields = {}
    for token in tokens[1:]:
        key, sep, value = token.partition('=')
        if not sep or not value:
            raise ConfigurationError('line %d: malformed field %r' % (lineno, token))
        if key in fields:
            raise ConfigurationError('line %d: duplicate field %r' % (lineno, key))
        fields[key] = value

    tag = fields.pop('dist', None)
    if tag is None:
        raise ConfigurationError('line %d: missing field "dist"' % lineno)
    if tag not in DISTRIBUTIONS:
        raise ConfigurationError('line %d: unknown distribution %r (known: %s)'
                                 % (lineno, tag, ', '.join(sorted(DISTRIBUTIONS))))
    cls, required = DISTRIBUTIONS[tag]
    params = {}
    for name in required:
        if name not in fields:
            raise ConfigurationError('line %d: %s needs field %r'
                                     % (lineno, tag, name))
        params[name] = _parse_float(fields.pop(name), lineno, name)
    extra = {name: _parse_float(fields.pop(name), lineno, name)
             for name in OPTIONAL_FIELDS if name in fields}
    if fields:
        raise ConfigurationError('line %d: unknown field(s) %s'
                                 % (lineno, ', '.join(sorted(fields))))

    if tag == 'bernoulli-affine' and not 0 <= params['p'] <= 1:
        raise ConfigurationError('line %d: field "p" must lie in [0, 1]' % lineno)
    if tag == 'uniform-shifted' and not params['half_width'] > 0:
        raise ConfigurationError('line %d: field "half_width" must be > 0' % lineno)
    if tag == 'bernoulli-affine' and not params['low'] < params['high']:
        raise ConfigurationError('line %d: need low < high' % lineno)

    dist = cls(**params)
    support = dist.support
    a = extra.get('a', support.a)
    b = extra.get('b', support.b)
    try:
        bounds = Range(a, b)
    except DomainError as err:
        raise ConfigurationError('line %d: field "a"/"b": %s' % (lineno, err))
    if a > support.a or b < support.b:
        if not (tag == 'degenerate' and a <= dist.value <= b):
            raise ConfigurationError('line %d: range [%g, %g] does not cover the '
                                     'support of %s' % (lineno, a, b, tag))
    return ArmOracle(dist, bounds), extra.get('xi'), extra.get('mean', dist.mean)


def load_problem(path):
    """
    Read an arm family from a problem file.

    Returns:
    --------
    (ArmSet, oracle means as a numpy array)
    """
    arms, labels, means = [], [], []
    try:
        with open(path, encoding='utf-8') as handle:
            lines = handle.readlines()
    except OSError as err:
        raise ConfigurationError('cannot read problem file %s: %s' % (path, err))
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        arm, xi, mean = parse_arm_line(line, lineno)
        arms.append(arm)
        labels.append(xi)
        means.append(mean)
    if not arms:
        raise ConfigurationError('problem file %s defines no arm' % path)
    if all(xi is None for xi in labels):
        labels = None
    else:
        labels = np.array([i if xi is None else xi for i, xi in enumerate(labels)],
                          dtype=float)
    logger.info('loaded %d arms from %s', len(arms), path)
    return ArmSet(tuple(arms), labels), np.array(means, dtype=float)
