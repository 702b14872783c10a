"""
PAC best-arm identification in relative precision.

Estimate the mean of a bounded random variable to a prescribed relative
precision, and select, among finitely many arms, one whose mean is within
tau |best mean| of the best with probability at least 1 - lambda, drawing as
few samples as possible.
"""

from relpac.bandit import (adaptive_maximize, median_elimination,
                           nonadaptive_maximize, ucbv_maximize)
from relpac.concentration import Range, RunningStats, Schedule, half_width
from relpac.errors import CapExceeded, ConfigurationError, DomainError, RelpacError
from relpac.estimator import ArmOracle, complexity_bound, estimate_mean

__version__ = '0.1.0'

__all__ = ['ArmOracle', 'CapExceeded', 'ConfigurationError', 'DomainError',
           'Range', 'RelpacError', 'RunningStats', 'Schedule',
           'adaptive_maximize', 'complexity_bound', 'estimate_mean',
           'half_width', 'median_elimination', 'nonadaptive_maximize',
           'ucbv_maximize']
