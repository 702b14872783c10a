import os

import hypothesis
import numpy as np
import pytest
import scipy.stats

from relpac.concentration import Range
from relpac.estimator import ArmOracle
from relpac.problems import Degenerate

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=200, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "fast"))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run long-running acceptance checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def coverage_floor(nominal, trials, alpha=1e-3):
    """Lowest hit frequency a method with coverage ``nominal`` reaches w.p. 1 - alpha."""
    return scipy.stats.binom.ppf(alpha, trials, nominal) / trials


def degenerate_arm(value, a=0.0, b=1.0):
    return ArmOracle(Degenerate(value), Range(a, b))


@pytest.fixture
def unit_arm():
    """Z = 1 almost surely on [0, 1]."""
    return degenerate_arm(1.0)

