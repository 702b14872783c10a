"""Exception hierarchy shared by the library, the harness and the CLI."""


class RelpacError(Exception):
    """Base class for every error raised by relpac."""


class DomainError(RelpacError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class ConfigurationError(RelpacError, ValueError):
    """A run, sweep, problem file or command line is misconfigured."""


class CapExceeded(RelpacError, RuntimeError):
    """
    An arm reached its sampling cap before the stopping rule fired.

    Usually the arm has a zero (or tiny) mean, or the cap is too small.
    The partial statistics of the offending arm are kept on the exception.
    """

    def __init__(self, cap, stats, arm=None):
        self.cap = cap
        self.stats = stats
        self.arm = arm
        where = 'arm %d' % arm if arm is not None else 'arm'
        super().__init__(
            '%s reached the cap of %d draws without stopping '
            '(mean=%.6g, var=%.6g)' % (where, cap, stats.mean, stats.var))
