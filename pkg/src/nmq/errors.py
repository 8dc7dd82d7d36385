"""Exception hierarchy.

Three families map onto CLI exit codes: configuration problems (2), numerical
failures (3) and divergence of a memory kernel or certificate integral (4).
"""


class NMQError(Exception):
    exit_code = 1


# -- configuration -----------------------------------------------------------

class ConfigError(NMQError, ValueError):
    exit_code = 2

    def __init__(self, message, problems=None):
        super().__init__(message)
        self.problems = list(problems) if problems else [message]


class NegativeRate(ConfigError):
    pass


class InconsistentDetuning(ConfigError):
    pass


class IndexOutOfRange(ConfigError, IndexError):
    pass


class DetunedUnsupported(ConfigError):
    pass


class CouplingNotZero(ConfigError):
    pass


class ZeroGain(ConfigError):
    pass


class PreconditionViolated(ConfigError):
    pass


class EmptySet(ConfigError):
    pass


class DimensionTooLarge(ConfigError):
    pass


class GridMismatch(ConfigError):
    pass


class ParseError(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class MissingSection(ConfigError):
    pass


# -- numerical ----------------------------------------------------------------

class NumericalError(NMQError, ArithmeticError):
    exit_code = 3


class NormalizationDrift(NumericalError):
    pass


class NormalizationViolated(NumericalError):
    pass


class NegativePopulation(NumericalError):
    pass


class TraceLost(NumericalError):
    pass


class NonFiniteRhs(NumericalError):
    pass


class NoSteadyValue(NumericalError):
    pass


# -- divergence ---------------------------------------------------------------

class DivergenceError(NMQError):
    exit_code = 4


class PoleHit(DivergenceError):
    """Riccati solution reaches a finite-time pole (|F| above the blow-up cap)."""

    def __init__(self, message, t_pole=None):
        super().__init__(message)
        self.t_pole = t_pole


class KernelDiverged(DivergenceError):
    pass


class NoSteadyKernel(DivergenceError):
    pass


class DivergentTail(DivergenceError):
    pass
