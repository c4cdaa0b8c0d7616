"""Exception types shared across the package."""


class BicausalError(ValueError):
    """Base class for all domain errors raised by this package."""


class NonSquare(BicausalError):
    """A transition kernel or cost table is not a square matrix."""


class NegativeEntry(BicausalError):
    """A probability or cost entry is negative beyond tolerance."""


class RowSumViolation(BicausalError):
    """A kernel row (or distribution) does not sum to one within tolerance."""


class DimensionMismatch(BicausalError):
    """Operands are defined over state spaces of different sizes."""


class InfeasibleMarginals(BicausalError):
    """Transport marginals carry different total mass."""


class TooLarge(BicausalError):
    """Problem exceeds the size limit of an enumeration-based routine."""


class InvalidCoupling(BicausalError):
    """A coupling kernel violates its marginal constraints."""


class SingularSystem(BicausalError):
    """The policy-evaluation linear system could not be solved."""


class NoContraction(BicausalError):
    """No power of the kernel contracts in total variation."""


class NotTwoState(BicausalError):
    """Operation is defined only for two-state chains."""


class NotCouplingInstance(BicausalError):
    """Operation needs the coupling-time instance (P = P', 0-1 cost, beta = 1)."""


class InfiniteProxy(BicausalError):
    """Variance proxy is infinite; the concentration bound degenerates."""


class TruncationUnsafe(BicausalError):
    """Monte Carlo truncation of the discounted sum cannot be certified."""
