"""Semantic exception hierarchy.

Every error the library raises deliberately derives from :class:`SsdLassoError`
so callers (and the CLI exit-code mapping) can distinguish "you asked for
something impossible" from genuine bugs.
"""


class SsdLassoError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(SsdLassoError):
    """Vector/matrix shapes of a region or request are inconsistent."""


class NotPsd(SsdLassoError):
    """A covariance matrix has a significantly negative eigenvalue."""


class DegenerateSupport(SsdLassoError):
    """A requested support touches a zero-variance (constant) column."""


class SingularCA(SsdLassoError):
    """The active-block correlation matrix is numerically singular."""


class ZeroUe2(SsdLassoError):
    """UE(s^2) is zero, so an efficiency ratio is undefined."""


class EmptySupportSet(SsdLassoError):
    """A criterion was asked to average over zero supports."""


class TooManySigns(SsdLassoError):
    """Support-recovery enumeration guard (2^k sign vectors) exceeded."""


class NonPositiveStep(SsdLassoError):
    """Riemann-sum step must be strictly positive."""


class InvalidC(SsdLassoError):
    """Common correlation c lies outside the feasible interval."""


class DegenerateK(SsdLassoError):
    """A condition involving binom(k, 2) is not applicable for k < 2."""


class OddN(SsdLassoError):
    """The two-block construction requires an even run count."""


class ColumnBudget(SsdLassoError):
    """Requested block columns exceed what the construction provides."""


class TooManyBlocks(SsdLassoError):
    """More supports requested than exist."""


class InfeasibleConstraints(SsdLassoError):
    """No exchange start satisfied the Var(s+) side constraints."""


class EmptyPool(SsdLassoError):
    """The sieve has no candidate designs to rank."""


class NonFiniteInput(SsdLassoError):
    """An input vector contains NaN or infinity where finite data is required."""


class InputError(SsdLassoError):
    """Malformed user input (files, tokens, request fields)."""
