"""Exception and warning types shared across the toolkit.

Errors carry an ``exit_code`` so the command line can map them onto its
documented status codes without a lookup table.
"""


class CutoffLabError(Exception):
    exit_code = 2


class InputError(CutoffLabError):
    """Malformed or invalid input (exit code 2)."""

    exit_code = 2


class ResourceError(CutoffLabError):
    """Problem too large or budget exceeded (exit code 3)."""

    exit_code = 3


# chain_core
class RowSumError(InputError):
    pass


class NotIrreducible(InputError):
    pass


class ThetaOutOfRange(InputError):
    pass


class NegativeTime(InputError):
    pass


class NotADensity(InputError):
    pass


# geometry
class NotWeaklyReversible(InputError):
    pass


# transport
class NotNormalized(InputError):
    pass


# functionals
class TooLargeForDense(ResourceError):
    pass


class NonReversibleForLSI(InputError):
    pass


class EpsilonOutOfRange(InputError):
    pass


class NotLipschitz(InputError):
    pass


# curvature
class BracketExhausted(ResourceError):
    pass


class NotAGroupWalk(InputError):
    pass


# cutoff
class TVEqualsOne(InputError):
    pass


class MissingCertificate(InputError):
    pass


# model zoo
class InvalidParameters(InputError):
    pass


class TooLarge(ResourceError):
    pass


class NoKnownValues(InputError):
    pass


class NonpositiveTime(InputError):
    pass


# Non-fatal conditions are reported as warnings.
class BudgetExhausted(UserWarning):
    pass


class NegativeDelta(UserWarning):
    pass
