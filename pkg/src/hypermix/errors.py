"""Exception hierarchy shared by every hypermix module."""


class HypermixError(Exception):
    """Base class for all library errors."""


# moebius / schottky
class ParabolicOrElliptic(HypermixError, ValueError):
    pass


class DegenerateC(HypermixError, ValueError):
    pass


# orbit census
class NonPrimitive(HypermixError, ValueError):
    pass


class Inadmissible(HypermixError, ValueError):
    pass


class NotLoxodromic(HypermixError, ValueError):
    pass


class ExpansionBoundUnavailable(HypermixError, RuntimeError):
    pass


class EmptyCensus(HypermixError, ValueError):
    pass


class DegenerateDenominator(HypermixError, ZeroDivisionError):
    pass


# diophantine
class ZeroIndex(HypermixError, ValueError):
    pass


class InsufficientData(HypermixError, ValueError):
    pass


# subshifts
class NotAperiodic(HypermixError, ValueError):
    pass


class BadLambda(HypermixError, ValueError):
    pass


class ConvergenceFailure(HypermixError, RuntimeError):
    pass


class DepthMismatch(HypermixError, ValueError):
    pass


# transfer operators
class NonPositiveRoof(HypermixError, ValueError):
    pass


class BudgetExceeded(HypermixError, RuntimeError):
    pass


class ZeroFrequency(HypermixError, ValueError):
    pass


# suspension flows
class NonConvergent(HypermixError, ValueError):
    pass


class TailBoundTooLarge(HypermixError, RuntimeError):
    pass


class GridTooCoarse(HypermixError, ValueError):
    pass


class GridTooShort(HypermixError, ValueError):
    pass


# harness
class ConfigInvalid(HypermixError, ValueError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"invalid config key {key!r}: {message}")


class FixtureError(HypermixError, LookupError):
    pass


class NumericFailure(HypermixError, RuntimeError):
    """A verification ran but its tolerance was exceeded."""
