"""Exceptions raised by the hedging-price library.

Every error derives from ``HedgingError`` so the experiment runner can turn
any library failure into one structured message.
"""


class HedgingError(ValueError):
    """Base class for all library errors."""


# === Move-set geometry ===
class TooFewPoints(HedgingError):
    pass


class DimensionDeficient(HedgingError):
    pass


class OriginNotInterior(HedgingError):
    pass


class SingularSystem(HedgingError):
    pass


class NotContaining(HedgingError):
    pass


# === Set functions and payoffs ===
class NotLatticeBinomial(HedgingError):
    pass


class BadParams(HedgingError):
    pass


class EvaluationFailure(HedgingError):
    pass


class NotSeparable(HedgingError):
    pass


class ValidationFailed(HedgingError):
    pass


# === Pricing ===
class StructureCertificationFailed(HedgingError):
    """A declared modularity was contradicted on at least one lattice cell."""


class NotProductAcrossBlocks(HedgingError):
    pass


class ConvexityCheckFailed(HedgingError):
    pass


class NegativeProbability(HedgingError):
    pass


class LpNumericalFailure(HedgingError):
    pass


# === PDE and Gaussian limits ===
class StabilityViolation(HedgingError):
    pass


class NonFiniteField(HedgingError):
    pass


class NonPSD(HedgingError):
    pass


# === Census ===
class NotInHalfCube(HedgingError):
    pass
