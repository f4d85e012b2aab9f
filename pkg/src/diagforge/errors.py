"""Exception types raised across the package."""


class DiagforgeError(Exception):
    """Base class for all package errors."""


class NonPowerOfTwoLength(DiagforgeError, ValueError):
    pass


class MissingDerivativeBound(DiagforgeError, ValueError):
    pass


class NonPositiveEpsilon(DiagforgeError, ValueError):
    pass


class AllZeroSpectrum(DiagforgeError, ValueError):
    pass


class UnloweredCircuit(DiagforgeError, ValueError):
    pass


class WidthTooLarge(DiagforgeError, ValueError):
    pass


class InsufficientAncilla(DiagforgeError, ValueError):
    pass


class SchemaViolation(DiagforgeError, ValueError):
    pass


class NonPhaseSpec(DiagforgeError, ValueError):
    pass


class OverlappingTargets(DiagforgeError, ValueError):
    pass


class InsufficientAncillaForGroup(DiagforgeError, ValueError):
    pass


class AlphaTooSmall(DiagforgeError, ValueError):
    pass


class NonPositiveProbability(DiagforgeError, ValueError):
    pass


class AlphaNotGreaterThanOne(DiagforgeError, ValueError):
    pass


class WidthMismatch(DiagforgeError, ValueError):
    pass


class ImpossibleOutcome(DiagforgeError, ValueError):
    pass
