"""Exception hierarchy shared by all modules."""


class SacError(Exception):
    """Base class for every error raised by this package."""


# reaction
class NoSignChange(SacError):
    pass


class NotBistable(SacError):
    pass


class ShiftTooLarge(SacError):
    pass


class StepTooLarge(SacError):
    pass


class UnbalancedNonlinearity(SacError):
    pass


# noise
class InsufficientSupport(SacError):
    pass


class NegativeVarianceEstimate(SacError):
    pass


# wave
class NoConnection(SacError):
    pass


class OutOfCalibratedRange(SacError):
    pass


# field
class BlowUp(SacError):
    pass


# geometry
class EmptyLevelSet(SacError):
    pass


class OpenCurve(SacError):
    pass


# interface flow
class ConvexityLost(SacError):
    pass


class SelfIntersection(SacError):
    pass


class Collapse(SacError):
    pass


class NonConvexSegment(SacError):
    pass


# sandwich
class NoValidSigma(SacError):
    pass


class SideConditionFail(SacError):
    pass


class DeltaOutOfRange(SacError):
    pass


class MisalignedTimes(SacError):
    pass


# harness
class NonDegenerateViolation(SacError):
    pass


class ConfigError(SacError):
    pass
