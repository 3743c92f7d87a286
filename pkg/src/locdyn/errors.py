"""Exception hierarchy for locdyn."""


class LocDynError(Exception):
    """Base class for all locdyn errors."""


class DisconnectedGraph(LocDynError, ValueError):
    pass


class DuplicateSelfLoop(LocDynError, ValueError):
    """An edge joins a node to itself."""


class BadDimension(LocDynError, ValueError):
    pass


class DimensionMismatch(LocDynError, ValueError):
    pass


class NonpositiveLambda(LocDynError, ValueError):
    pass


class InvalidParams(LocDynError, ValueError):
    pass


class TooFewAnchors(LocDynError, ValueError):
    pass


class StepOutOfRange(LocDynError, IndexError):
    pass


class BadProbability(LocDynError, ValueError):
    pass


class InsufficientHistory(LocDynError, ValueError):
    pass


class NumericalDivergence(LocDynError, ArithmeticError):
    """An iterate became non-finite, usually because the step 1/L is too large."""


class MissingNeighborValue(LocDynError, KeyError):
    pass


class ProtocolViolation(LocDynError, RuntimeError):
    """A node tried to read state it never received from a neighbor."""


class CovarianceNotPSD(LocDynError, ArithmeticError):
    pass


class LengthMismatch(LocDynError, ValueError):
    pass


class EmptyInput(LocDynError, ValueError):
    pass
