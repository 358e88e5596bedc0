"""Exception types shared across the package."""


class TunekitError(Exception):
    """Base class for every error this package raises on purpose."""


class UnknownModel(TunekitError):
    pass


class AmbiguousModel(TunekitError):
    pass


class ParseError(TunekitError):
    pass


class UnknownDataset(TunekitError):
    pass


class DataFileMissing(TunekitError):
    pass


class EmptyField(TunekitError):
    pass


class UnknownKey(TunekitError):
    pass


class TypeMismatch(TunekitError):
    pass


class InvariantViolation(TunekitError):
    pass


class NoFeasiblePlan(TunekitError):
    pass


class EmptyInventory(TunekitError):
    pass


class ProtocolError(TunekitError):
    pass


class BadSpec(TunekitError):
    pass


class DimensionMismatch(TunekitError):
    pass


class ShapeMismatch(TunekitError):
    pass


class EmptyDataset(TunekitError):
    pass


class SchemaVersionMismatch(TunekitError):
    pass


class NonMonotonicStep(TunekitError):
    pass
