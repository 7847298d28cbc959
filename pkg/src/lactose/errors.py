"""Exception taxonomy shared by all modules."""


class LactoseError(Exception):
    """Base class for every error this package raises on purpose."""


class ShapeError(LactoseError):
    """Dimensions or layouts do not line up."""


class NumericError(LactoseError):
    """A value that must be finite is NaN or infinite."""


class RoutingError(LactoseError):
    """The routing value cannot be mapped to a branch."""


class ValidationError(LactoseError):
    """An input object violates its declared invariants."""


class ConsistencyError(LactoseError):
    """Two objects that must belong together do not."""


class BankFormatError(LactoseError):
    """A persisted bank file is missing, corrupt, or unsupported."""


class ConfigError(LactoseError):
    """An experiment config is malformed; the message names the field."""
