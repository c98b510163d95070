"""Exception types shared across the package."""


class QuanvnetError(Exception):
    """Base class for all errors raised by quanvnet."""


class CapacityError(QuanvnetError, ValueError):
    """Requested size exceeds a hard resource cap (e.g. qubit count)."""


class ParameterError(QuanvnetError, ValueError):
    """Gate parameters do not match the gate kind's arity."""


class QubitIndexError(QuanvnetError, IndexError):
    """A qubit index is out of range or control equals target."""


class DimensionError(QuanvnetError, ValueError):
    """Array shapes are inconsistent with the operation's contract."""


class DecodeError(QuanvnetError, ValueError):
    """Input bytes cannot be decoded (bad header, truncation, ...)."""


class ConfigurationError(QuanvnetError, ValueError):
    """Dataset layout or run configuration is unusable."""


class ValidationError(QuanvnetError, ValueError):
    """Input values violate a documented precondition."""
