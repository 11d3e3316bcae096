"""Exception types raised across the package.

The CLI maps each family to an exit status: configuration problems exit 1,
data problems exit 2 and numerical failures exit 3.
"""


class RbmError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(RbmError):
    pass


class ParseError(ConfigError):
    """A config file could not be parsed; the message names the field or line."""


class DataError(RbmError):
    pass


class BadMagic(DataError):
    pass


class Truncated(DataError):
    pass


class EmptyDataset(DataError):
    pass


class EmptyBatch(DataError):
    pass


class DimensionMismatch(DataError, ValueError):
    pass


class NumericalError(RbmError):
    pass


class NumericalFailure(NumericalError):
    pass


class DegenerateWeights(NumericalError):
    pass


class DegenerateMode(NumericalError):
    pass


class TooLarge(NumericalError):
    """Exact enumeration was requested on a model that is too big for it."""


class NoChains(RbmError, ValueError):
    pass


class MissingPersistentStore(ConfigError):
    pass


class IndexOutOfRange(RbmError, IndexError):
    pass


class NotOrthonormal(RbmError, ValueError):
    pass


class BinMismatch(RbmError, ValueError):
    pass
