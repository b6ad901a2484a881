"""Exception hierarchy shared by every qprice module."""


class QPriceError(Exception):
    """Base class for all errors raised by qprice."""


# instance spaces
class SpaceTooLarge(QPriceError):
    pass


class IndexOutOfRange(QPriceError, IndexError):
    pass


class DatabaseNotInSpace(QPriceError, KeyError):
    pass


class InvalidSpace(QPriceError, ValueError):
    pass


# query engine
class UnknownRelation(QPriceError, KeyError):
    pass


class ArityMismatch(QPriceError, ValueError):
    pass


class InvalidQuery(QPriceError, ValueError):
    pass


# lattice
class UniverseMismatch(QPriceError, ValueError):
    pass


class EmptySupport(QPriceError, ValueError):
    pass


# pricing
class UnrealizedLabel(QPriceError, ValueError):
    """The answer is not produced by any database of the space."""


class TooManyViews(QPriceError, ValueError):
    pass


class NonUniformDistribution(QPriceError, ValueError):
    pass


class InvalidParameter(QPriceError, ValueError):
    pass


# lab
class BudgetExceeded(QPriceError):
    pass


class ConstantBundle(QPriceError, ValueError):
    pass


class UnsupportedSpace(QPriceError, ValueError):
    pass


class ZeroSamples(QPriceError, ValueError):
    pass


# cli
class ConfigError(QPriceError, ValueError):
    pass


class UnknownDemo(QPriceError, KeyError):
    pass


class ModeMismatch(QPriceError, ValueError):
    """An APS scheme used where a QPS scheme is required, or vice versa."""
