"""Exception taxonomy.

Three branches, one per CLI exit code: configuration problems (exit 2),
data problems (exit 3), numerical failures (exit 4).
"""


class CdfagError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(CdfagError):
    exit_code = 2


class DataError(CdfagError):
    exit_code = 3


class NumericalError(CdfagError):
    exit_code = 4


# -- configuration -----------------------------------------------------------

class BadConfig(ConfigError):
    pass


class BadSpec(ConfigError):
    pass


# -- data ---------------------------------------------------------------------

class InsufficientData(DataError):
    pass


class NonFiniteInput(DataError):
    pass


class EmptyInput(DataError):
    pass


class DegenerateData(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class AsymmetricInput(DataError):
    pass


class InsufficientLabels(DataError):
    pass


class UnknownDomain(DataError):
    pass


class MissingClass(DataError):
    pass


class SingleClass(DataError):
    pass


class TooFewSamples(DataError):
    pass


class LengthMismatch(DataError):
    pass


class SplitTooLarge(DataError):
    pass


class ClassSetMismatch(DataError):
    pass


class CorruptModel(DataError):
    pass


class VersionMismatch(DataError):
    pass


# -- numerics -----------------------------------------------------------------

class SingularPencil(NumericalError):
    pass


class NonConvergence(NumericalError):
    pass


class NonFiniteLoss(NumericalError):
    pass
