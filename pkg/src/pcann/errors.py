"""Exception hierarchy shared by every pcann module."""


class PcannError(Exception):
    """Base class for all pcann errors."""


class DataError(PcannError):
    """Input data could not be parsed or is unusable."""


class WrongMagic(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class Truncated(DataError):
    """A file ended before its declared payload."""


class InvalidLabel(DataError):
    pass


class ZeroNorm(DataError):
    """A blank image has no direction on the unit sphere."""


class NumericalFailure(PcannError):
    pass


class MissingDiagonal(PcannError):
    """Some class kept no diagonal bucket during refinement."""


class ModelFileError(DataError):
    pass


class BadMagic(ModelFileError):
    pass


class UnsupportedVersion(ModelFileError):
    pass


class ChecksumMismatch(ModelFileError):
    pass


class UnknownClass(PcannError):
    pass


class CountTooLarge(PcannError):
    pass
