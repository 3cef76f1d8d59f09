class CosalError(Exception):
    """Base class for all package errors."""


class IoError(CosalError, OSError):
    pass


class FormatError(CosalError, ValueError):
    pass


class InvalidArg(CosalError, ValueError):
    pass


class DimMismatch(CosalError, ValueError):
    pass


class EmptyRegion(CosalError, ValueError):
    pass


class DegenerateSeeds(CosalError, RuntimeError):
    """No usable seeds for a propagation step."""


class InvalidData(CosalError, ValueError):
    pass


class EmptyGroundTruth(CosalError, ValueError):
    pass
