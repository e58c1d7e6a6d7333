"""Exception types shared across the package."""


class BetaIotaError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(BetaIotaError):
    pass


class InvalidParameter(BetaIotaError):
    def __init__(self, field, message=""):
        self.field = field
        super().__init__(f"invalid parameter '{field}': {message}" if message
                         else f"invalid parameter '{field}'")


class ParseError(BetaIotaError):
    def __init__(self, line, message=""):
        self.line = line
        super().__init__(f"parse error at line {line}: {message}")


class SchemaError(BetaIotaError):
    pass


class ScaleBelowResolution(BetaIotaError):
    pass


class DegenerateDiameter(BetaIotaError):
    pass


class UnknownCube(BetaIotaError):
    pass


class DepthExceeded(BetaIotaError):
    pass


class TooFewPoints(BetaIotaError):
    pass


class DegenerateCube(BetaIotaError):
    pass


class DegenerateSimplex(BetaIotaError):
    pass


class PointsNotIndependent(BetaIotaError):
    pass


class NonIsotropicPlane(BetaIotaError):
    pass


class IsometryViolation(BetaIotaError):
    pass


class MetricUnsupported(BetaIotaError):
    pass
