"""Exception types shared across the engine."""


class GeometryError(Exception):
    """Base class for chart/metric/tensor evaluation failures."""


class DomainError(GeometryError):
    """Point outside the margined interior of a chart."""


class SingularMetricError(GeometryError):
    """Metric not invertible (or not positive definite) at a sample point."""


class OrderBudgetError(GeometryError):
    """A computation would need Taylor data beyond the supported order."""


class ValenceError(GeometryError):
    """Tensor valence incompatible with the requested operation."""


class NotApplicableError(GeometryError):
    """Identity precondition unmet; distinct from a failing residual."""


class BoundaryConditionError(GeometryError):
    """Profile rejected by the smoothness analyzer.

    ``end`` records which end of the interval failed ("origin" or "far").
    """

    def __init__(self, message: str, end: str = ""):
        super().__init__(message)
        self.end = end


class QuadratureError(GeometryError):
    """Adaptive quadrature failed to converge to the requested tolerance."""


class ConfigError(Exception):
    """Config syntax or constraint violation.

    ``line`` is the 1-based line number for syntax errors, ``field`` the
    dotted key path for constraint violations.
    """

    def __init__(self, message: str, line: int | None = None, field: str = ""):
        super().__init__(message)
        self.line = line
        self.field = field
