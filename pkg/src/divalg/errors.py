"""Exception hierarchy shared across the package."""


class DivalgError(Exception):
    """Base class for all package errors."""


class AlgebraMismatchError(DivalgError):
    """Operands carry different algebra tags."""


class ShapeMismatchError(DivalgError):
    """Matrix dimensions are incompatible with the requested operation."""


class UnsupportedAlgebraError(DivalgError):
    """Operation is undefined for this algebra (octonion matrix results are conjectural)."""


class ScalarDivisionError(DivalgError):
    """Inverse of the zero scalar requested."""


class DegenerateSpectrumError(DivalgError):
    """Eigen/singular values closer than the gap tolerance; the manifold assumes distinct spectra."""


class NotPsdError(DivalgError):
    """Matrix has a negative eigenvalue beyond tolerance where positive semidefiniteness is required."""


class PivotRequiredError(DivalgError):
    """Leading block is rank-deficient or not positive definite; re-pivot the input first."""


class SingularBlockError(DivalgError):
    """Pivoted leading block is numerically singular."""


class RankError(DivalgError):
    """Numerical rank is inconsistent with the requested rank q."""


class DomainError(DivalgError):
    """Scalar function evaluated outside its domain of definition."""


class ConditioningError(DivalgError):
    """Numerically singular Gram or Jacobian matrix."""


class InternalConsistencyError(DivalgError):
    """An invariant the implementation relies on was violated (e.g. embedding multiplets)."""


class RegistryError(DivalgError):
    """Theorem/engine pairing not admissible, or unknown task."""


class ConfigurationError(DivalgError):
    """Task parameters are infeasible (e.g. rejection rate above 99%)."""


class InconclusiveStatisticsError(DivalgError):
    """Monte-Carlo standard error too large relative to the estimate; raise the trial count."""
