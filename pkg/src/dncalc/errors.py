"""Exception hierarchy shared by all layers of the package."""


class DnCalcError(Exception):
    """Base class for every error raised by this package."""


class IncompatibleJetsError(DnCalcError):
    """Jets from different ambient spaces (dimension, base point, backend)."""


class BudgetExhaustedError(DnCalcError):
    """A derivative was requested but the truncation order is already zero."""


class BackendError(DnCalcError):
    """Operation not representable in the active scalar backend."""


class NotInvertibleError(DnCalcError):
    """Reciprocal/root of a jet whose constant term does not allow it."""


class MetricError(DnCalcError):
    """Boundary metric data fails symmetry or positivity requirements."""


class DepthError(DnCalcError):
    """Requested symbol depth is invalid or exceeds what the data supports."""


class DataError(DnCalcError):
    """DN symbol data is malformed or inconsistent (wrong kind, gauge, sign)."""


class ReconstructionError(DnCalcError):
    """An inversion step degenerated (singular pivot, no real root, ...)."""


class ScenarioError(DnCalcError):
    """Scenario file failed to parse or validate."""
