"""
Errors - Eccezioni del laboratorio di gluing

Every failure mode of the numerical kernels has its own class so that suites can
record the error name per row and callers can re-chart, shrink δ or switch modes.
"""

from typing import Optional


class GluingLabError(Exception):
    """Base class for all lab errors"""


# --- surface charts ---------------------------------------------------------

class BranchCut(GluingLabError):
    """The square-root argument lies on the principal cut of the chosen chart"""

    def __init__(self, message: str, chart_id: Optional[str] = None):
        super().__init__(message)
        self.chart_id = chart_id


class DegenerateChart(GluingLabError):
    """The solved coordinate is too small for the chart to be trusted"""

    def __init__(self, message: str, chart_id: Optional[str] = None):
        super().__init__(message)
        self.chart_id = chart_id


class UnregisteredRadial(GluingLabError):
    """Analytic Hessian requested for a field without a registered Levi form"""


class StepUnderflow(GluingLabError):
    """Finite-difference step below 1e-12"""


class NotPositive(GluingLabError):
    """A (1,1)-form expected to be a metric is not positive definite"""

    def __init__(self, message: str, location: Optional[float] = None):
        super().__init__(message)
        self.location = location


# --- gluing models ----------------------------------------------------------

class ApexExcluded(GluingLabError):
    """Cone apex requested"""


class CollapsedLocus(GluingLabError):
    """Point inside the region where the smoothing map is undefined"""


# --- weighted analysis ------------------------------------------------------

class EmptySample(GluingLabError):
    pass


class NoValidPairs(GluingLabError):
    pass


class InvalidAlpha(GluingLabError, ValueError):
    pass


class DegenerateData(GluingLabError, ValueError):
    pass


# --- solver -----------------------------------------------------------------

class MetricDegenerate(GluingLabError):
    """ω̃ + i∂∂̄φ stopped being positive at some grid node"""

    def __init__(self, message: str, node: Optional[int] = None):
        super().__init__(message)
        self.node = node


class MaxIterations(GluingLabError):
    def __init__(self, message: str, iterations: int = 0, residual: float = float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class LineSearchStall(GluingLabError):
    def __init__(self, message: str, iterations: int = 0, residual: float = float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class SingularOperator(GluingLabError):
    pass


class GateRejected(GluingLabError):
    """The quantitative implicit-function test does not admit a contraction ball"""

    def __init__(self, message: str, gate=None, ift: Optional[dict] = None):
        super().__init__(message)
        self.gate = gate
        self.ift = ift


# --- GH experiments ---------------------------------------------------------

class OutOfRange(GluingLabError, ValueError):
    pass


class EmptyCorrespondence(GluingLabError):
    pass


# --- CLI --------------------------------------------------------------------

class DegreeOutOfRange(GluingLabError, ValueError):
    pass


class ConfigParseError(GluingLabError, ValueError):
    """Invalid configuration file; carries the line number and the `section.key` field"""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field is not None:
            location.append(field)
        prefix = f"[{', '.join(location)}] " if location else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field
