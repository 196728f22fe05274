"""Exception hierarchy shared by the solvers and the CLI."""


class CurveFlowError(Exception):
    """Base class for all errors raised by curveflow."""


class GeometryError(CurveFlowError):
    """Degenerate polygon: zero-length edge, fold-over or cusp."""


class MfsError(CurveFlowError):
    """Collocation system could not be set up or solved reliably."""


class StepRejected(CurveFlowError):
    """Nonlinear solve of an implicit step did not converge."""


class BlowUp(CurveFlowError):
    """Explicit integrator produced non-finite or runaway values."""


class ConfigError(CurveFlowError):
    """Invalid experiment configuration."""
