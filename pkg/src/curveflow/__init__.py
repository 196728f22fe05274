"""Curve-shortening polygonal schemes for planar moving-boundary problems."""

from .errors import BlowUp, ConfigError, CurveFlowError, GeometryError, MfsError, StepRejected
from .flows import FlowModel, SingularPointRule, solve_mfs
from .geometry import PolygonalCurve, edge_frame, enclosed_area, length, vertex_frame

__version__ = "0.1.0"

__all__ = [
    "BlowUp",
    "ConfigError",
    "CurveFlowError",
    "FlowModel",
    "GeometryError",
    "MfsError",
    "PolygonalCurve",
    "SingularPointRule",
    "StepRejected",
    "edge_frame",
    "enclosed_area",
    "length",
    "solve_mfs",
    "vertex_frame",
]
