"""Closed polygonal curves and their discrete differential geometry.

Indexing convention (0-based, periodic): vertex ``k`` is ``X[k]``; edge ``k``
joins ``X[k-1]`` to ``X[k]``; vertex ``k`` sits between edge ``k`` and edge
``k+1``, so the turning angle ``phi[k]`` is measured from ``t[k]`` to
``t[k+1]``.  All per-edge and per-vertex arrays have length ``N``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError

# rotation by pi/2; outward normal of a counterclockwise curve is -J t
J = np.array([[0.0, -1.0], [1.0, 0.0]])


def rot90(v: np.ndarray) -> np.ndarray:
    """Apply ``J`` to an array of planar vectors (last axis of size 2)."""
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    return out


def as_vertices(curve) -> np.ndarray:
    """Vertex array of a :class:`PolygonalCurve` or anything array-like."""
    if isinstance(curve, PolygonalCurve):
        return curve.vertices
    return np.asarray(curve, dtype=float)


def signed_area(X: np.ndarray) -> float:
    """Shoelace area; positive for counterclockwise vertex order."""
    Xp = np.roll(X, 1, axis=0)
    return 0.5 * float(np.sum(Xp[:, 0] * X[:, 1] - Xp[:, 1] * X[:, 0]))


def edge_lengths(X: np.ndarray) -> np.ndarray:
    e = X - np.roll(X, 1, axis=0)
    return np.hypot(e[:, 0], e[:, 1])


@dataclass(frozen=True, eq=False)
class PolygonalCurve:
    """Closed counterclockwise polygon with ``N >= 3`` distinct consecutive vertices.

    The vertex array is copied and made read-only on construction.
    Clockwise input is rejected rather than reversed.
    """

    vertices: np.ndarray

    def __post_init__(self):
        X = np.array(self.vertices, dtype=float)
        if X.ndim != 2 or X.shape[1] != 2:
            raise GeometryError(f"vertices must have shape (N, 2), got {X.shape}")
        if X.shape[0] < 3:
            raise GeometryError("a polygon needs at least 3 vertices")
        if not np.all(np.isfinite(X)):
            raise GeometryError("non-finite vertex coordinates")
        r = edge_lengths(X)
        bad = np.flatnonzero(r == 0.0)
        if bad.size:
            raise GeometryError(f"degenerate edge {bad[0]}")
        if signed_area(X) <= 0.0:
            raise GeometryError("curve must be oriented counterclockwise")
        X.setflags(write=False)
        object.__setattr__(self, "vertices", X)

    @property
    def n(self) -> int:
        return self.vertices.shape[0]

    def __len__(self) -> int:
        return self.n

    def length(self) -> float:
        return length(self)

    def area(self) -> float:
        return enclosed_area(self)

    def translated(self, shift) -> "PolygonalCurve":
        return PolygonalCurve(self.vertices + np.asarray(shift, dtype=float))


@dataclass(frozen=True, eq=False)
class EdgeFrame:
    """Per-edge quantities of a single polygon.

    ``phi`` is per vertex but lives here because the curvature needs it.
    """

    vertices: np.ndarray
    r: np.ndarray
    t: np.ndarray
    n: np.ndarray
    phi: np.ndarray
    kappa: np.ndarray

    @property
    def length(self) -> float:
        return float(self.r.sum())

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices + np.roll(self.vertices, 1, axis=0))


@dataclass(frozen=True, eq=False)
class VertexFrame:
    phi: np.ndarray
    T: np.ndarray
    N: np.ndarray
    cos_half: np.ndarray
    sin_half: np.ndarray


def turning_angles(t: np.ndarray) -> np.ndarray:
    """Signed angle from ``t[k]`` to ``t[k+1]`` in ``(-pi, pi]``."""
    t_next = np.roll(t, -1, axis=0)
    cross = t[:, 0] * t_next[:, 1] - t[:, 1] * t_next[:, 0]
    dot = np.sum(t * t_next, axis=1)
    return np.arctan2(cross, dot)


def edge_frame(curve) -> EdgeFrame:
    """Edge lengths, unit tangents/normals, turning angles and curvature.

    Raises GeometryError on a zero-length edge or a fold-over (``|phi| >= pi``).
    """
    X = as_vertices(curve)
    e = X - np.roll(X, 1, axis=0)
    r = np.hypot(e[:, 0], e[:, 1])
    bad = np.flatnonzero(~(r > 0.0))
    if bad.size:
        raise GeometryError(f"degenerate edge {bad[0]}")
    t = e / r[:, None]
    n = -rot90(t)
    phi = turning_angles(t)
    bad = np.flatnonzero(np.abs(phi) >= np.pi)
    if bad.size:
        raise GeometryError(f"angle overflow at vertex {bad[0]}")
    tan_half = np.tan(0.5 * phi)
    kappa = (tan_half + np.roll(tan_half, 1)) / r
    return EdgeFrame(vertices=X, r=r, t=t, n=n, phi=phi, kappa=kappa)


def vertex_frame(curve, edges: EdgeFrame | None = None) -> VertexFrame:
    """Vertex tangents ``T = av(t)`` and outward normals ``N = -J T``."""
    if edges is None:
        edges = edge_frame(curve)
    phi = edges.phi
    c = np.cos(0.5 * phi)
    bad = np.flatnonzero(c <= 0.0)
    if bad.size:
        raise GeometryError(f"cusp at vertex {bad[0]}")
    T = (edges.t + np.roll(edges.t, -1, axis=0)) / (2.0 * c[:, None])
    return VertexFrame(phi=phi, T=T, N=-rot90(T), cos_half=c, sin_half=np.sin(0.5 * phi))


def frames(curve) -> tuple[EdgeFrame, VertexFrame]:
    edges = edge_frame(curve)
    return edges, vertex_frame(curve, edges)


def average(values: np.ndarray, edges: EdgeFrame) -> float:
    """Length-weighted mean of an edge quantity."""
    return float(np.dot(values, edges.r) / edges.r.sum())


def length(curve) -> float:
    return float(edge_lengths(as_vertices(curve)).sum())


def enclosed_area(curve) -> float:
    """Signed enclosed area (negative for clockwise vertex order)."""
    return signed_area(as_vertices(curve))


def uniformity(curve) -> float:
    """``max_k |r_k - L/N|``."""
    r = edge_lengths(as_vertices(curve))
    return float(np.max(np.abs(r - r.mean())))


def is_simple(curve) -> bool:
    """O(N^2) check that no two non-adjacent edges intersect."""
    X = as_vertices(curve)
    N = X.shape[0]
    A = np.roll(X, 1, axis=0)
    B = X

    def orient(p, q, s):
        return (q[..., 0] - p[..., 0]) * (s[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (
            s[..., 0] - p[..., 0]
        )

    Ai, Bi = A[:, None, :], B[:, None, :]
    Aj, Bj = A[None, :, :], B[None, :, :]
    d1 = orient(Ai, Bi, Aj)
    d2 = orient(Ai, Bi, Bj)
    d3 = orient(Aj, Bj, Ai)
    d4 = orient(Aj, Bj, Bi)
    cross = (d1 * d2 < 0) & (d3 * d4 < 0)
    idx = np.arange(N)
    gap = np.abs(idx[:, None] - idx[None, :])
    adjacent = (gap <= 1) | (gap == N - 1)
    return not np.any(cross & ~adjacent)


def regular_polygon(N: int, radius: float = 1.0, center=(0.0, 0.0), phase: float = 0.0) -> PolygonalCurve:
    """Regular N-gon inscribed in a circle, counterclockwise."""
    s = phase + 2.0 * np.pi * np.arange(N) / N
    X = np.column_stack([np.cos(s), np.sin(s)]) * radius + np.asarray(center, dtype=float)
    return PolygonalCurve(X)


def points_inside(X: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Even-odd ray test for ``points`` against the polygon ``X``."""
    P = np.asarray(points, dtype=float)
    A = np.roll(X, 1, axis=0)
    B = X
    px = P[:, None, 0]
    py = P[:, None, 1]
    straddle = (A[None, :, 1] > py) != (B[None, :, 1] > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_hit = A[None, :, 0] + (py - A[None, :, 1]) * (B[None, :, 0] - A[None, :, 0]) / (
            B[None, :, 1] - A[None, :, 1]
        )
    hits = straddle & (px < x_hit)
    return (np.count_nonzero(hits, axis=1) % 2) == 1
