"""Normal velocity models and the fundamental-solution Laplace solver.

Every model maps a frame (anything exposing ``vertices``, ``r``, ``n`` and
``kappa`` per edge, i.e. an :class:`~curveflow.geometry.EdgeFrame` or a
:class:`~curveflow.fullydiscrete.MidpointFrame`) to per-edge normal
velocities ``v``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .errors import MfsError
from .geometry import points_inside

MFS_CONDITION_LIMIT = 1e14

KINDS = ("mcf", "apmcf", "heleshaw", "zero")
FLUX_RULES = ("average", "midpoint")


@dataclass(frozen=True)
class SingularPointRule:
    """Place source ``j`` at ``m_j + rho * r_j * n_j`` outside edge ``j``."""

    rho: float = 1.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")

    def __call__(self, midpoints: np.ndarray, normals: np.ndarray, lengths: np.ndarray) -> np.ndarray:
        return midpoints + (self.rho * lengths)[:, None] * normals


@dataclass(frozen=True)
class FlowModel:
    """Which flow drives the curve.

    ``zero`` is the still flow (``v = 0``) used for vertex redistribution.
    ``flux`` picks how Hele-Shaw reads ``grad P . n`` on an edge: its exact
    edge mean (``average``, keeps ``sum v r = 0``) or its midpoint value.
    """

    kind: str
    sigma: float = 1.0
    placement: SingularPointRule = field(default_factory=SingularPointRule)
    flux: str = "average"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown flow {self.kind!r}; expected one of {KINDS}")
        if self.kind == "heleshaw" and not self.sigma > 0:
            raise ValueError("surface tension sigma must be positive")
        if self.flux not in FLUX_RULES:
            raise ValueError(f"unknown flux rule {self.flux!r}; expected one of {FLUX_RULES}")

    @classmethod
    def mcf(cls) -> "FlowModel":
        return cls("mcf")

    @classmethod
    def apmcf(cls) -> "FlowModel":
        return cls("apmcf")

    @classmethod
    def hele_shaw(cls, sigma: float = 1.0, rho: float = 1.0, flux: str = "average") -> "FlowModel":
        return cls("heleshaw", sigma=sigma, placement=SingularPointRule(rho), flux=flux)

    @classmethod
    def zero(cls) -> "FlowModel":
        return cls("zero")


def fundamental_solution(x: np.ndarray) -> np.ndarray:
    """``E(x) = log|x| / (2 pi)`` for an array of planar points."""
    x = np.asarray(x, dtype=float)
    return np.log(np.hypot(x[..., 0], x[..., 1])) / (2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class MfsSystem:
    """Solved expansion ``P(x) = Q0 + sum_j Q[j] E(x - y[j])``."""

    Q0: float
    Q: np.ndarray
    sources: np.ndarray
    collocation: np.ndarray
    condition: float

    def potential(self, points) -> np.ndarray:
        P = np.atleast_2d(np.asarray(points, dtype=float))
        E = fundamental_solution(P[:, None, :] - self.sources[None, :, :])
        return self.Q0 + E @ self.Q

    def gradient(self, points) -> np.ndarray:
        return mfs_gradient(self, points)


def solve_mfs(
    vertices: np.ndarray,
    data: np.ndarray,
    placement: SingularPointRule | None = None,
    *,
    normals: np.ndarray | None = None,
    lengths: np.ndarray | None = None,
    check_placement: bool = True,
) -> MfsSystem:
    """Collocate ``P = data`` at edge midpoints, closed by ``sum Q = 0``.

    ``normals`` and ``lengths`` default to those of the polygon itself.
    """
    X = np.asarray(vertices, dtype=float)
    N = X.shape[0]
    if N < 3:
        raise MfsError("need at least 3 edges")
    placement = placement or SingularPointRule()
    e = X - np.roll(X, 1, axis=0)
    if lengths is None:
        lengths = np.hypot(e[:, 0], e[:, 1])
    if normals is None:
        normals = np.column_stack([e[:, 1], -e[:, 0]]) / lengths[:, None]
    mids = 0.5 * (X + np.roll(X, 1, axis=0))
    y = placement(mids, normals, lengths)
    if check_placement:
        inside = np.flatnonzero(points_inside(X, y))
        if inside.size:
            raise MfsError(f"invalid placement: source {inside[0]} lies inside the domain")

    A = np.empty((N + 1, N + 1))
    A[:N, 0] = 1.0
    A[:N, 1:] = fundamental_solution(mids[:, None, :] - y[None, :, :])
    A[N, 0] = 0.0
    A[N, 1:] = 1.0
    rhs = np.zeros(N + 1)
    rhs[:N] = data

    lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    anorm = np.linalg.norm(A, 1)
    rcond, info = lapack.dgecon(lu, anorm, norm="1")
    cond = np.inf if rcond == 0.0 else 1.0 / rcond
    if info != 0 or not cond < MFS_CONDITION_LIMIT:
        raise MfsError(f"MFS ill-conditioned (condition estimate {cond:.3g})")
    coef = scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)
    return MfsSystem(Q0=float(coef[0]), Q=coef[1:], sources=y, collocation=mids, condition=float(cond))


def mfs_gradient(system: MfsSystem, points) -> np.ndarray:
    """``grad P(x) = sum_j Q_j (x - y_j) / (2 pi |x - y_j|^2)``."""
    P = np.asarray(points, dtype=float)
    single = P.ndim == 1
    P = np.atleast_2d(P)
    d = P[:, None, :] - system.sources[None, :, :]
    d2 = np.sum(d * d, axis=-1)
    if np.any(d2 == 0.0):
        raise MfsError("gradient evaluated at a singular point")
    g = np.einsum("ij,ijk->ik", system.Q[None, :] / (2.0 * np.pi * d2), d)
    return g[0] if single else g


def mfs_edge_flux(system: MfsSystem, vertices: np.ndarray) -> np.ndarray:
    """Integral of ``grad P . n`` over each edge ``X[k-1] -> X[k]``.

    Each source contributes ``Q_j`` times the angle the edge subtends at it
    over ``2 pi``, so the fluxes sum to zero around a closed polygon.
    """
    X = np.asarray(vertices, dtype=float)
    a = np.roll(X, 1, axis=0)[:, None, :] - system.sources[None, :, :]
    b = X[:, None, :] - system.sources[None, :, :]
    angle = np.arctan2(a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0], np.sum(a * b, axis=-1))
    return angle @ system.Q / (2.0 * np.pi)


def hele_shaw_system(model: FlowModel, frame) -> MfsSystem:
    return solve_mfs(
        frame.vertices, model.sigma * frame.kappa, model.placement, normals=frame.n, lengths=frame.r
    )


def normal_velocity(model: FlowModel, frame) -> np.ndarray:
    """Edge normal velocities of ``model`` evaluated on ``frame``."""
    kind = model.kind
    if kind == "mcf":
        return -frame.kappa
    if kind == "apmcf":
        mean = np.dot(frame.kappa, frame.r) / frame.r.sum()
        return mean - frame.kappa
    if kind == "heleshaw":
        system = hele_shaw_system(model, frame)
        if model.flux == "average":
            return -mfs_edge_flux(system, frame.vertices) / frame.r
        mids = 0.5 * (frame.vertices + np.roll(frame.vertices, 1, axis=0))
        grad = mfs_gradient(system, mids)
        return -np.sum(grad * frame.n, axis=1)
    return np.zeros_like(frame.r)
