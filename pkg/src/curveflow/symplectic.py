"""Canonical Runge-Kutta stepping of the semi-discrete polygonal law.

Canonical tableaus preserve quadratic invariants of the flow they
integrate.  Enclosed area is quadratic in the vertices, so with uniformly
spaced vertices and AUD tangential motion the area follows
``dA/dt = sum v r`` exactly at the discrete level; for the area-preserving
flows it is then constant up to solver tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CurveFlowError, StepRejected
from .flows import FlowModel
from .geometry import as_vertices
from .newton import newton_solve
from .semidiscrete import evaluate

CANONICAL_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    a: np.ndarray
    b: np.ndarray
    name: str = ""

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if a.shape != (b.size, b.size):
            raise ValueError("a must be s x s with s = len(b)")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def stages(self) -> int:
        return self.b.size

    @property
    def canonical(self) -> bool:
        return canonical_check(self)


def canonical_check(tableau: ButcherTableau, tol: float = CANONICAL_TOL) -> bool:
    """``b_j a_jk + b_k a_kj = b_j b_k`` for all ``j, k``."""
    a, b = tableau.a, tableau.b
    M = b[:, None] * a + (b[:, None] * a).T - np.outer(b, b)
    return bool(np.all(np.abs(M) <= tol))


_S3 = np.sqrt(3.0)
MIDPOINT = ButcherTableau([[0.5]], [1.0], "midpoint")
GAUSS2 = ButcherTableau([[0.25, 0.25 - _S3 / 6.0], [0.25 + _S3 / 6.0, 0.25]], [0.5, 0.5], "gauss2")
EULER = ButcherTableau([[0.0]], [1.0], "euler")
RK4 = ButcherTableau(
    [[0, 0, 0, 0], [0.5, 0, 0, 0], [0, 0.5, 0, 0], [0, 0, 1.0, 0]],
    [1 / 6, 1 / 3, 1 / 3, 1 / 6],
    "rk4",
)


@dataclass(frozen=True, eq=False)
class SrkResult:
    X: np.ndarray
    dt: float
    stages: np.ndarray
    iterations: int
    residual: float
    area_rate: float
    area_defects: np.ndarray

    @property
    def max_area_defect(self) -> float:
        return float(np.max(np.abs(self.area_defects))) if self.area_defects.size else 0.0


def srk_step(
    X,
    dt: float,
    model: FlowModel,
    omega: float,
    tableau: ButcherTableau = MIDPOINT,
    tol: float = 1e-8,
    max_iter: int = 50,
) -> SrkResult:
    """Solve all stage equations ``Y_i = X + dt sum_j a_ij F(Y_j)`` with one Newton.

    ``area_rate`` is ``sum_k b_k sum_i v_i r_i`` over the stages and
    ``area_defects`` holds the per-stage ``err_A`` terms.
    """
    if not canonical_check(tableau):
        raise ValueError(f"tableau {tableau.name or '?'} is not canonical")
    X = np.array(as_vertices(X), dtype=float)
    s = tableau.stages
    if dt == 0:
        return SrkResult(X, 0.0, np.repeat(X[None], s, axis=0), 0, 0.0, 0.0, np.zeros(0))
    if dt < 0:
        raise ValueError("dt must be non-negative")
    shape = (s,) + X.shape

    def velocities(Y):
        return np.stack([evaluate(Y[i], model, omega).velocity for i in range(s)])

    def fun(z):
        Y = z.reshape(shape)
        K = velocities(Y)
        return (Y - X - dt * np.einsum("ij,jkl->ikl", tableau.a, K)).ravel()

    try:
        sol = newton_solve(fun, np.tile(X.ravel(), s), tol=tol, max_iter=max_iter)
    except CurveFlowError as exc:
        raise StepRejected(f"step rejected: {exc}") from exc
    if not sol.converged:
        raise StepRejected(f"step rejected: stage residual {sol.residual:.3e} after {sol.iterations} iterations")
    Y = sol.x.reshape(shape)
    evals = [evaluate(Y[i], model, omega) for i in range(s)]
    K = np.stack([e.velocity for e in evals])
    X_new = X + dt * np.einsum("i,ikl->kl", tableau.b, K)
    rate = float(sum(bk * np.dot(e.v, e.edges.r) for bk, e in zip(tableau.b, evals)))
    defects = np.array([e.area_rate_defect() for e in evals])
    return SrkResult(X_new, dt, Y, sol.iterations, sol.residual, rate, defects)
