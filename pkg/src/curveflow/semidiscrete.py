"""Semi-discrete polygonal evolution ``dX_k/dt = V_k N_k + W_k T_k``.

Tangential velocities follow the asymptotic uniform distribution (AUD)
method with a constant relaxation rate ``omega``.  Also hosts the classical
RK4 integrator used as the explicit reference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlowUp, GeometryError, MfsError
from .flows import FlowModel, normal_velocity
from .geometry import EdgeFrame, VertexFrame, as_vertices, frames


def telescoping_solve(a: np.ndarray, b: np.ndarray, rhs: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Solve ``a[k] W[k] - b[k] W[k-1] = rhs[k]`` for ``k = 1..N-1`` with ``sum(weights * W) = 0``.

    Forward elimination writes ``W = p + q W[0]``; the weighted closure then
    fixes ``W[0]``.  Row ``k = 0`` is ignored (it is implied by the others in
    both the semi-discrete and the fully discrete AUD systems).
    """
    a = np.asarray(a, dtype=float)
    if np.any(a[1:] == 0.0) or not np.all(np.isfinite(a)):
        raise GeometryError("singular telescoping coefficient")
    ratio = np.ones_like(a)
    ratio[1:] = b[1:] / a[1:]
    q = np.cumprod(ratio)
    src = np.zeros_like(a)
    src[1:] = rhs[1:] / (a[1:] * q[1:])
    p = q * np.cumsum(src)
    W0 = -np.dot(weights, p) / np.dot(weights, q)
    return p + q * W0


def vertex_normal_velocity(v: np.ndarray, vertices: VertexFrame) -> np.ndarray:
    """``V_k = (v_k + v_{k+1}) / (2 cos(phi_k / 2))``."""
    return (v + np.roll(v, -1)) / (2.0 * vertices.cos_half)


def aud_tangential_velocity(
    edges: EdgeFrame,
    vertices: VertexFrame,
    V: np.ndarray,
    v: np.ndarray,
    omega: float,
) -> np.ndarray:
    """AUD tangential velocities with zero weighted mean ``sum W (r_k + r_{k+1})/2``.

    The length rate entering the compatibility condition is the exact
    semi-discrete one, ``sum kappa v r``.
    """
    r = edges.r
    N = r.size
    L = r.sum()
    dL = float(np.sum(edges.kappa * v * r))
    Vs = V * vertices.sin_half
    psi = -Vs - np.roll(Vs, 1) + dL / N + (L / N - r) * omega
    c = vertices.cos_half
    return telescoping_solve(c, np.roll(c, 1), psi, 0.5 * (r + np.roll(r, -1)))


@dataclass(frozen=True, eq=False)
class Evaluation:
    edges: EdgeFrame
    vertices: VertexFrame
    v: np.ndarray
    V: np.ndarray
    W: np.ndarray
    velocity: np.ndarray

    def area_rate_defect(self) -> float:
        """``err_A``: the part of dA/dt not captured by ``sum v r``."""
        r, v = self.edges.r, self.v
        dr = np.roll(r, -1) - r
        dv = np.roll(v, -1) - v
        return float(np.sum((self.W * self.vertices.sin_half - 0.5 * dv) * 0.5 * dr))


def evaluate(curve, model: FlowModel, omega: float) -> Evaluation:
    edges, verts = frames(curve)
    v = normal_velocity(model, edges)
    V = vertex_normal_velocity(v, verts)
    W = aud_tangential_velocity(edges, verts, V, v, omega)
    vel = V[:, None] * verts.N + W[:, None] * verts.T
    return Evaluation(edges, verts, v, V, W, vel)


def rhs(curve, model: FlowModel, omega: float = 0.0) -> np.ndarray:
    """Vertex velocities ``V N + W T`` as an ``(N, 2)`` array."""
    return evaluate(curve, model, omega).velocity


@dataclass(frozen=True)
class SemiDiscreteRhs:
    """Callable right-hand side ``F(X)`` of the polygonal ODE."""

    model: FlowModel
    omega: float = 0.0

    def __post_init__(self):
        if self.omega < 0:
            raise ValueError("omega must be non-negative")

    def __call__(self, X) -> np.ndarray:
        return rhs(X, self.model, self.omega)


def rk4_step(curve, dt: float, F) -> np.ndarray:
    """One classical RK4 step of ``dX/dt = F(X)``.

    A non-finite stage, or a stage polygon the geometry cannot handle,
    is reported as :class:`BlowUp`.
    """
    X = np.array(as_vertices(curve), dtype=float)
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return X

    def stage(Y):
        if not np.all(np.isfinite(Y)):
            raise BlowUp("explicit blow-up: non-finite stage")
        try:
            with np.errstate(over="raise", invalid="raise"):
                k = F(Y)
        except (GeometryError, MfsError, FloatingPointError) as exc:
            raise BlowUp(f"explicit blow-up: {exc}") from exc
        if not np.all(np.isfinite(k)):
            raise BlowUp("explicit blow-up: non-finite stage")
        return k

    k1 = stage(X)
    k2 = stage(X + 0.5 * dt * k1)
    k3 = stage(X + 0.5 * dt * k2)
    k4 = stage(X + dt * k3)
    out = X + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise BlowUp("explicit blow-up: non-finite update")
    return out
