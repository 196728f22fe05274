"""Globalized Newton iteration with a forward-difference Jacobian.

Two globalizations are available: a Powell dogleg trust region (default)
and Armijo backtracking along the Newton direction.  The trust region is
needed for large redistribution steps, where the Newton direction at the
old curve is dominated by the rotation of the vertex tangents and a line
search along it stalls.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import CurveFlowError

log = logging.getLogger(__name__)


@dataclass
class NewtonResult:
    x: np.ndarray
    converged: bool
    iterations: int
    residual: float
    history: list[float] = field(default_factory=list)
    merit: list[float] = field(default_factory=list)
    damped: bool = False


def fd_jacobian(fun: Callable[[np.ndarray], np.ndarray], x: np.ndarray, f0: np.ndarray, rel_step: float = 1e-7) -> np.ndarray:
    """Forward differences with step ``rel_step * (1 + |x_j|)`` per column."""
    n = x.size
    Jac = np.empty((f0.size, n))
    xp = x.copy()
    for j in range(n):
        h = rel_step * (1.0 + abs(x[j]))
        xp[j] = x[j] + h
        Jac[:, j] = (fun(xp) - f0) / h
        xp[j] = x[j]
    return Jac


def _safe_eval(fun, x):
    try:
        with np.errstate(all="ignore"):
            f = fun(x)
    except (CurveFlowError, FloatingPointError, np.linalg.LinAlgError):
        return None
    if not np.all(np.isfinite(f)):
        return None
    return f


def _newton_direction(Jac, f):
    try:
        lu = scipy.linalg.lu_factor(Jac, check_finite=False)
        d = -scipy.linalg.lu_solve(lu, f, check_finite=False)
    except (ValueError, np.linalg.LinAlgError):
        return None
    return d if np.all(np.isfinite(d)) else None


def _dogleg(Jac, f, p_newton, radius):
    if p_newton is not None and np.linalg.norm(p_newton) <= radius:
        return p_newton
    g = Jac.T @ f
    Jg = Jac @ g
    gg = float(g @ g)
    if gg == 0.0:
        return np.zeros_like(f)
    p_c = -(gg / float(Jg @ Jg)) * g
    nc = np.linalg.norm(p_c)
    if p_newton is None or nc >= radius:
        return -radius * g / np.sqrt(gg)
    # point on segment p_c -> p_newton at distance radius
    d = p_newton - p_c
    a = float(d @ d)
    b = 2.0 * float(p_c @ d)
    c = nc**2 - radius**2
    s = (-b + np.sqrt(b * b - 4.0 * a * c)) / (2.0 * a)
    return p_c + s * d


def newton_solve(
    fun: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 50,
    rel_step: float = 1e-7,
    method: str = "dogleg",
    polish: bool = False,
) -> NewtonResult:
    """Solve ``fun(x) = 0`` until ``max|fun(x)| <= tol``.

    With ``polish`` one more full Newton step is tried after convergence and
    kept only if it lowers the residual.

    Evaluations that fail (degenerate geometry, non-finite output) are
    treated as infinitely bad trial points.  ``merit`` records ``|fun|_2``
    at every accepted iterate; it is non-increasing for both methods.
    """
    if method not in ("dogleg", "armijo"):
        raise ValueError(f"unknown method {method!r}")
    x = np.array(x0, dtype=float)
    f = _safe_eval(fun, x)
    if f is None:
        raise CurveFlowError("residual cannot be evaluated at the initial guess")
    res = float(np.max(np.abs(f)))
    norm = float(np.linalg.norm(f))
    history, merit = [res], [norm]
    radius = max(1.0, float(np.linalg.norm(x)))
    damped = False
    it = 0
    while res > tol and it < max_iter:
        it += 1
        Jac = fd_jacobian(fun, x, f, rel_step)
        p_newton = _newton_direction(Jac, f)
        if method == "armijo":
            if p_newton is None:
                break
            lam = 1.0
            while lam >= 2.0**-20:
                f_try = _safe_eval(fun, x + lam * p_newton)
                if f_try is not None and np.linalg.norm(f_try) <= (1.0 - 1e-4 * lam) * norm:
                    break
                lam *= 0.5
            else:
                log.debug("line search failed at iteration %d (residual %.3e)", it, res)
                break
            damped |= lam < 1.0
            x = x + lam * p_newton
            f = f_try
        else:
            while True:
                p = _dogleg(Jac, f, p_newton, radius)
                f_try = _safe_eval(fun, x + p)
                predicted = norm**2 - float(np.linalg.norm(f + Jac @ p)) ** 2
                if f_try is None or predicted <= 0.0:
                    ratio = -np.inf
                else:
                    ratio = (norm**2 - float(f_try @ f_try)) / predicted
                step = float(np.linalg.norm(p))
                if ratio < 0.25:
                    radius = 0.25 * step
                elif ratio > 0.75 and step >= 0.99 * radius:
                    radius = 2.0 * radius
                if ratio > 1e-4:
                    break
                damped = True
                if radius < 1e-14 * max(1.0, float(np.linalg.norm(x))):
                    f_try = None
                    break
            if f_try is None:
                log.debug("trust region collapsed at iteration %d (residual %.3e)", it, res)
                break
            damped |= p is not p_newton
            x = x + p
            f = f_try
        res = float(np.max(np.abs(f)))
        norm = float(np.linalg.norm(f))
        history.append(res)
        merit.append(norm)
        log.debug("newton iteration %d: residual %.3e", it, res)
    if polish and res <= tol:
        p_newton = _newton_direction(fd_jacobian(fun, x, f, rel_step), f)
        f_try = None if p_newton is None else _safe_eval(fun, x + p_newton)
        if f_try is not None and np.max(np.abs(f_try)) < res:
            it += 1
            x, f = x + p_newton, f_try
            res = float(np.max(np.abs(f)))
            history.append(res)
            merit.append(float(np.linalg.norm(f)))
    return NewtonResult(
        x=x, converged=res <= tol, iterations=it, residual=res, history=history, merit=merit, damped=damped
    )
