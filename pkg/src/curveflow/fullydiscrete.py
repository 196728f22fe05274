"""Implicit curve-shortening step.

Every geometric quantity of the step is taken from the pair (candidate new
curve, old curve) through their average, so that the discrete length
change equals ``sum kappa_bar v_bar r_bar`` exactly whenever the tangential
defects ``G_bar`` vanish.  The unknowns of the nonlinear system are the new
vertex positions only; normal and tangential velocities are eliminated
inside the residual.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import CurveFlowError, GeometryError, StepRejected
from .flows import FlowModel, normal_velocity
from .geometry import as_vertices, edge_frame, rot90, turning_angles
from .newton import newton_solve
from .semidiscrete import telescoping_solve
from .timeseries import StepRecord, TimeSeries

log = logging.getLogger(__name__)

G_THRESHOLD = 1e-12
PAPER_OMEGA_FACTOR = 10.0
STALL_POLICIES = ("halve", "accept")


@dataclass(frozen=True, eq=False)
class MidpointFrame:
    """Two-curve frame; ``vertices``, ``r``, ``t``, ``n``, ``kappa`` refer to the average curve."""

    vertices: np.ndarray
    r: np.ndarray
    t: np.ndarray
    n: np.ndarray
    phi: np.ndarray
    r_new: np.ndarray
    r_old: np.ndarray
    D: np.ndarray
    N: np.ndarray
    T: np.ndarray
    F: np.ndarray
    G: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    kappa: np.ndarray

    @property
    def half_sum(self) -> np.ndarray:
        """``(r_k + r_hat_k) / 2``, the denominator of the two-curve difference."""
        return 0.5 * (self.r_new + self.r_old)

    def difference(self, values: np.ndarray) -> np.ndarray:
        """Two-curve difference ``(F_k - F_{k-1}) / ((r_k + r_hat_k)/2)`` of vertex values."""
        values = np.asarray(values, dtype=float)
        d = values - np.roll(values, 1, axis=0)
        h = self.half_sum
        return d / (h[:, None] if d.ndim == 2 else h)


def _lengths(X: np.ndarray, which: str) -> np.ndarray:
    e = X - np.roll(X, 1, axis=0)
    r = np.hypot(e[:, 0], e[:, 1])
    bad = np.flatnonzero(~(r > 0.0))
    if bad.size:
        raise GeometryError(f"degenerate edge {bad[0]} on the {which} curve")
    return r


def midpoint_frame(X_new, X_old) -> MidpointFrame:
    X = as_vertices(X_new)
    Xh = as_vertices(X_old)
    if X.shape != Xh.shape:
        raise ValueError("curves must have the same number of vertices")
    r_new = _lengths(X, "new")
    r_old = _lengths(Xh, "old")
    Xb = 0.5 * (X + Xh)
    eb = Xb - np.roll(Xb, 1, axis=0)
    rb = np.hypot(eb[:, 0], eb[:, 1])
    bad = np.flatnonzero(~(rb > 0.0))
    if bad.size:
        raise GeometryError(f"degenerate edge {bad[0]} on the midpoint curve")
    tb = eb / rb[:, None]
    nb = -rot90(tb)
    phi = turning_angles(tb)
    bad = np.flatnonzero(np.abs(phi) >= np.pi)
    if bad.size:
        raise GeometryError(f"angle overflow at vertex {bad[0]}")

    D = eb / (0.5 * (r_new + r_old))[:, None]
    Dn = np.roll(D, -1, axis=0)
    diff = Dn - D
    mag = np.hypot(diff[:, 0], diff[:, 1])
    sgn = np.sign(phi)
    bent = phi != 0.0

    Nb = np.where(bent[:, None], -sgn[:, None] * diff / np.where(mag > 0, mag, 1.0)[:, None], nb)
    Tb = rot90(Nb)
    F = np.where(bent, -sgn * mag, 0.0)
    growth = np.sign(np.hypot(Dn[:, 0], Dn[:, 1]) - np.hypot(D[:, 0], D[:, 1]))
    G = np.where(bent, 0.0, growth * mag)

    # N = alpha n_k + beta n_{k+1} (Cramer); length weights when the edges are parallel
    nb_next = np.roll(nb, -1, axis=0)
    det = nb[:, 0] * nb_next[:, 1] - nb[:, 1] * nb_next[:, 0]
    safe = np.where(bent, det, 1.0)
    rb_next = np.roll(rb, -1)
    alpha = np.where(bent, (Nb[:, 0] * nb_next[:, 1] - Nb[:, 1] * nb_next[:, 0]) / safe, rb / (rb + rb_next))
    beta = np.where(bent, (nb[:, 0] * Nb[:, 1] - nb[:, 1] * Nb[:, 0]) / safe, rb_next / (rb + rb_next))
    kappa = -(F * alpha + np.roll(F * beta, 1)) / rb
    return MidpointFrame(
        vertices=Xb, r=rb, t=tb, n=nb, phi=phi, r_new=r_new, r_old=r_old, D=D,
        N=Nb, T=Tb, F=F, G=G, alpha=alpha, beta=beta, kappa=kappa,
    )


def implicit_normal_velocity(frame: MidpointFrame, v: np.ndarray) -> np.ndarray:
    """``V_k = alpha_k v_k + beta_k v_{k+1}``."""
    return frame.alpha * v + frame.beta * np.roll(v, -1)


def discrete_aud(
    frame: MidpointFrame,
    V: np.ndarray,
    dt: float,
    omega: float,
    closure: str = "average",
) -> np.ndarray:
    """Tangential velocities making ``r_k - L/N`` contract by ``1/(1 + dt omega)``.

    ``closure="average"`` imposes ``sum W_k (r_k + r_{k+1})/2 = 0`` on the
    average curve; ``closure="weighted"`` imposes ``sum G_k W_k = 0`` and is
    only defined when some ``G_k`` is nonzero.
    """
    N = V.size
    r, r_old = frame.r_new, frame.r_old
    L, L_old = r.sum(), r_old.sum()
    scale = frame.r / frame.half_sum
    t = frame.t
    T_prev = np.roll(frame.T, 1, axis=0)
    N_prev = np.roll(frame.N, 1, axis=0)
    a = scale * np.sum(t * frame.T, axis=1)
    b = scale * np.sum(t * T_prev, axis=1)
    c = scale * np.sum(t * frame.N, axis=1)
    d = scale * np.sum(t * N_prev, axis=1)
    rhs = -c * V + d * np.roll(V, 1) + (L - L_old) / (N * dt) + (L / N - r) * omega
    if closure == "average":
        weights = 0.5 * (frame.r + np.roll(frame.r, -1))
    elif closure == "weighted":
        if not np.any(frame.G != 0.0):
            raise GeometryError("weighted closure undefined: every G vanishes")
        weights = frame.G
    else:
        raise ValueError(f"unknown closure {closure!r}")
    return telescoping_solve(a, b, rhs, weights)


@dataclass(frozen=True, eq=False)
class StepEvaluation:
    frame: MidpointFrame
    v: np.ndarray
    V: np.ndarray
    W: np.ndarray
    R: np.ndarray

    @property
    def dissipation(self) -> float:
        """``sum kappa_bar v_bar r_bar``."""
        f = self.frame
        return float(np.sum(f.kappa * self.v * f.r))


def evaluate_step(X_new, X_old, dt: float, model: FlowModel, omega: float, closure: str = "average") -> StepEvaluation:
    X = as_vertices(X_new)
    Xh = as_vertices(X_old)
    frame = midpoint_frame(X, Xh)
    v = normal_velocity(model, frame)
    V = implicit_normal_velocity(frame, v)
    W = discrete_aud(frame, V, dt, omega, closure)
    R = (X - Xh) / dt - V[:, None] * frame.N - W[:, None] * frame.T
    return StepEvaluation(frame, v, V, W, R)


def residual(X_new, X_old, dt: float, model: FlowModel, omega: float, closure: str = "average") -> np.ndarray:
    """Flattened ``(X - X_hat)/dt - V N - W T`` (length ``2N``)."""
    return evaluate_step(X_new, X_old, dt, model, omega, closure).R.ravel()


@dataclass(frozen=True, eq=False)
class StepResult:
    X: np.ndarray
    dt: float
    omega: float
    iterations: int
    residual: float
    length_old: float
    length_new: float
    dissipation: float
    max_abs_G: float
    history: tuple = ()
    damped: bool = False
    converged: bool = True

    @property
    def length_rate(self) -> float:
        return (self.length_new - self.length_old) / self.dt

    @property
    def length_defect(self) -> float:
        """``(L_new - L_old)/dt - sum kappa_bar v_bar r_bar``."""
        return self.length_rate - self.dissipation

    @property
    def g_nonzero(self) -> bool:
        return self.max_abs_G > G_THRESHOLD


def paper_omega(N: int, dt: float) -> float:
    return PAPER_OMEGA_FACTOR * N / dt


def resolve_omega(omega, N: int, dt: float) -> float:
    """``omega="paper"`` means ``10 N / dt``; numbers are used as given."""
    if omega is None or omega == "paper":
        return paper_omega(N, dt)
    return float(omega)


def newton_step_solve(
    X_old,
    dt: float,
    model: FlowModel,
    omega="paper",
    tol: float = 1e-8,
    max_iter: int = 50,
    closure: str = "average",
    accept_stalled: bool = False,
) -> StepResult:
    """Advance one implicit step from ``X_old``, starting Newton at ``X_old``.

    Raises StepRejected when Newton does not reach ``tol``, unless
    ``accept_stalled`` is set: then the last iterate is returned with
    ``converged=False`` provided the residual could be evaluated there.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    Xh = np.array(as_vertices(X_old), dtype=float)
    shape = Xh.shape
    w = resolve_omega(omega, shape[0], dt)

    def fun(z):
        return residual(z.reshape(shape), Xh, dt, model, w, closure)

    try:
        sol = newton_solve(fun, Xh.ravel(), tol=tol, max_iter=max_iter, polish=True)
    except CurveFlowError as exc:
        raise StepRejected(f"step rejected: {exc}") from exc
    if not sol.converged and not accept_stalled:
        raise StepRejected(
            f"step rejected: residual {sol.residual:.3e} after {sol.iterations} iterations (dt={dt:.3g})"
        )
    X = sol.x.reshape(shape)
    try:
        ev = evaluate_step(X, Xh, dt, model, w, closure)
    except CurveFlowError as exc:
        raise StepRejected(f"step rejected: {exc}") from exc
    if not sol.converged:
        log.warning("accepting unconverged step: residual %.3e (dt=%.3g)", sol.residual, dt)
    return StepResult(
        X=X,
        dt=dt,
        omega=w,
        iterations=sol.iterations,
        residual=sol.residual,
        length_old=float(ev.frame.r_old.sum()),
        length_new=float(ev.frame.r_new.sum()),
        dissipation=ev.dissipation,
        max_abs_G=float(np.max(np.abs(ev.frame.G))),
        history=tuple(sol.history),
        damped=sol.damped,
        converged=sol.converged,
    )


@dataclass
class StepController:
    """``dt = min(tau, rate^-2)`` where ``rate`` is the latest length change per unit time."""

    tau: float = 0.01
    history: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    def _cap(self, rate: float) -> float:
        rate = abs(rate)
        dt = self.tau if rate == 0.0 else min(self.tau, rate**-2)
        self.history.append(dt)
        return dt

    def initial_dt(self, curve) -> float:
        """Uses ``sum kappa^2 r`` of the initial curve as the rate."""
        e = edge_frame(curve)
        return self._cap(float(np.sum(e.kappa**2 * e.r)))

    def next_dt(self, step: StepResult) -> float:
        return self._cap(step.length_rate)


def adaptive_dt(controller: StepController, last) -> float:
    if isinstance(last, StepResult):
        return controller.next_dt(last)
    return controller.initial_dt(last)


def _solve_with_policy(X, h, model, omega, tol, max_iter, closure, stall, max_retries) -> StepResult:
    trial = h
    for attempt in range(max_retries + 1):
        try:
            return newton_step_solve(X, trial, model, omega, tol, max_iter, closure, stall == "accept")
        except StepRejected as exc:
            if attempt == max_retries:
                raise
            log.info("%s; retrying with dt=%.3g", exc, trial / 2)
            trial /= 2
    raise AssertionError("unreachable")


def evolve(
    X0,
    model: FlowModel,
    t_end: float,
    tau: float = 0.01,
    omega="paper",
    tol: float = 1e-8,
    dt: float | None = None,
    max_retries: int = 10,
    max_iter: int = 50,
    closure: str = "average",
    stall: str = "halve",
    snapshot_every: float | None = None,
    max_steps: int | None = None,
    callback=None,
) -> TimeSeries:
    """Integrate until ``t >= t_end`` with adaptive (or fixed ``dt``) steps.

    When Newton stalls, ``stall`` decides what happens:

    * ``"halve"`` retries with half the step size, up to ``max_retries``
      times, then lets StepRejected propagate.
    * ``"accept"`` keeps the last Newton iterate (flagged
      ``converged=False``), which is how a solver whose non-convergence goes
      unchecked behaves.

    Under both policies a step is halved when its iterate is not a valid
    curve.  ``callback`` is called with each accepted :class:`StepResult`.
    """
    X = np.array(as_vertices(X0), dtype=float)
    controller = StepController(tau)
    series = TimeSeries()
    series.append(StepRecord.initial(X))
    series.add_snapshot(0.0, X)
    next_snap = snapshot_every if snapshot_every else None
    t = 0.0
    h = dt if dt is not None else adaptive_dt(controller, X)
    if stall not in STALL_POLICIES:
        raise ValueError(f"unknown stall policy {stall!r}")
    steps = 0
    while t < t_end and (max_steps is None or steps < max_steps):
        step = _solve_with_policy(X, h, model, omega, tol, max_iter, closure, stall, max_retries)
        X = step.X
        t += step.dt
        steps += 1
        series.append(StepRecord.from_step(t, step, X))
        if next_snap is not None and t >= next_snap - 1e-12:
            series.add_snapshot(t, X)
            while next_snap <= t + 1e-12:
                next_snap += snapshot_every
        if step.g_nonzero:
            log.info("G nonzero at t=%.6g (max %.3e)", t, step.max_abs_G)
        if callback is not None:
            callback(step)
        h = dt if dt is not None else adaptive_dt(controller, step)
        log.debug("t=%.6f dt=%.3e L=%.6f iters=%d", t, step.dt, step.length_new, step.iterations)
    if series.snapshots[-1][0] != t:
        series.add_snapshot(t, X)
    return series
