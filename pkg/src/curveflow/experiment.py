"""Experiment driver: initial curve, redistribution, runs and their artifacts."""

from __future__ import annotations

import dataclasses
import json
import logging
import shlex
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fullydiscrete, semidiscrete, symplectic
from .errors import BlowUp, ConfigError, CurveFlowError, StepRejected
from .flows import FLUX_RULES, FlowModel
from .geometry import PolygonalCurve, as_vertices, edge_lengths, is_simple, signed_area
from .timeseries import StepRecord, TimeSeries, write_curve

log = logging.getLogger(__name__)

FLOWS = ("mcf", "apmcf", "heleshaw")
SCHEMES = ("implicit", "rk4", "midpoint-srk")
OMEGA_RULES = ("paper", "constant")
STALL_POLICIES = ("accept", "halve")

EXIT_OK = 0
EXIT_REJECTED = 2
EXIT_BLOWUP = 3
EXIT_CONFIG = 4

# explicit runs stop when any of these trip
BLOWUP_LENGTH_GROWTH = 0.10
BLOWUP_COORDINATE = 5.0


def initial_curve(N: int) -> PolygonalCurve:
    """The benchmark curve sampled at ``t = i/N``, ``i = 1..N``."""
    if N < 3:
        raise ValueError("need N >= 3")
    t = np.arange(1, N + 1) / N
    a1 = 1.8 * np.cos(2 * np.pi * t)
    a2 = 0.2 + np.sin(np.pi * t) * np.sin(6 * np.pi * t) * np.sin(2 * a1)
    a3 = 0.5 * np.sin(2 * np.pi * t) + np.sin(a1) + a2 * np.sin(2 * np.pi * t)
    return PolygonalCurve(np.column_stack([0.5 * a1, 0.54 * a3]))


def redistribute_uniform(
    curve,
    omega: float = 1.0,
    tol_u: float = 1e-10,
    step: float = 0.1,
    max_steps: int = 100_000,
) -> PolygonalCurve:
    """Slide vertices along the polygon until ``max|r_k - L/N| <= tol_u * L``.

    Integrates the still flow (``v = 0``) with AUD tangential velocities by
    classical RK4 with ``dt = step / omega``.  The trajectory only depends
    on ``omega * t``, so ``omega`` sets the time unit and nothing else.
    """
    X = np.array(as_vertices(curve), dtype=float)
    F = semidiscrete.SemiDiscreteRhs(FlowModel.zero(), omega)
    dt = step / omega
    for _ in range(max_steps):
        r = edge_lengths(X)
        if np.max(np.abs(r - r.mean())) <= tol_u * r.sum():
            return PolygonalCurve(X)
        X = semidiscrete.rk4_step(X, dt, F)
    raise CurveFlowError(f"redistribution did not reach tol_u={tol_u:g} in {max_steps} steps")


@dataclass(frozen=True)
class ExperimentConfig:
    flow: str = "apmcf"
    scheme: str = "implicit"
    N: int = 50
    tau: float = 0.01
    omega_rule: str = "paper"
    omega: float = 0.0
    sigma: float = 1.0
    rho: float = 1.0
    flux: str = "average"
    tol: float = 1e-8
    t_end: float = 1.068
    dt: float | None = None
    stall: str = "accept"
    redistribute: bool = True
    snapshots: float | None = None
    out: str = "out"
    svg: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.flow not in FLOWS:
            raise ConfigError(f"flow must be one of {FLOWS}, got {self.flow!r}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.omega_rule not in OMEGA_RULES:
            raise ConfigError(f"omega_rule must be one of {OMEGA_RULES}, got {self.omega_rule!r}")
        if self.flux not in FLUX_RULES:
            raise ConfigError(f"flux must be one of {FLUX_RULES}, got {self.flux!r}")
        if self.stall not in STALL_POLICIES:
            raise ConfigError(f"stall must be one of {STALL_POLICIES}, got {self.stall!r}")
        if self.N < 3:
            raise ConfigError("N must be at least 3")
        for name in ("tau", "tol", "sigma", "rho"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.t_end < 0:
            raise ConfigError("t_end must be non-negative")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.omega_rule == "constant" and self.omega < 0:
            raise ConfigError("omega must be non-negative")
        if self.snapshots is not None and not self.snapshots > 0:
            raise ConfigError("snapshots interval must be positive")

    @property
    def model(self) -> FlowModel:
        if self.flow == "heleshaw":
            return FlowModel.hele_shaw(self.sigma, self.rho, self.flux)
        return FlowModel(self.flow)

    def omega_for(self, dt: float):
        """``"paper"`` for the implicit scheme, a number otherwise."""
        if self.omega_rule == "constant":
            return self.omega
        if self.scheme == "implicit":
            return "paper"
        return fullydiscrete.paper_omega(self.N, dt)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _coerce(name: str, text: str):
    if name not in _FIELDS:
        raise ConfigError(f"unknown config key {name!r}")
    default = _FIELDS[name].default
    text = text.strip()
    if name in ("dt", "snapshots"):
        return None if text.lower() in ("", "none") else float(text)
    if isinstance(default, bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {text!r}")
    try:
        return type(default)(text)
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {text!r}") from exc


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; dashes in keys are allowed."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        values[key] = _coerce(key, value)
    return values


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    values = parse_config_text(Path(path).read_text()) if path else {}
    values.update(overrides or {})
    return ExperimentConfig(**values)


def parse_sweep(text: str) -> list[dict]:
    """One run per non-empty line, written as ``key=value`` tokens."""
    runs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        entry = {}
        for token in shlex.split(line):
            if "=" not in token:
                raise ConfigError(f"sweep line {lineno}: expected key=value, got {token!r}")
            key, value = token.split("=", 1)
            key = key.strip().replace("-", "_")
            entry[key] = _coerce(key, value)
        runs.append(entry)
    return runs


def prepare_curve(config: ExperimentConfig) -> np.ndarray:
    curve = initial_curve(config.N)
    if config.redistribute:
        curve = redistribute_uniform(curve)
    return np.array(curve.vertices)


def check_blowup(X: np.ndarray, L0: float) -> None:
    if not np.all(np.isfinite(X)):
        raise BlowUp("explicit blow-up: non-finite vertices")
    if np.max(np.abs(X)) > BLOWUP_COORDINATE:
        raise BlowUp(f"explicit blow-up: coordinate magnitude {np.max(np.abs(X)):.3g} > {BLOWUP_COORDINATE:g}")
    L = edge_lengths(X).sum()
    if L > (1.0 + BLOWUP_LENGTH_GROWTH) * L0:
        raise BlowUp(f"explicit blow-up: length grew from {L0:.6g} to {L:.6g}")


class _FixedStepRun:
    """Shared loop for the fixed-step schemes."""

    def __init__(self, config: ExperimentConfig, X0: np.ndarray):
        self.config = config
        self.X = X0
        self.t = 0.0
        self.series = TimeSeries()
        self.series.append(StepRecord.initial(X0))
        self.series.add_snapshot(0.0, X0)
        self.next_snap = config.snapshots

    def record(self, dt, iterations=0, residual=0.0):
        self.t += dt
        self.series.append(StepRecord.of_curve(self.t, dt, self.X, iterations, residual))
        if self.next_snap is not None and self.t >= self.next_snap - 1e-12:
            self.series.add_snapshot(self.t, self.X)
            while self.next_snap <= self.t + 1e-12:
                self.next_snap += self.config.snapshots

    def finish(self) -> TimeSeries:
        if self.series.snapshots[-1][0] != self.t:
            self.series.add_snapshot(self.t, self.X)
        return self.series


def _explicit_dt(config: ExperimentConfig) -> float:
    return config.dt if config.dt is not None else 0.1 / config.N**2


def run_rk4(config: ExperimentConfig, X0: np.ndarray) -> TimeSeries:
    run = _FixedStepRun(config, X0)
    dt = _explicit_dt(config)
    F = semidiscrete.SemiDiscreteRhs(config.model, config.omega_for(dt))
    L0 = edge_lengths(X0).sum()
    while run.t < config.t_end:
        X = run.X
        try:
            X = semidiscrete.rk4_step(run.X, dt, F)
            check_blowup(X, L0)
        except BlowUp as exc:
            # the offending curve when there is one, else the last good one
            exc.curve = X
            exc.series = run.finish()
            raise
        run.X = X
        run.record(dt)
    return run.finish()


def run_srk(config: ExperimentConfig, X0: np.ndarray) -> TimeSeries:
    run = _FixedStepRun(config, X0)
    dt = config.dt if config.dt is not None else config.tau
    omega = config.omega_for(dt)
    while run.t < config.t_end:
        try:
            step = symplectic.srk_step(run.X, dt, config.model, omega, symplectic.MIDPOINT, tol=config.tol)
        except StepRejected as exc:
            exc.series = run.finish()
            raise
        run.X = step.X
        run.record(dt, step.iterations, step.residual)
    return run.finish()


def _simplicity_monitor():
    state = {"warned": False}

    def check(step):
        if not state["warned"] and not is_simple(step.X):
            log.warning("curve self-intersects after a step with dt=%.3g", step.dt)
            state["warned"] = True

    return check


def run_implicit(config: ExperimentConfig, X0: np.ndarray) -> TimeSeries:
    return fullydiscrete.evolve(
        X0,
        config.model,
        config.t_end,
        tau=config.tau,
        omega=config.omega_for(config.dt or config.tau),
        tol=config.tol,
        dt=config.dt,
        stall=config.stall,
        snapshot_every=config.snapshots,
        callback=_simplicity_monitor(),
    )


RUNNERS = {"implicit": run_implicit, "rk4": run_rk4, "midpoint-srk": run_srk}


@dataclass
class RunOutcome:
    status: int
    out: Path
    series: TimeSeries | None = None
    error: str | None = None


def _write_error(out: Path, kind: str, exc: Exception, config: ExperimentConfig) -> None:
    series = getattr(exc, "series", None)
    record = {
        "status": kind,
        "message": str(exc),
        "config": config.to_dict(),
        "t": series.final.t if series is not None and len(series) else None,
        "steps": len(series) - 1 if series is not None and len(series) else 0,
    }
    (out / "error.json").write_text(json.dumps(record, indent=2) + "\n")


def write_artifacts(out: Path, config: ExperimentConfig, series: TimeSeries) -> None:
    series.write_csv(out / "timeseries.csv")
    series.write_snapshots(out / "snapshots")
    if config.svg:
        from . import plotting

        plotting.write_all(out, series)


def run(config: ExperimentConfig) -> RunOutcome:
    """Run one experiment and write its artifacts under ``config.out``."""
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text("".join(f"{k} = {v}\n" for k, v in config.to_dict().items()))
    try:
        X0 = prepare_curve(config)
        log.info("initial curve: N=%d L=%.6f A=%.6f", config.N, edge_lengths(X0).sum(), signed_area(X0))
        series = RUNNERS[config.scheme](config, X0)
    except BlowUp as exc:
        log.error("%s", exc)
        _write_error(out, "blow-up", exc, config)
        curve = getattr(exc, "curve", None)
        if curve is not None:
            write_curve(out / "blowup_curve.csv", curve)
        series = getattr(exc, "series", None)
        if series is not None:
            write_artifacts(out, config, series)
        return RunOutcome(EXIT_BLOWUP, out, series, str(exc))
    except StepRejected as exc:
        log.error("%s", exc)
        _write_error(out, "step-rejected", exc, config)
        return RunOutcome(EXIT_REJECTED, out, None, str(exc))
    except CurveFlowError as exc:
        log.error("%s", exc)
        _write_error(out, "failure", exc, config)
        return RunOutcome(EXIT_REJECTED, out, None, str(exc))
    write_artifacts(out, config, series)
    forced = int(np.sum(~series.column("converged")))
    if forced:
        log.warning("%d step(s) accepted without reaching tol=%g", forced, config.tol)
    final = series.final
    log.info("t=%.6f L=%.6f A=%.6f steps=%d", final.t, final.length, final.area, len(series) - 1)
    return RunOutcome(EXIT_OK, out, series)
