"""Per-step records of a simulation and their delimited-text encoding."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import edge_lengths, signed_area

CSV_COLUMNS = ("t", "dt", "length", "area", "newton_iters", "residual", "uniformity")


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


@dataclass(frozen=True)
class StepRecord:
    t: float
    dt: float
    length: float
    area: float
    newton_iters: int
    residual: float
    uniformity: float
    dissipation: float = float("nan")
    length_defect: float = float("nan")
    max_abs_G: float = 0.0
    converged: bool = True

    @classmethod
    def initial(cls, X) -> "StepRecord":
        return cls.of_curve(0.0, 0.0, X)

    @classmethod
    def of_curve(cls, t: float, dt: float, X, newton_iters: int = 0, residual: float = 0.0) -> "StepRecord":
        r = edge_lengths(X)
        return cls(
            t=t,
            dt=dt,
            length=float(r.sum()),
            area=signed_area(X),
            newton_iters=newton_iters,
            residual=residual,
            uniformity=float(np.max(np.abs(r - r.mean()))),
        )

    @classmethod
    def from_step(cls, t: float, step, X) -> "StepRecord":
        r = edge_lengths(X)
        return cls(
            t=t,
            dt=step.dt,
            length=float(r.sum()),
            area=signed_area(X),
            newton_iters=step.iterations,
            residual=step.residual,
            uniformity=float(np.max(np.abs(r - r.mean()))),
            dissipation=step.dissipation,
            length_defect=step.length_defect,
            max_abs_G=step.max_abs_G,
            converged=getattr(step, "converged", True),
        )


@dataclass
class TimeSeries:
    records: list[StepRecord] = field(default_factory=list)
    snapshots: list[tuple[float, np.ndarray]] = field(default_factory=list)

    def append(self, record: StepRecord) -> None:
        if self.records and not record.t > self.records[-1].t:
            raise ValueError("time must be strictly increasing")
        self.records.append(record)

    def add_snapshot(self, t: float, X) -> None:
        self.snapshots.append((float(t), np.array(X, dtype=float)))

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def final(self) -> StepRecord:
        return self.records[-1]

    @property
    def final_curve(self) -> np.ndarray:
        return self.snapshots[-1][1]

    def write_csv(self, path: Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for rec in self.records:
                w.writerow([fmt(getattr(rec, c)) for c in CSV_COLUMNS])

    def write_snapshots(self, directory: Path) -> list[Path]:
        """One ``x,y`` file per snapshot plus ``snapshots.csv`` mapping index to time."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        with open(directory / "snapshots.csv", "w", newline="") as idx:
            w = csv.writer(idx)
            w.writerow(("index", "t", "file"))
            for k, (t, X) in enumerate(self.snapshots):
                name = f"snapshot_{k:04d}.csv"
                write_curve(directory / name, X)
                w.writerow((k, fmt(t), name))
                paths.append(directory / name)
        return paths


def write_curve(path: Path, X) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("x", "y"))
        for x, y in np.asarray(X, dtype=float):
            w.writerow((fmt(x), fmt(y)))


def read_curve(path: Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def read_csv(path: Path) -> dict[str, np.ndarray]:
    data = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.atleast_1d(data[name]) for name in data.dtype.names}
