"""SVG figures of a finished run."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .timeseries import TimeSeries  # noqa: E402


def _closed(X: np.ndarray) -> np.ndarray:
    return np.vstack([X, X[:1]])


def plot_curves(series: TimeSeries, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 5))
    cmap = plt.get_cmap("viridis")
    count = max(len(series.snapshots) - 1, 1)
    for k, (t, X) in enumerate(series.snapshots):
        C = _closed(X)
        ax.plot(C[:, 0], C[:, 1], ".-", ms=2, lw=0.8, color=cmap(k / count), label=f"t = {t:.4g}")
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if len(series.snapshots) <= 12:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def plot_length_area(series: TimeSeries, path: Path) -> Path:
    t = series.column("t")
    fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
    top.plot(t, series.column("length"))
    top.set_ylabel("length")
    bottom.plot(t, series.column("area"))
    bottom.set_ylabel("area")
    bottom.set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def plot_time_steps(series: TimeSeries, path: Path) -> Path:
    t = series.column("t")[1:]
    dt = series.column("dt")[1:]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    if dt.size:
        ax.semilogy(t, dt, ".-", ms=3)
    ax.set_xlabel("t")
    ax.set_ylabel("time step")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def write_all(out, series: TimeSeries) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return [
        plot_curves(series, out / "curves.svg"),
        plot_length_area(series, out / "length_area.svg"),
        plot_time_steps(series, out / "time_steps.svg"),
    ]
