import numpy as np
import pytest

from curveflow import experiment

ACCEPTANCE_LINES: list[str] = []


def report(criterion: str, ok: bool, detail: str) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@pytest.fixture(scope="session")
def report_line():
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def benchmark_curve():
    """The benchmark curve with N = 50 after uniform redistribution."""
    return np.array(experiment.redistribute_uniform(experiment.initial_curve(50)).vertices)


def perturbed_polygon(N, amplitude, seed=0, radius=1.0):
    rng = np.random.default_rng(seed)
    theta = 2 * np.pi * np.arange(N) / N + amplitude * rng.uniform(-0.3, 0.3, N) * 2 * np.pi / N
    rad = radius * (1.0 + amplitude * rng.uniform(-1, 1, N))
    return np.column_stack([rad * np.cos(theta), rad * np.sin(theta)])
