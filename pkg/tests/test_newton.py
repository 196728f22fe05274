import numpy as np
import pytest

from curveflow.errors import CurveFlowError
from curveflow.newton import fd_jacobian, newton_solve


def rosenbrock_system(x):
    return np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]])


@pytest.mark.parametrize("method", ["dogleg", "armijo"])
def test_solves_nonlinear_system(method):
    sol = newton_solve(rosenbrock_system, np.array([-1.2, 1.0]), tol=1e-12, method=method)
    assert sol.converged
    np.testing.assert_allclose(sol.x, [1.0, 1.0], atol=1e-10)
    assert all(b <= a * (1 + 1e-12) for a, b in zip(sol.merit, sol.merit[1:]))


def test_quadratic_convergence_near_root():
    sol = newton_solve(lambda x: x**3 - 8.0, np.array([2.5]), tol=1e-14)
    h = sol.history
    assert sol.converged and sol.iterations <= 7
    assert h[-2] < 1e-3 * h[-3]


def test_fd_jacobian_is_accurate():
    def f(x):
        return np.array([np.sin(x[0]) * x[1], x[0] ** 2 + np.exp(x[1])])

    x = np.array([0.3, -0.7])
    exact = np.array([[np.cos(x[0]) * x[1], np.sin(x[0])], [2 * x[0], np.exp(x[1])]])
    np.testing.assert_allclose(fd_jacobian(f, x, f(x)), exact, atol=1e-6)


def test_unevaluable_start_raises():
    def f(x):
        raise CurveFlowError("no")

    with pytest.raises(CurveFlowError):
        newton_solve(f, np.zeros(2))


def test_reports_non_convergence():
    sol = newton_solve(lambda x: x**2 + 1.0, np.array([0.5]), max_iter=20)
    assert not sol.converged and sol.residual >= 1.0


def test_rejects_unknown_method():
    with pytest.raises(ValueError):
        newton_solve(rosenbrock_system, np.zeros(2), method="bisection")


def test_polish_takes_one_more_step():
    plain = newton_solve(lambda x: x**3 - 8.0, np.array([2.5]), tol=1e-6)
    polished = newton_solve(lambda x: x**3 - 8.0, np.array([2.5]), tol=1e-6, polish=True)
    assert polished.iterations == plain.iterations + 1
    assert polished.residual < 1e-3 * plain.residual
