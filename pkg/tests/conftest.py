"""Shared fixtures for the elastica_obstacle test suite."""
import numpy as np
import pytest

from elastica_obstacle import curves, solver
from elastica_obstacle.energy import ShapeFunction


@pytest.fixture(scope="session")
def eu2():
    """EU_p at p = 2."""
    return ShapeFunction.eu_p(2.0)


@pytest.fixture(scope="session")
def eu3():
    return ShapeFunction.eu_p(3.0)


@pytest.fixture(scope="session")
def exact_cone_p2():
    """Exact minimizer for the symmetric cone of height 0.4 at p = 2."""
    return curves.exact_cone_minimizer(2.0, 0.4)


@pytest.fixture(scope="session")
def exact_cone_p2_grid(exact_cone_p2):
    return exact_cone_p2.on_grid(1024)


@pytest.fixture(scope="session")
def cone_solve_p2(eu2):
    """Symmetric L-BFGS-B solve of the p = 2, h = 0.4 cone on N = 512."""
    psi = solver.Obstacle.symmetric_cone(0.4)
    report = solver.minimize(eu2, 2.0, psi, solver.SolverOptions(N=512, symmetric=True))
    return psi, report


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def log_dir(tmp_path, monkeypatch):
    """Point the CLI log file at a temporary directory."""
    path = tmp_path / "logs"
    monkeypatch.setenv("ELASTICA_LOG_DIR", str(path))
    return path
