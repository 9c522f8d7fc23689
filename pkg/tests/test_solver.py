"""Tests for obstacles, KKT residuals, existence verdicts and the constrained solver."""
import numpy as np
import pytest

from elastica_obstacle import curves, diagnostics, solver
from elastica_obstacle.energy import GridFunction, ShapeFunction, slope_bound
from elastica_obstacle.exceptions import (
    AssumptionViolation,
    DomainError,
    InfeasibleIterateError,
    ThresholdError,
    UnsupportedObstacleError,
)
from elastica_obstacle.solver import Obstacle, SolverOptions


# ========== OBSTACLES AND OPTIONS ==========

def test_cone_obstacle_values():
    psi = Obstacle.cone(0.3, 0.5, -0.2, -0.1)
    assert psi.height == pytest.approx(psi(0.5))
    assert psi(0.3) == pytest.approx(0.5)
    assert psi(0.0) == pytest.approx(-0.2)
    assert psi.describe()["tip"] == pytest.approx(0.5)
    sym = Obstacle.symmetric_cone(0.4)
    assert sym.kind == "symmetric_cone"
    assert np.allclose(sym.nodal(64), sym.nodal(64)[::-1])


def test_obstacle_assumption():
    Obstacle.symmetric_cone(0.4).check_assumption()
    with pytest.raises(AssumptionViolation):
        Obstacle.symmetric_cone(0.4, endpoint=0.0).check_assumption()
    with pytest.raises(AssumptionViolation):
        Obstacle.symmetric_cone(-0.1, endpoint=-0.5).check_assumption()
    with pytest.raises(DomainError):
        Obstacle.cone(1.2, 0.4)
    with pytest.raises(DomainError):
        Obstacle.sampled([0.0, 0.6, 0.5, 1.0], [-1.0, 0.2, 0.2, -1.0])


def test_solver_options_validation(monkeypatch):
    with pytest.raises(DomainError):
        SolverOptions(N=32)
    with pytest.raises(DomainError):
        SolverOptions(N=129, symmetric=True)
    with pytest.raises(DomainError):
        SolverOptions(method="newton")
    monkeypatch.setenv("ELASTICA_GRID_N", "256")
    monkeypatch.setenv("ELASTICA_TOL", "1e-6")
    opts = SolverOptions()
    assert opts.N == 256
    assert opts.tol == 1e-6


# ========== KKT RESIDUAL ==========

def test_vi_residual_rejects_infeasible_iterates(eu2):
    psi = Obstacle.symmetric_cone(0.4)
    u = GridFunction.from_function(lambda x: 0.2 * np.sin(np.pi * x), 64)
    with pytest.raises(InfeasibleIterateError):
        solver.vi_residual(eu2, 2.0, u, psi)


def test_vi_residual_on_free_and_contact_nodes(eu2):
    """A function far above psi has the plain gradient norm as residual."""
    psi = Obstacle.symmetric_cone(0.05)
    u = GridFunction.from_function(lambda x: 0.3 * np.sin(np.pi * x), 64)
    g = solver.gradient_discrete(eu2, 2.0, u)
    assert solver.vi_residual(eu2, 2.0, u, psi) == pytest.approx(np.max(np.abs(g)))
    assert not solver.coincidence_mask(u, psi).any()
    mu = solver.estimate_coincidence_measure(eu2, 2.0, u, psi)
    assert mu.shape == (65,)
    assert np.all(mu == 0.0)


# ========== THRESHOLDS AND EXISTENCE ==========

@pytest.mark.parametrize(
    "p,h,expected",
    [
        (2.0, 0.5, "exists_unique"),
        (3.0, 1.5, "no_minimizer"),
    ],
)
def test_threshold_verdict_examples(p, h, expected):
    assert solver.threshold_verdict(p, Obstacle.symmetric_cone(h)).verdict == expected


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_threshold_verdict_around_h_star(p):
    threshold = curves.h_star(p)
    verdict = solver.threshold_verdict
    assert verdict(p, Obstacle.symmetric_cone(0.8 * threshold)).verdict == "exists_unique"
    assert verdict(p, Obstacle.symmetric_cone(threshold)).verdict == "no_minimizer"
    assert verdict(p, Obstacle.symmetric_cone(1.2 * threshold)).verdict == "no_minimizer"


def test_threshold_verdict_needs_symmetric_cone():
    with pytest.raises(UnsupportedObstacleError):
        solver.threshold_verdict(2.0, Obstacle.cone(0.3, 0.4))


def test_existence_bound_check(eu2):
    low = solver.existence_bound_check(eu2, 2.0, Obstacle.symmetric_cone(0.1))
    assert low.dominating_c is not None
    assert low.holds and low.symmetric_holds
    assert low.bound == pytest.approx(eu2.c_p**2 / 4.0)
    high = solver.existence_bound_check(eu2, 2.0, Obstacle.symmetric_cone(0.4), trial_energy=2.0)
    assert not high.holds
    assert high.symmetric_holds


# ========== NONEXISTENCE BOUND ==========

@pytest.mark.parametrize("p", [2.0, 3.0])
def test_H_is_a_weighted_mean(p):
    G = ShapeFunction.eu_p(p)
    for A in np.logspace(-3.0, 0.0, 7):
        H = solver.nonexistence_H(G, p, float(A))
        assert 0.0 < H <= A


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_H_approaches_twice_h_star(p):
    G = ShapeFunction.eu_p(p)
    assert solver.nonexistence_limit(G) == pytest.approx(2.0 * curves.h_star(p), rel=1e-10)
    assert solver.nonexistence_H(G, p, 1e4) == pytest.approx(2.0 * curves.h_star(p), abs=1e-2)


def test_hbound_table_layout(eu2):
    table = solver.hbound_table(eu2, 2.0, A_grid=np.logspace(-2.0, 3.0, 11))
    assert list(table.columns) == ["A", "H", "half_H"]
    assert len(table) == 12
    assert np.isinf(table["A"].iloc[-1])
    assert table["H"].iloc[-1] == pytest.approx(2.0 * curves.h_star(2.0), rel=1e-10)
    assert np.allclose(table["half_H"], 0.5 * table["H"])


def test_nonexistence_bound_is_at_least_h_star(eu2):
    bound = solver.nonexistence_bound(eu2, 2.0, A_grid=np.logspace(-2.0, 3.0, 11))
    assert bound >= curves.h_star(2.0) - 1e-12
    assert bound < 1.2 * curves.h_star(2.0)


def test_singular_moments_vanish_on_an_empty_interval(eu2):
    """The profile ODE starts at A with an empty integration range."""
    assert solver._singular_moments(eu2, 2.0, 0.7, lower=0.7) == (0.0, 0.0)
    head, moment = solver._singular_moments(eu2, 2.0, 0.7, lower=0.35)
    assert head > 0.0 and moment > 0.0


def test_H_needs_a_decaying_profile():
    with pytest.raises(AssumptionViolation):
        solver.nonexistence_H(ShapeFunction.identity(), 2.0, 1.0)
    with pytest.raises(DomainError):
        solver.nonexistence_H(ShapeFunction.eu_p(2.0), 2.0, 0.0)


def test_general_cone_profile_rejects_tall_cones(eu2):
    with pytest.raises(ThresholdError):
        solver.general_cone_profile(eu2, 2.0, 2.0, 64)


@pytest.mark.slow
def test_general_cone_profile_matches_exact_minimizer(eu2, exact_cone_p2):
    profile = solver.general_cone_profile(eu2, 2.0, 0.4, 64)
    exact = exact_cone_p2.on_grid(64)
    assert profile.u.values[32] == 0.4
    assert np.max(np.abs(profile.u.values - exact.values)) < 1e-3
    assert profile.slope_at_zero == pytest.approx(exact.slopes[0], rel=5e-2)


# ========== MINIMIZATION ==========

def test_grid_levels_coarse_to_fine():
    assert solver._grid_levels(SolverOptions(N=512)) == [64, 128, 256, 512]
    assert solver._grid_levels(SolverOptions(N=96, symmetric=True)) == [96]
    assert solver._grid_levels(SolverOptions(N=200)) == [100, 200]


def test_projected_gradient_descent_is_monotone(eu2):
    """Accepted Armijo steps never raise the energy."""
    psi = Obstacle.symmetric_cone(0.3)
    opts = SolverOptions(N=64, method="projected-gradient", max_iter=200, tol=1e-12)
    report = solver.minimize(eu2, 2.0, psi, opts)
    history = np.array(report.energy_history)
    assert history.size > 0
    assert np.all(np.diff(history) <= 1e-12)
    assert np.all(report.minimizer.values[1:-1] >= psi.nodal(64)[1:-1] - 1e-12)
    assert not report.converged


def test_minimize_reports_threshold_verdicts(eu2):
    psi = Obstacle.symmetric_cone(0.3)
    report = solver.minimize(eu2, 2.0, psi, SolverOptions(N=64, symmetric=True, max_iter=50, tol=1e-12))
    data = report.to_dict()
    assert data["verdict"] == "exists_unique"
    assert data["h_star"] == pytest.approx(curves.h_star(2.0))
    assert data["uniqueness"].startswith("unique")
    assert data["N"] == 64


def test_folded_hessian_matches_differences_of_the_folded_gradient(eu2, rng):
    psi = Obstacle.symmetric_cone(0.3)
    problem = solver._Problem(eu2, 2.0, psi.nodal(32), symmetric=True)
    x = np.linspace(0.0, 1.0, 33)
    y = problem.restrict(0.35 * np.sin(np.pi * x))
    H = problem.hessian(y, 0.0)
    assert H.shape == (16, 16)
    t = 1e-6
    for _ in range(5):
        v = rng.uniform(-0.1, 0.1, size=16)
        _, plus = problem.value_and_grad(y + t * v, 0.0)
        _, minus = problem.value_and_grad(y - t * v, 0.0)
        numeric = (plus - minus) / (2.0 * t)
        analytic = H @ v
        assert np.max(np.abs(numeric - analytic)) <= 1e-5 * np.max(np.abs(analytic))


def test_coarse_symmetric_solve_reaches_the_tolerance(eu2):
    """The Newton polish takes the L-BFGS-B iterate below the KKT tolerance."""
    psi = Obstacle.symmetric_cone(0.3)
    report = solver.minimize(eu2, 2.0, psi, SolverOptions(N=64, symmetric=True, tol=5e-7))
    assert report.converged
    assert report.kkt_residual < 5e-7
    assert report.coincidence_nodes == [32]
    exact = curves.exact_cone_minimizer(2.0, 0.3).on_grid(64)
    assert np.max(np.abs(report.minimizer.values - exact.values)) < 1e-2


@pytest.mark.slow
def test_symmetric_cone_solve_matches_exact_minimizer(cone_solve_p2, exact_cone_p2):
    psi, report = cone_solve_p2
    exact = exact_cone_p2.on_grid(512)
    assert report.converged
    assert report.kkt_residual < 1e-6
    assert np.max(np.abs(report.minimizer.values - exact.values)) < 5e-3
    assert abs(report.energy - exact_cone_p2.energy) / exact_cone_p2.energy < 1e-2
    assert report.coincidence_nodes
    assert all(abs(i - 256) <= 2 for i in report.coincidence_nodes)
    assert np.sum(report.multipliers) * report.minimizer.h > 0


@pytest.mark.slow
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("fraction", [0.3, 0.6])
def test_solver_oracle_equivalence(p, fraction):
    """The default L-BFGS-B path agrees with the exact cone minimizer."""
    G = ShapeFunction.eu_p(p)
    h = fraction * curves.h_star(p)
    psi = Obstacle.symmetric_cone(h)
    report = solver.minimize(G, p, psi, SolverOptions(N=512, symmetric=True))
    exact = curves.exact_cone_minimizer(p, h)
    assert report.kkt_residual < 1e-6
    assert np.max(np.abs(report.minimizer.values - exact.on_grid(512).values)) < 5e-3
    assert abs(report.energy - exact.energy) / exact.energy < 1e-2


@pytest.mark.slow
def test_nonsymmetric_cone_solve_touches_the_tip(eu2):
    psi = Obstacle.cone(0.4, 0.3)
    report = solver.minimize(eu2, 2.0, psi, SolverOptions(N=256))
    assert report.converged
    tip = int(round(0.4 * 256))
    assert report.coincidence_nodes
    assert all(abs(i - tip) <= 2 for i in report.coincidence_nodes)
    assert report.verdicts["h_star"] == pytest.approx(curves.h_star(2.0))
    assert report.uniqueness.startswith("not asserted")


@pytest.mark.slow
def test_solver_output_obeys_the_energy_and_slope_bounds(eu2, cone_solve_p2):
    _, report = cone_solve_p2
    assert report.energy <= eu2.c_p**2 + 1e-6
    assert np.max(np.abs(report.minimizer.slopes)) <= slope_bound(eu2, 2.0, report.energy) + 1e-2


@pytest.mark.slow
def test_smooth_sampled_obstacle_solve(eu2):
    """Contact stays where the obstacle is concave."""
    x = np.linspace(0.0, 1.0, 1025)
    psi = Obstacle.sampled(x, 0.3 * np.exp(-(((x - 0.5) / 0.12) ** 2)) - 0.05)
    report = solver.minimize(eu2, 2.0, psi, SolverOptions(N=256, symmetric=True))
    assert report.converged
    assert report.coincidence_nodes
    u = report.minimizer
    assert diagnostics.check_noncoincidence_convex(u, psi, report.coincidence_nodes) == []
    assert all(abs(i / 256 - 0.5) < 0.085 for i in report.coincidence_nodes)
    assert np.all(u.values >= psi.nodal(256) - 1e-12)
    assert report.verdicts["h_star"] == pytest.approx(curves.h_star(2.0))
