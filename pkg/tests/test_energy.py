"""Tests for shape functions, grid functions and the discrete energy."""
import numpy as np
import pandas as pd
import pytest
from scipy import integrate

from elastica_obstacle import curves
from elastica_obstacle.energy import (
    GridFunction,
    ShapeFunction,
    check_shape_assumption,
    curvature_density,
    energy_curvature_form,
    energy_discrete,
    eu_p,
    eu_p_inverse,
    euler_substitution,
    gradient_discrete,
    hessian_discrete,
    shape_function_by_name,
    slope_bound,
    slope_function,
)
from elastica_obstacle.exceptions import AssumptionViolation, DomainError


# ========== SHAPE FUNCTIONS ==========

def test_eu_p_limit_is_half_c_p():
    assert eu_p(2.0, 1e200) == pytest.approx(1.1981402347, abs=1e-9)
    assert eu_p(2.0, -1e200) == pytest.approx(-1.1981402347, abs=1e-9)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("z", [0.2, 0.7, 3.0, 25.0])
def test_eu_p_matches_quadrature(p, z):
    """The incomplete-beta closed form agrees with direct quadrature of the integrand."""
    exponent = 1.5 - 0.5 / p
    expected, _ = integrate.quad(lambda s: (1.0 + s * s) ** (-exponent), 0.0, z, epsabs=1e-14, epsrel=1e-13)
    assert eu_p(p, z) == pytest.approx(expected, rel=1e-11)


@pytest.mark.parametrize("p", [1.5, 2.0, 5.0])
def test_eu_p_inverse_round_trip(p):
    G = ShapeFunction.eu_p(p)
    y = np.linspace(-0.999, 0.999, 41) * G.sup
    assert np.allclose(G(G.inv(y)), y, atol=1e-12)
    z = np.array([-40.0, -1.0, 0.0, 0.3, 8.0])
    assert np.allclose(eu_p_inverse(p, eu_p(p, z)), z, rtol=1e-9, atol=1e-12)


def test_eu_p_inverse_rejects_out_of_range(eu2):
    with pytest.raises(DomainError):
        eu2.inv(eu2.sup)
    with pytest.raises(DomainError):
        eu_p(0.9, 1.0)


def test_eu_p_derivatives_match_finite_differences(eu2):
    z = np.linspace(-3.0, 3.0, 13)
    t = 1e-6
    fd = (eu2(z + t) - eu2(z - t)) / (2.0 * t)
    assert np.allclose(eu2.derivative(z), fd, atol=1e-8)
    fd2 = (eu2.derivative(z + t) - eu2.derivative(z - t)) / (2.0 * t)
    assert np.allclose(eu2.second_derivative(z), fd2, atol=1e-7)


def test_first_moment_closed_form_matches_quadrature():
    """Closed-form antiderivatives of s G'(s) agree with the quad fallback."""
    for G in (ShapeFunction.eu_p(2.0), ShapeFunction.eu_p(3.0), ShapeFunction.tanh()):
        numeric = ShapeFunction.from_derivative(G.derivative, G.second_derivative, name="copy")
        assert float(G.first_moment(0.3, 2.0)) == pytest.approx(float(numeric.first_moment(0.3, 2.0)), rel=1e-9)
        assert float(G.first_moment(0.0, np.inf)) == pytest.approx(
            float(numeric.first_moment(0.0, np.inf)), rel=1e-8
        )


def test_from_derivative_recovers_bounded_profile():
    G = ShapeFunction.tanh()
    custom = ShapeFunction.from_derivative(G.derivative, G.second_derivative, name="sech2")
    assert custom.sup == pytest.approx(1.0, abs=1e-10)
    z = np.array([-2.0, -0.1, 0.0, 0.5, 3.0])
    assert np.allclose(custom(z), np.tanh(z), atol=1e-11)
    assert np.allclose(custom.inv(np.tanh(z)), z, atol=1e-9)


def test_shape_function_names_and_assumptions():
    assert shape_function_by_name("eu_p", 3.0).p == 3.0
    assert shape_function_by_name("TANH", 2.0).sup == 1.0
    with pytest.raises(DomainError):
        shape_function_by_name("cubic", 2.0)
    check_shape_assumption(ShapeFunction.eu_p(2.0))
    even = ShapeFunction(
        name="even",
        value=lambda z: z * z,
        derivative=lambda z: 2.0 * z,
        second_derivative=lambda z: 2.0 + 0.0 * z,
        inverse=np.sqrt,
    )
    with pytest.raises(AssumptionViolation):
        check_shape_assumption(even)


# ========== GRID FUNCTIONS ==========

def test_grid_function_requires_zero_ends():
    with pytest.raises(DomainError):
        GridFunction(np.array([0.0, 0.1, 0.2, 0.1, 0.05]))
    with pytest.raises(DomainError):
        GridFunction(np.array([0.0, 0.1, 0.0]))
    u = GridFunction(np.array([1e-12, 0.1, 0.2, 0.1, 0.0]))
    assert u.values[0] == 0.0


def test_grid_function_csv(tmp_path):
    u = GridFunction.from_function(lambda x: x * (1.0 - x), 16)
    path = tmp_path / "u.csv"
    u.to_csv(str(path))
    assert np.array_equal(GridFunction.from_csv(str(path)).values, u.values)

    bad = tmp_path / "bad.csv"
    pd.DataFrame({"t": u.x, "u": u.values}).to_csv(bad, index=False)
    with pytest.raises(DomainError):
        GridFunction.from_csv(str(bad))


def test_grid_quotients_of_a_parabola():
    u = GridFunction.from_function(lambda x: x * (1.0 - x), 64)
    assert np.allclose(u.second_quotients, -2.0, atol=1e-10)
    assert np.allclose(u.third_differences, 0.0, atol=1e-6)
    assert np.allclose(u.nodal_second_derivative(), -2.0, atol=1e-8)
    assert np.allclose(u.nodal_slopes, 1.0 - 2.0 * u.x, atol=1e-10)


# ========== DISCRETE ENERGY ==========

@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("fraction", [0.3, 1.0])
def test_energy_of_comparison_function_converges_to_c_power_p(p, fraction):
    """E(u_c) = c^p, with the discrete error shrinking as the grid is refined."""
    G = ShapeFunction.eu_p(p)
    c = fraction * 0.5 * G.c_p
    errors = []
    for N in (256, 512, 1024, 2048):
        u = GridFunction.from_function(lambda x: curves.comparison_uc(G, c, x), N)
        errors.append(abs(energy_discrete(G, p, u) - c**p) / c**p)
    assert errors[-1] < 1e-3
    assert all(later < earlier for earlier, later in zip(errors, errors[1:]))


def test_energy_of_clamped_test_function(eu2):
    """Linear caps carry no energy: E = (1 - 2 delta)(c/(1 - 2 delta))^p."""
    u = GridFunction.from_function(lambda x: curves.clamped_test_function(eu2, 1.0, 0.05, x), 2000)
    assert energy_discrete(eu2, 2.0, u) == pytest.approx(0.9 * (1.0 / 0.9) ** 2, rel=5e-3)


def test_graph_form_agrees_with_curvature_form(eu2):
    """For G = EU_p the generalized energy is the p-elastic energy of the graph."""
    u = GridFunction.from_function(lambda x: x * (1.0 - x), 2048)
    assert energy_discrete(eu2, 2.0, u) == pytest.approx(energy_curvature_form(2.0, u), rel=1e-3)


def test_energy_is_reflection_invariant(eu2, rng):
    x = np.linspace(0.0, 1.0, 129)
    u = GridFunction(np.sin(np.pi * x) * (0.3 + 0.1 * x) + 0.01 * rng.standard_normal(129) * x * (1.0 - x))
    assert energy_discrete(eu2, 2.0, u.reflected()) == pytest.approx(energy_discrete(eu2, 2.0, u), rel=1e-12)


def _smooth_direction(rng, x, modes=3, amplitude=0.1):
    return sum(amplitude * rng.uniform(-1.0, 1.0) * np.sin(k * np.pi * x) for k in range(1, modes + 1))


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_gradient_matches_central_differences(p, rng):
    """Analytic directional derivatives agree with central differences on 20 random grid functions."""
    G = ShapeFunction.eu_p(p)
    N = 128
    x = np.linspace(0.0, 1.0, N + 1)
    t = 1e-6
    for _ in range(20):
        base = rng.uniform(0.6, 1.0) * x * (1.0 - x)
        base = base + sum(0.003 * rng.uniform(-1.0, 1.0) * np.sin(k * np.pi * x) for k in (2, 3))
        u = GridFunction(base)
        phi = _smooth_direction(rng, x)
        analytic = float(np.dot(gradient_discrete(G, p, u), phi[1:-1]))
        plus = energy_discrete(G, p, GridFunction(u.values + t * phi))
        minus = energy_discrete(G, p, GridFunction(u.values - t * phi))
        numeric = (plus - minus) / (2.0 * t)
        assert abs(numeric - analytic) <= 1e-6 * abs(analytic)


def test_smoothed_gradient_matches_smoothed_energy(rng):
    G = ShapeFunction.eu_p(1.5)
    x = np.linspace(0.0, 1.0, 65)
    u = GridFunction(0.2 * np.sin(np.pi * x))
    phi = _smooth_direction(rng, x)
    t, eps = 1e-6, 1e-2
    analytic = float(np.dot(gradient_discrete(G, 1.5, u, eps), phi[1:-1]))
    numeric = (
        energy_discrete(G, 1.5, GridFunction(u.values + t * phi), eps)
        - energy_discrete(G, 1.5, GridFunction(u.values - t * phi), eps)
    ) / (2.0 * t)
    assert numeric == pytest.approx(analytic, rel=1e-6)


@pytest.mark.parametrize("p,eps", [(1.5, 1e-2), (2.0, 0.0), (3.0, 0.0)])
def test_hessian_matches_differences_of_the_gradient(p, eps, rng):
    G = ShapeFunction.eu_p(p)
    x = np.linspace(0.0, 1.0, 17)
    u = GridFunction(0.3 * np.sin(np.pi * x) + 0.02 * np.sin(3.0 * np.pi * x))
    H = hessian_discrete(G, p, u, eps)
    assert H.shape == (15, 15)
    dense = H.toarray()
    assert np.max(np.abs(dense - dense.T)) <= 1e-12 * np.max(np.abs(dense))
    t = 1e-6
    for _ in range(5):
        phi = _smooth_direction(rng, x)
        plus = gradient_discrete(G, p, GridFunction(u.values + t * phi), eps)
        minus = gradient_discrete(G, p, GridFunction(u.values - t * phi), eps)
        numeric = (plus - minus) / (2.0 * t)
        analytic = H @ phi[1:-1]
        assert np.max(np.abs(numeric - analytic)) <= 1e-5 * np.max(np.abs(analytic))


def test_hessian_is_pentadiagonal_and_convexified_is_semidefinite(eu2):
    u = GridFunction.from_function(lambda x: 0.3 * np.sin(np.pi * x), 32)
    H = hessian_discrete(eu2, 2.0, u).toarray()
    rows, cols = np.nonzero(H)
    assert np.max(np.abs(rows - cols)) == 2
    convex = hessian_discrete(eu2, 2.0, u, convexify=True).toarray()
    assert np.all(np.linalg.eigvalsh(convex) >= -1e-8 * np.max(np.abs(convex)))


def test_gradient_is_linear_for_small_slopes(eu2):
    """At p = 2 the leading term is quadratic, so g(2u) ~ 2 g(u) for small u."""
    u = GridFunction.from_function(lambda x: 1e-4 * np.sin(np.pi * x) * (1.0 + x), 256)
    doubled = GridFunction(2.0 * u.values)
    g1 = gradient_discrete(eu2, 2.0, u)
    g2 = gradient_discrete(eu2, 2.0, doubled)
    assert np.linalg.norm(g2 - 2.0 * g1) <= 1e-4 * np.linalg.norm(g2)


def test_gradient_is_difference_of_slope_function(eu2):
    u = GridFunction.from_function(lambda x: 0.3 * np.sin(np.pi * x), 64)
    m = slope_function(eu2, 2.0, u)
    assert np.allclose(gradient_discrete(eu2, 2.0, u), m[:-1] - m[1:], atol=1e-14)


def test_euler_substitution_is_positive_on_concave_graphs(eu2):
    u = GridFunction.from_function(lambda x: 0.3 * np.sin(np.pi * x), 64)
    w = euler_substitution(eu2, 2.0, u)
    assert np.all(w > 0)
    assert np.allclose(w, -2.0 * curvature_density(eu2, u))


def test_slope_bound(eu2):
    assert slope_bound(eu2, 2.0, 0.25) == pytest.approx(float(eu2.inv(0.5)), rel=1e-12)
    assert slope_bound(eu2, 2.0, 4.0) == float("inf")
