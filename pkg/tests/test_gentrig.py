"""Tests for generalized trigonometric functions and their quadrature."""
import logging

import numpy as np
import pytest

from elastica_obstacle import gentrig
from elastica_obstacle.exceptions import DomainError
from elastica_obstacle.gentrig import GenTrigParams


def test_beta_matches_quadrature_oracle():
    """scipy's beta and the algebraic-weight quadrature agree on the reference values."""
    assert gentrig.beta(0.5, 0.5) == pytest.approx(np.pi, abs=1e-10)
    assert gentrig.beta_quad(0.5, 0.5) == pytest.approx(np.pi, abs=1e-10)
    assert gentrig.beta(0.75, 0.5) == pytest.approx(2.3962804694, abs=1e-9)
    assert gentrig.beta_quad(0.75, 0.5) == pytest.approx(2.3962804694, abs=1e-9)


def test_beta_rejects_non_positive_arguments():
    with pytest.raises(DomainError):
        gentrig.beta(0.0, 1.0)
    with pytest.raises(DomainError):
        gentrig.beta_quad(1.0, -0.5)


def test_circular_case_reduces_to_arcsin():
    params = GenTrigParams(2.0, 2.0)
    assert gentrig.asin_gen(params, 0.5) == pytest.approx(np.pi / 6.0, abs=1e-10)
    assert gentrig.pi_gen(params) == pytest.approx(np.pi, abs=1e-10)
    x = np.linspace(-7.0, 7.0, 41)
    assert np.allclose(gentrig.sin_gen(params, x), np.sin(x), atol=1e-10)
    assert np.allclose(gentrig.cos_gen(params, x), np.cos(x), atol=1e-9)


def test_pi_gen_reference_values():
    """pi_{2,4} is the lemniscate case p = 2 and pi_{2,3} the case p = 3."""
    assert gentrig.pi_gen(GenTrigParams(2.0, 4.0)) == pytest.approx(2.6220575543, abs=1e-8)
    assert gentrig.pi_gen(GenTrigParams(2.0, 3.0)) == pytest.approx(2.8043642106, abs=1e-8)


@pytest.mark.parametrize("r", [3.0, 4.0, 6.0, 2.5])
def test_pi_gen_matches_substituted_beta_form(r):
    params = GenTrigParams(2.0, r)
    assert gentrig.pi_gen(params) == pytest.approx(gentrig.pi_gen_beta(params), rel=1e-10)


def test_printed_beta_form_is_reported_inconsistent(caplog):
    """(2/r) B(1/q', 1/q) is logged as inconsistent and never replaces quadrature."""
    params = GenTrigParams(2.0, 4.0)
    with caplog.at_level(logging.WARNING, logger="elastica_obstacle.gentrig"):
        report = gentrig.beta_formula_discrepancy(params)
    assert report["quadrature"] == pytest.approx(2.6220575543, abs=1e-8)
    assert report["substituted_error"] < 1e-9
    assert report["beta_printed"] == pytest.approx(np.pi / 2.0, abs=1e-12)
    assert report["printed_error"] > 1.0
    assert any("inconsistent" in record.message for record in caplog.records)


def test_incomplete_integral_endpoints():
    params = GenTrigParams(2.0, 4.0)
    assert gentrig.incomplete_integral(2.0, 4.0, 0.0, 0.0) == 0.0
    assert gentrig.incomplete_integral(2.0, 4.0, 0.0, 1.0) == pytest.approx(params.half_pi, rel=1e-13)
    # int_0^1 t^2 (1 - t^4)^{-1/2} dt = B(3/4, 1/2)/4
    assert gentrig.incomplete_integral(2.0, 4.0, 2.0, 1.0) == pytest.approx(
        0.25 * gentrig.beta(0.75, 0.5), rel=1e-11
    )


def test_incomplete_integral_is_continuous_across_the_split():
    below = gentrig.incomplete_integral(2.0, 4.0, 2.0, 1.0 - gentrig.SPLIT_GAP - 1e-12)
    above = gentrig.incomplete_integral(2.0, 4.0, 2.0, 1.0 - gentrig.SPLIT_GAP + 1e-12)
    assert above == pytest.approx(below, abs=1e-10)


def test_sin_gen_round_trip():
    params = GenTrigParams(2.0, 4.0)
    angle = gentrig.asin_gen(params, 0.3)
    assert gentrig.sin_gen(params, angle) == pytest.approx(0.3, abs=1e-12)
    near_top = gentrig.asin_gen(params, 1.0 - 1e-9)
    assert gentrig.sin_gen(params, near_top) == pytest.approx(1.0 - 1e-9, abs=1e-12)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 5.0])
def test_pythagorean_identity(p):
    """|cos x|^2 + |sin x|^{2p'} = 1 at 1000 points over two periods."""
    r = 2.0 * p / (p - 1.0)
    params = GenTrigParams(2.0, r)
    x = np.linspace(-2.0 * gentrig.pi_gen(params), 2.0 * gentrig.pi_gen(params), 1000)
    s, c = gentrig.sin_cos_gen(params, x)
    assert np.max(np.abs(np.abs(c) ** 2 + np.abs(s) ** r - 1.0)) < 1e-10


@pytest.mark.parametrize("r", [3.0, 4.0, 6.0])
def test_sin_gen_solves_its_ode(r):
    """y = sin_{2,r} satisfies y'' + (r/2)|y|^{r-2} y = 0 over a full period."""
    params = GenTrigParams(2.0, r)
    big_pi = gentrig.pi_gen(params)
    x = np.linspace(0.05, 2.0 * big_pi - 0.05, 400)
    step = 1e-3
    y = gentrig.sin_gen(params, x)
    second = (gentrig.sin_gen(params, x + step) - 2.0 * y + gentrig.sin_gen(params, x - step)) / step**2
    residual = second + 0.5 * r * np.abs(y) ** (r - 2.0) * y
    assert np.max(np.abs(residual)) < 1e-4


def test_sin_gen_symmetries():
    params = GenTrigParams(2.0, 3.0)
    big_pi = gentrig.pi_gen(params)
    x = np.array([0.1, 0.7, 1.2, 2.0])
    s = gentrig.sin_gen(params, x)
    assert np.allclose(gentrig.sin_gen(params, -x), -s, atol=1e-12)
    assert np.allclose(gentrig.sin_gen(params, big_pi - x), s, atol=1e-11)
    assert np.allclose(gentrig.sin_gen(params, x + 2.0 * big_pi), s, atol=1e-11)
    assert gentrig.sin_gen(params, 0.5 * big_pi) == pytest.approx(1.0, abs=1e-12)


def test_principal_branch_is_monotone():
    params = GenTrigParams(2.0, 4.0)
    angles = np.linspace(0.0, params.half_pi, 301)
    point = gentrig.principal_branch(params, angles)
    assert np.all(np.diff(point.xi) > 0)
    assert point.xi[0] == 0.0
    assert point.xi[-1] == pytest.approx(1.0, abs=1e-14)


def test_domain_errors():
    with pytest.raises(DomainError):
        GenTrigParams(1.0, 2.0)
    with pytest.raises(DomainError):
        gentrig.asin_gen(GenTrigParams(2.0, 4.0), 1.5)
    with pytest.raises(DomainError):
        gentrig.incomplete_integral(2.0, 4.0, 0.0, -0.1)
