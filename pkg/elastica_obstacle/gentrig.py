"""Generalized trigonometric functions.

sin_{q,r} is the inverse of x -> int_0^x (1 - t^r)^(-1/q) dt on [0, 1],
extended to the real line by reflection about pi_{q,r}/2, odd reflection and
2 pi_{q,r} periodicity. cos_{q,r} is its derivative.

Quadrature splits [0, 1] at 1 - 1e-3. The head is integrated adaptively with
scipy.integrate.quad; on the tail the substitution t = 1 - tau^{q'} removes the
endpoint singularity and a fixed Gauss-Legendre rule is exact to rounding.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Tuple, Union

import numpy as np
from scipy import integrate, special

from .exceptions import DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

SPLIT_GAP = 1e-3
NEWTON_TOL = 1e-14
MAX_NEWTON_STEPS = 80
_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(40)


@dataclass(frozen=True)
class GenTrigParams:
    """Parameters (q, r) of sin_{q,r}."""

    q: float
    r: float

    def __post_init__(self) -> None:
        if not self.q > 1:
            raise DomainError(f"q must exceed 1, got {self.q}")
        if not self.r > 0:
            raise DomainError(f"r must be positive, got {self.r}")

    @property
    def q_conj(self) -> float:
        return self.q / (self.q - 1.0)

    @property
    def half_pi(self) -> float:
        return 0.5 * pi_gen(self)


class BranchPoint(NamedTuple):
    """Principal-branch solve of sin_{q,r}.

    xi is the sine value in [0, 1]; tau is the tail variable (1 - xi)^{1/q'}
    where the point was solved on the tail and NaN elsewhere; one_minus is
    1 - xi^r computed without cancellation.
    """

    xi: np.ndarray
    tau: np.ndarray
    one_minus: np.ndarray


# ========== BETA FUNCTION ==========

def beta(x: float, y: float) -> float:
    """Euler beta function B(x, y)."""
    if x <= 0 or y <= 0:
        raise DomainError(f"beta requires positive arguments, got ({x}, {y})")
    return float(special.beta(x, y))


def beta_quad(x: float, y: float) -> float:
    """B(x, y) by QUADPACK's algebraic-weight rule.

    The weight t^{x-1}(1-t)^{y-1} is integrated exactly against f = 1, so both
    endpoint singularities are handled by the rule itself.
    """
    if x <= 0 or y <= 0:
        raise DomainError(f"beta requires positive arguments, got ({x}, {y})")
    value, _ = integrate.quad(
        lambda t: 1.0, 0.0, 1.0, weight="alg", wvar=(x - 1.0, y - 1.0),
        epsabs=1e-14, epsrel=1e-13, limit=200,
    )
    return float(value)


# ========== SINGULAR QUADRATURE ==========

def _ratio_g(r: float, d: np.ndarray) -> np.ndarray:
    """(1 - t^r)/(1 - t) as a function of d = 1 - t, stable for small d."""
    d = np.asarray(d, dtype=float)
    safe = np.where((d > 0) & (d < 1), d, 0.5)
    value = -np.expm1(r * np.log1p(-safe)) / safe
    value = np.where(d >= 1, 1.0, value)
    return np.where(d > 0, value, r)


def _head(q: float, r: float, m: float, a: float, b: float) -> float:
    if b <= a:
        return 0.0
    value, _ = integrate.quad(
        lambda t: t**m * (1.0 - t**r) ** (-1.0 / q), a, b,
        epsabs=1e-15, epsrel=1e-13, limit=200,
    )
    return float(value)


def _tail(q: float, r: float, m: float, tau_lo: float, tau_hi: float) -> float:
    """Integral over t in [1 - tau_hi^{q'}, 1 - tau_lo^{q'}] in the tau variable."""
    if tau_hi <= tau_lo:
        return 0.0
    q_conj = q / (q - 1.0)
    half = 0.5 * (tau_hi - tau_lo)
    tau = half * _GAUSS_NODES + 0.5 * (tau_hi + tau_lo)
    d = tau**q_conj
    t = 1.0 - d
    integrand = q_conj * t**m * _ratio_g(r, d) ** (-1.0 / q)
    return float(half * np.dot(_GAUSS_WEIGHTS, integrand))


@lru_cache(maxsize=256)
def _head_to_split(q: float, r: float, m: float) -> float:
    return _head(q, r, m, 0.0, 1.0 - SPLIT_GAP)


@lru_cache(maxsize=256)
def _complete(q: float, r: float, m: float) -> float:
    q_conj = q / (q - 1.0)
    return _head_to_split(q, r, m) + _tail(q, r, m, 0.0, SPLIT_GAP ** (1.0 / q_conj))


def incomplete_integral(q: float, r: float, m: float, x: float) -> float:
    """int_0^x t^m (1 - t^r)^(-1/q) dt for x in [0, 1]."""
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x must lie in [0, 1], got {x}")
    split = 1.0 - SPLIT_GAP
    if x <= split:
        return _head(q, r, m, 0.0, x)
    q_conj = q / (q - 1.0)
    tau_split = SPLIT_GAP ** (1.0 / q_conj)
    tau_x = (1.0 - x) ** (1.0 / q_conj)
    return _head_to_split(q, r, m) + _tail(q, r, m, tau_x, tau_split)


def complementary_integral(q: float, r: float, m: float, tau: float) -> float:
    """int_{1 - tau^{q'}}^1 t^m (1 - t^r)^(-1/q) dt for small tau."""
    return _tail(q, r, m, 0.0, tau)


def branch_moment(params: GenTrigParams, m: float, point: BranchPoint) -> np.ndarray:
    """int_0^xi t^m (1 - t^r)^(-1/q) dt for each principal-branch point.

    Points solved on the tail are integrated from 1 downwards in tau so no
    precision is lost near xi = 1.
    """
    xi = np.atleast_1d(point.xi)
    tau = np.atleast_1d(point.tau)
    out = np.empty_like(xi)
    full = _complete(params.q, params.r, m)
    for i in range(xi.size):
        if np.isnan(tau[i]):
            out[i] = incomplete_integral(params.q, params.r, m, float(xi[i]))
        else:
            out[i] = full - complementary_integral(params.q, params.r, m, float(tau[i]))
    return out


# ========== INVERSE SINE AND HALF PERIOD ==========

def asin_gen(params: GenTrigParams, x: ArrayLike) -> ArrayLike:
    """sin_{q,r}^{-1} x = int_0^x (1 - t^r)^(-1/q) dt on [0, 1]."""
    values = np.asarray(x, dtype=float)
    if np.any(values < 0.0) or np.any(values > 1.0) or np.any(np.isnan(values)):
        raise DomainError("asin_gen is defined on [0, 1]")
    flat = [incomplete_integral(params.q, params.r, 0.0, float(v)) for v in values.ravel()]
    result = np.array(flat).reshape(values.shape)
    return float(result) if result.ndim == 0 else result


@lru_cache(maxsize=256)
def _pi_cached(q: float, r: float) -> float:
    return 2.0 * _complete(q, r, 0.0)


def pi_gen(params: GenTrigParams) -> float:
    """pi_{q,r} = 2 sin_{q,r}^{-1}(1), by quadrature."""
    return _pi_cached(params.q, params.r)


def pi_gen_beta(params: GenTrigParams) -> float:
    """(2/r) B(1/r, 1/q'), the closed form obtained by substituting u = t^r."""
    return 2.0 / params.r * beta(1.0 / params.r, 1.0 / params.q_conj)


def beta_formula_discrepancy(params: GenTrigParams) -> dict:
    """Compare pi_{q,r} by quadrature with two beta-function closed forms.

    The form (2/r) B(1/q', 1/q) does not depend on r when q = 2, so it cannot
    equal the quadrature value in general. It is reported and logged, never used.
    """
    quadrature = pi_gen(params)
    corrected = pi_gen_beta(params)
    printed = 2.0 / params.r * beta(1.0 / params.q_conj, 1.0 / params.q)
    report = {
        "q": params.q,
        "r": params.r,
        "quadrature": quadrature,
        "beta_substituted": corrected,
        "beta_printed": printed,
        "substituted_error": abs(corrected - quadrature),
        "printed_error": abs(printed - quadrature),
    }
    if report["substituted_error"] > 1e-8 * max(1.0, quadrature):
        logger.warning(f"pi_gen quadrature disagrees with (2/r)B(1/r, 1/q'): {report}")
    if report["printed_error"] > 1e-8 * max(1.0, quadrature):
        logger.warning(
            f"(2/r)B(1/q', 1/q) = {printed:.10f} is inconsistent with "
            f"pi_{{{params.q:g},{params.r:g}}} = {quadrature:.10f}"
        )
    return report


# ========== PRINCIPAL BRANCH SOLVES ==========

def _solve_head(params: GenTrigParams, target: float, guess: float) -> float:
    """Safeguarded Newton for asin_gen(xi) = target with xi in [0, 1 - gap]."""
    q, r = params.q, params.r
    lo, hi = 0.0, 1.0 - SPLIT_GAP
    xi = min(max(guess, lo), hi)
    for _ in range(MAX_NEWTON_STEPS):
        residual = _head(q, r, 0.0, 0.0, xi) - target
        if residual > 0:
            hi = xi
        else:
            lo = xi
        slope = (1.0 - xi**r) ** (-1.0 / q)
        step = residual / slope
        candidate = xi - step
        if not lo <= candidate <= hi:
            candidate = 0.5 * (lo + hi)
        if abs(candidate - xi) < NEWTON_TOL or hi - lo < NEWTON_TOL:
            return candidate
        xi = candidate
    logger.warning(f"asin_gen inversion hit the step cap at target {target}")
    return xi


def _solve_tail(params: GenTrigParams, eta: float) -> float:
    """Solve int_0^tau q' g^(-1/q) = eta for tau, i.e. the distance below pi/2."""
    q, r = params.q, params.r
    q_conj = params.q_conj
    lo, hi = 0.0, SPLIT_GAP ** (1.0 / q_conj)
    tau = min(eta / (q_conj * r ** (-1.0 / q)), hi)
    for _ in range(MAX_NEWTON_STEPS):
        residual = _tail(q, r, 0.0, 0.0, tau) - eta
        if residual > 0:
            hi = tau
        else:
            lo = tau
        slope = q_conj * float(_ratio_g(r, np.array(tau**q_conj))) ** (-1.0 / q)
        candidate = tau - residual / slope
        if not lo <= candidate <= hi:
            candidate = 0.5 * (lo + hi)
        if abs(candidate - tau) < NEWTON_TOL or hi - lo < NEWTON_TOL:
            return candidate
        tau = candidate
    logger.warning(f"tail inversion hit the step cap at eta {eta}")
    return tau


def principal_branch(params: GenTrigParams, angle: ArrayLike) -> BranchPoint:
    """Solve sin_{q,r} on [0, pi_{q,r}/2] for every entry of angle."""
    a = np.atleast_1d(np.asarray(angle, dtype=float))
    half = params.half_pi
    if np.any(a < -1e-14) or np.any(a > half + 1e-14):
        raise DomainError("principal branch arguments must lie in [0, pi_{q,r}/2]")
    a = np.clip(a, 0.0, half)
    q_conj = params.q_conj
    split_angle = _head_to_split(params.q, params.r, 0.0)

    xi = np.empty_like(a)
    tau = np.full_like(a, np.nan)
    one_minus = np.empty_like(a)
    order = np.argsort(a, kind="stable")
    guess = 0.0
    for i in order:
        if a[i] <= split_angle:
            value = _solve_head(params, float(a[i]), max(guess, 0.0))
            xi[i] = value
            one_minus[i] = 1.0 - value**params.r
            guess = value
        else:
            t = _solve_tail(params, half - float(a[i]))
            d = t**q_conj
            tau[i] = t
            xi[i] = 1.0 - d
            one_minus[i] = d * float(_ratio_g(params.r, np.array(d)))
    return BranchPoint(xi, tau, one_minus)


def reduce_argument(params: GenTrigParams, x: ArrayLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Map x to the principal branch.

    Returns (angle in [0, pi/2], sign of sin, sign of cos).
    """
    big_pi = pi_gen(params)
    values = np.asarray(x, dtype=float)
    y = np.remainder(values + big_pi, 2.0 * big_pi) - big_pi
    sin_sign = np.where(y < 0, -1.0, 1.0)
    a = np.abs(y)
    upper = a > 0.5 * big_pi
    angle = np.where(upper, big_pi - a, a)
    cos_sign = np.where(upper, -1.0, 1.0)
    return np.clip(angle, 0.0, 0.5 * big_pi), sin_sign, cos_sign


def sin_cos_gen(params: GenTrigParams, x: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """sin_{q,r} x and cos_{q,r} x from one shared branch solve."""
    values = np.asarray(x, dtype=float)
    angle, sin_sign, cos_sign = reduce_argument(params, values)
    point = principal_branch(params, angle.ravel())
    s = (sin_sign.ravel() * point.xi).reshape(values.shape)
    c = (cos_sign.ravel() * point.one_minus ** (1.0 / params.q)).reshape(values.shape)
    if values.ndim == 0:
        return float(s), float(c)
    return s, c


def sin_gen(params: GenTrigParams, x: ArrayLike) -> ArrayLike:
    """sin_{q,r} x for any real x."""
    return sin_cos_gen(params, x)[0]


def cos_gen(params: GenTrigParams, x: ArrayLike) -> ArrayLike:
    """cos_{q,r} x = sign * (1 - |sin_{q,r} x|^r)^(1/q)."""
    return sin_cos_gen(params, x)[1]
