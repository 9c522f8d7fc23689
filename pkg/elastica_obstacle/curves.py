"""Explicit free p-elastica and the comparison functions built from them.

Gamma_lambda = (X_lambda, Y_lambda) is the arc-length parametrized graph curve
whose curvature is k_lambda = |omega_lambda|^{(2-p)/(p-1)} omega_lambda with
omega_lambda(s) = -(lambda p')^{1/p'} sin_{2,2p'}(alpha s),
alpha = (p')^{-1/p'} lambda^{1/p}.

On the principal branch everything is a function of xi = sin_{2,2p'}(alpha s):

    X = I(xi)/alpha,  Y = xi/alpha,  X' = xi^{p'},  Y' = (1 - xi^{2p'})^{1/2}

with I(xi) = int_0^xi t^{p'} (1 - t^{2p'})^{-1/2} dt. The second half period
follows from X(2L - s) = 2X(L) - X(s) and Y(2L - s) = Y(s).
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy import integrate, optimize

from . import gentrig
from .energy import GridFunction, ShapeFunction
from .exceptions import AssumptionViolation, DomainError, ThresholdError
from .gentrig import GenTrigParams

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

DEFAULT_SAMPLES = 2048


# ========== CONSTANTS ==========

def conjugate(p: float) -> float:
    if not p > 1:
        raise DomainError(f"p must exceed 1, got {p}")
    return p / (p - 1.0)


def trig_params(p: float) -> GenTrigParams:
    """(q, r) = (2, 2p') for the p-elastica."""
    return GenTrigParams(2.0, 2.0 * conjugate(p))


def argument_factor(p: float, lam: float) -> float:
    """alpha = (p')^{-1/p'} lambda^{1/p}."""
    p_conj = conjugate(p)
    return p_conj ** (-1.0 / p_conj) * lam ** (1.0 / p)


def half_period(p: float, lam: float) -> float:
    """L_lambda = (1/2)(p')^{1/p'} lambda^{-1/p} pi_{2,2p'}."""
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    return 0.5 * gentrig.pi_gen(trig_params(p)) / argument_factor(p, lam)


def _full_moment(p: float) -> float:
    params = trig_params(p)
    return gentrig.incomplete_integral(params.q, params.r, conjugate(p), 1.0)


def c_p_of(G: ShapeFunction) -> float:
    """c_p(G) = 2 lim_{s -> inf} G(s)."""
    if G.sup is None:
        raise AssumptionViolation(f"{G.name} is unbounded, so c_p(G) is infinite")
    return G.c_p


def c_p_eu(p: float) -> float:
    """c_p(EU_p) = B(1/2, 1 - 1/(2p))."""
    conjugate(p)
    return gentrig.beta(0.5, 1.0 - 0.5 / p)


def h_star(p: float) -> float:
    """Existence threshold for symmetric cones: p'/B(1/2, 1 - 1/(2p))."""
    return conjugate(p) / c_p_eu(p)


def endpoint_constants(p: float) -> Tuple[float, float]:
    """(X_1(L_1), Y_1(L_1)) from the beta function."""
    p_conj = conjugate(p)
    x_end = 0.5 * p_conj ** (-1.0 + 1.0 / p_conj) * gentrig.beta(1.0 - 0.5 / p, 0.5)
    y_end = p_conj ** (1.0 / p_conj)
    return x_end, y_end


# ========== OMEGA AND CURVATURE ==========

def omega_lambda(p: float, lam: float, s: ArrayLike) -> ArrayLike:
    """omega_lambda(s) = -(lambda p')^{1/p'} sin_{2,2p'}(alpha s)."""
    if lam < 0:
        raise DomainError(f"lambda must be non-negative, got {lam}")
    p_conj = conjugate(p)
    if lam == 0:
        return np.zeros_like(np.asarray(s, dtype=float)) if np.ndim(s) else 0.0
    sine = gentrig.sin_gen(trig_params(p), argument_factor(p, lam) * np.asarray(s, dtype=float))
    return -((lam * p_conj) ** (1.0 / p_conj)) * sine


def curvature_k(p: float, lam: float, s: ArrayLike) -> ArrayLike:
    """k_lambda(s) = -(lambda p')^{1/p} sign(S)|S|^{1/(p-1)}, S = sin_{2,2p'}(alpha s)."""
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    sine = np.asarray(gentrig.sin_gen(trig_params(p), argument_factor(p, lam) * np.asarray(s, dtype=float)))
    result = -((lam * conjugate(p)) ** (1.0 / p)) * np.sign(sine) * np.abs(sine) ** (1.0 / (p - 1.0))
    return float(result) if result.ndim == 0 else result


# ========== THE CURVE ==========

@dataclass
class _BranchState:
    xi: np.ndarray
    moment: np.ndarray
    cos_abs: np.ndarray
    second_half: np.ndarray
    alpha: float
    full_moment: float


def _branch_state(p: float, lam: float, s: np.ndarray) -> _BranchState:
    L = half_period(p, lam)
    if np.any(s < -1e-12 * L) or np.any(s > 2.0 * L * (1.0 + 1e-12)):
        raise DomainError(f"arc length must lie in [0, 2L] = [0, {2.0 * L:.12g}]")
    s = np.clip(s, 0.0, 2.0 * L)
    alpha = argument_factor(p, lam)
    params = trig_params(p)
    folded = np.minimum(s, 2.0 * L - s)
    point = gentrig.principal_branch(params, alpha * folded)
    moment = gentrig.branch_moment(params, conjugate(p), point)
    return _BranchState(
        xi=point.xi,
        moment=moment,
        cos_abs=np.sqrt(point.one_minus),
        second_half=s > L,
        alpha=alpha,
        full_moment=_full_moment(p),
    )


def _coordinates(state: _BranchState) -> Tuple[np.ndarray, np.ndarray]:
    x_half = state.moment / state.alpha
    x_total = 2.0 * state.full_moment / state.alpha
    X = np.where(state.second_half, x_total - x_half, x_half)
    Y = state.xi / state.alpha
    return X, Y


def _tangent(p: float, state: _BranchState) -> Tuple[np.ndarray, np.ndarray]:
    dX = state.xi ** conjugate(p)
    dY = np.where(state.second_half, -state.cos_abs, state.cos_abs)
    return dX, dY


def gamma(p: float, lam: float, s: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """Gamma_lambda(s) = (X_lambda(s), Y_lambda(s)) for s in [0, 2 L_lambda]."""
    values = np.asarray(s, dtype=float)
    state = _branch_state(p, lam, np.atleast_1d(values).ravel())
    X, Y = _coordinates(state)
    if values.ndim == 0:
        return float(X[0]), float(Y[0])
    return X.reshape(values.shape), Y.reshape(values.shape)


def gamma_derivatives(p: float, lam: float, s: ArrayLike) -> Dict[str, np.ndarray]:
    """First and second derivatives of Gamma_lambda from the closed forms."""
    values = np.atleast_1d(np.asarray(s, dtype=float)).ravel()
    state = _branch_state(p, lam, values)
    p_conj = conjugate(p)
    dX, dY = _tangent(p, state)
    ddX = p_conj * state.xi ** (p_conj - 1.0) * state.alpha * dY
    ddY = -state.alpha * p_conj * state.xi ** (2.0 * p_conj - 1.0)
    return {"dX": dX, "dY": dY, "ddX": ddX, "ddY": ddY}


def _tan_polar_from_xi(p: float, xi: np.ndarray, moment: np.ndarray, cos_abs: np.ndarray) -> np.ndarray:
    """tan of the polar tangential angle on the first half period; lambda free."""
    p_conj = conjugate(p)
    numerator = moment * cos_abs - xi ** (p_conj + 1.0)
    denominator = moment * xi**p_conj + xi * cos_abs
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(xi > 0, numerator / denominator, 0.0)


def polar_tangential_tan(p: float, lam: float, s: ArrayLike) -> ArrayLike:
    """tan varpi_lambda(s), the angle from Gamma_lambda(s) to Gamma_lambda'(s)."""
    values = np.asarray(s, dtype=float)
    if np.any(values <= 0):
        raise DomainError("polar tangential angle needs s > 0 (its limit at 0 is 0)")
    state = _branch_state(p, lam, np.atleast_1d(values).ravel())
    X, Y = _coordinates(state)
    dX, dY = _tangent(p, state)
    angle = np.arctan2(X * dY - Y * dX, X * dX + Y * dY)
    result = np.tan(angle)
    if values.ndim == 0:
        return float(result[0])
    return result.reshape(values.shape)


@dataclass
class PElasticaCurve:
    """Samples of Gamma_lambda on [0, 2 L_lambda]."""

    p: float
    lam: float
    half_period: float
    s: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    k: np.ndarray
    theta: np.ndarray
    tan_pw: np.ndarray

    @property
    def length(self) -> float:
        return 2.0 * self.half_period

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"s": self.s, "X": self.X, "Y": self.Y, "k": self.k, "theta": self.theta, "tan_pw": self.tan_pw}
        )


def sample_curve(p: float, lam: float, samples: int = DEFAULT_SAMPLES) -> PElasticaCurve:
    """Sample Gamma_lambda with `samples` points per half period."""
    if samples < 1:
        raise DomainError(f"samples must be at least 1, got {samples}")
    L = half_period(p, lam)
    s = np.linspace(0.0, 2.0 * L, 2 * samples + 1)
    state = _branch_state(p, lam, s)
    X, Y = _coordinates(state)
    dX, dY = _tangent(p, state)
    k = -((lam * conjugate(p)) ** (1.0 / p)) * state.xi ** (1.0 / (p - 1.0))
    theta = np.arctan2(dY, dX)
    with np.errstate(invalid="ignore", divide="ignore"):
        tan_pw = np.where(s > 0, np.tan(np.arctan2(X * dY - Y * dX, X * dX + Y * dY)), 0.0)
    logger.debug(f"Sampled p={p} lambda={lam} curve, L={L:.10f}, {s.size} points")
    return PElasticaCurve(p, lam, L, s, X, Y, k, theta, tan_pw)


# ========== COMPARISON FUNCTIONS ==========

def _check_level(G: ShapeFunction, c: float) -> None:
    if not 0 < c < G.c_p:
        raise DomainError(f"c must lie in (0, c_p(G)) = (0, {G.c_p}), got {c}")


def comparison_uc(G: ShapeFunction, c: float, x: ArrayLike) -> ArrayLike:
    """u_c(x) = int_0^x G^{-1}(c/2 - c t) dt, written as a first moment of G'."""
    _check_level(G, c)
    values = np.asarray(x, dtype=float)
    if np.any(values < 0) or np.any(values > 1):
        raise DomainError("u_c is defined on [0, 1]")
    top = float(G.inv(0.5 * c))
    slopes = G.inv(0.5 * c - c * values)
    result = G.first_moment(slopes, np.full_like(slopes, top)) / c
    return float(result) if result.ndim == 0 else result


def comparison_uc_slope(G: ShapeFunction, c: float, x: ArrayLike) -> np.ndarray:
    """u_c'(x) = G^{-1}(c/2 - c x)."""
    _check_level(G, c)
    return G.inv(0.5 * c - c * np.asarray(x, dtype=float))


def profile_U0(G: ShapeFunction, x: ArrayLike) -> ArrayLike:
    """U_0 = lim_{c -> c_p} u_c; zero at both ends with peak p'/c_p for EU_p."""
    c = c_p_of(G)
    values = np.asarray(x, dtype=float)
    if np.any(values < 0) or np.any(values > 1):
        raise DomainError("U_0 is defined on [0, 1]")
    inner = (values > 0) & (values < 1)
    result = np.zeros_like(values)
    if np.any(inner):
        slopes = G.inv(0.5 * c - c * values[inner])
        result[inner] = G.first_moment(slopes, np.full_like(slopes, np.inf)) / c
    return float(result) if result.ndim == 0 else result


def clamped_test_function(G: ShapeFunction, c: float, delta: float, x: ArrayLike) -> ArrayLike:
    """u_c rescaled onto [delta, 1 - delta] with linear caps at both ends.

    Its energy is (1 - 2 delta)(c/(1 - 2 delta))^p, since the caps carry none.
    """
    _check_level(G, c)
    if not 0 < delta < 0.5:
        raise DomainError(f"delta must lie in (0, 1/2), got {delta}")
    values = np.asarray(x, dtype=float)
    slope0 = float(G.inv(0.5 * c))
    width = 1.0 - 2.0 * delta
    inner = np.clip((values - delta) / width, 0.0, 1.0)
    middle = slope0 * delta + width * np.asarray(comparison_uc(G, c, inner))
    result = np.where(
        values < delta, slope0 * values, np.where(values > 1.0 - delta, slope0 * (1.0 - values), middle)
    )
    return float(result) if result.ndim == 0 else result


# ========== EXACT CONE MINIMIZER ==========

@dataclass
class ConeMinimizer:
    """Minimizer for the symmetric cone of height h.

    The left half of the graph is the rotated and scaled arc R_phi Gamma_{lambda_u}
    on [0, s*/lambda_u^{1/p}], phi = -pi/2 + theta_u, reflected about x = 1/2.
    """

    p: float
    h: float
    s_star: float
    xi_star: float
    theta_u: float
    lambda_u: float
    energy: float
    x: np.ndarray
    u: np.ndarray

    @property
    def rotation(self) -> float:
        return self.theta_u - 0.5 * np.pi

    @property
    def scale(self) -> float:
        """Maps (I(xi), xi) on Gamma_1 to the graph before rotation."""
        return self.lambda_u ** (-1.0 / self.p) / argument_factor(self.p, 1.0)

    @property
    def arc_length(self) -> float:
        """Length of the left half of the graph."""
        return self.lambda_u ** (-1.0 / self.p) * self.s_star

    def graph_point(self, xi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        params = trig_params(self.p)
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        moment = np.array(
            [gentrig.incomplete_integral(params.q, params.r, conjugate(self.p), float(v)) for v in xi]
        )
        cos_phi, sin_phi = np.cos(self.rotation), np.sin(self.rotation)
        return (
            self.scale * (cos_phi * moment - sin_phi * xi),
            self.scale * (sin_phi * moment + cos_phi * xi),
        )

    def __call__(self, x: ArrayLike) -> np.ndarray:
        return np.interp(np.asarray(x, dtype=float), self.x, self.u)

    def on_grid(self, N: int) -> GridFunction:
        """Nodal values on x_i = i/N by monotone Newton inversion of x(xi).

        dx/dxi = scale (cos(phi) xi^{p'}/sqrt(1 - xi^{2p'}) - sin(phi)) > 0, so each
        node is bracketed by its left neighbour and xi*.
        """
        if N < 4:
            raise DomainError(f"N must be at least 4, got {N}")
        params = trig_params(self.p)
        p_conj = conjugate(self.p)
        cos_phi, sin_phi = np.cos(self.rotation), np.sin(self.rotation)
        scale = self.scale

        def moment(xi: float) -> float:
            return gentrig.incomplete_integral(params.q, params.r, p_conj, xi)

        values = np.zeros(N + 1)
        half = N // 2
        lo = 0.0
        for i in range(1, half + 1):
            target = i / N
            if 2 * i == N:
                values[i] = self.h
                break
            hi = self.xi_star
            xi = lo
            for _ in range(60):
                m = moment(xi)
                residual = scale * (cos_phi * m - sin_phi * xi) - target
                if residual > 0:
                    hi = xi
                else:
                    lo = xi
                slope = scale * (cos_phi * xi**p_conj / np.sqrt(1.0 - xi ** (2.0 * p_conj)) - sin_phi)
                candidate = xi - residual / slope
                if not lo <= candidate <= hi:
                    candidate = 0.5 * (lo + hi)
                if abs(candidate - xi) < 1e-15 or hi - lo < 1e-15:
                    xi = candidate
                    break
                xi = candidate
            values[i] = scale * (sin_phi * moment(xi) + cos_phi * xi)
            lo = xi
        values[N - half:] = values[half::-1]
        return GridFunction(values)


def _polar_equation(p: float, h: float) -> Callable[[float], float]:
    params = trig_params(p)
    p_conj = conjugate(p)

    def residual(xi: float) -> float:
        moment = gentrig.incomplete_integral(params.q, params.r, p_conj, xi)
        cos_abs = np.sqrt(max(1.0 - xi**params.r, 0.0))
        tan_minus = -float(_tan_polar_from_xi(p, np.array(xi), np.array(moment), np.array(cos_abs)))
        return tan_minus - 2.0 * h

    return residual


def exact_cone_minimizer(p: float, h: float, samples: int = DEFAULT_SAMPLES) -> ConeMinimizer:
    """Unique minimizer for the symmetric cone of height h < h_*(p).

    The match point s* solves tan(-varpi_1(s*)) = 2h; it is found in the sine
    variable xi, where the equation is monotone, and mapped back by asin_gen.
    """
    if not h > 0:
        raise DomainError(f"cone height must be positive, got {h}")
    threshold = h_star(p)
    if h >= threshold:
        raise ThresholdError(f"h = {h} is at or above h_*({p}) = {threshold:.10f}: no minimizer exists")

    params = trig_params(p)
    p_conj = conjugate(p)
    alpha1 = argument_factor(p, 1.0)
    residual = _polar_equation(p, h)
    xi_star = optimize.brentq(residual, 1e-12, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    s_star = float(gentrig.asin_gen(params, xi_star)) / alpha1

    moment = gentrig.incomplete_integral(params.q, params.r, p_conj, xi_star)
    X1, Y1 = moment / alpha1, xi_star / alpha1
    theta1 = float(np.arctan2(np.sqrt(max(1.0 - xi_star**params.r, 0.0)), xi_star**p_conj))
    theta_u = 0.5 * np.pi - theta1
    lambda_u = (np.hypot(X1, Y1) / np.sqrt(0.25 + h * h)) ** p
    energy = 2.0 * lambda_u * p_conj * lambda_u ** (-1.0 / p) * X1

    minimizer = ConeMinimizer(p, h, s_star, xi_star, theta_u, lambda_u, energy, np.empty(0), np.empty(0))
    xi = xi_star * (1.0 - np.cos(np.linspace(0.0, 0.5 * np.pi, samples + 1)))
    x_left, u_left = minimizer.graph_point(xi)
    x_left[0], u_left[0] = 0.0, 0.0
    x_left[-1], u_left[-1] = 0.5, h
    minimizer.x = np.concatenate((x_left, 1.0 - x_left[-2::-1]))
    minimizer.u = np.concatenate((u_left, u_left[-2::-1]))
    logger.info(
        f"Exact cone minimizer p={p} h={h}: s*={s_star:.10f}, theta_u={theta_u:.10f}, "
        f"lambda_u={lambda_u:.10f}, energy={energy:.10f}"
    )
    return minimizer


# ========== ARC-LENGTH REPARAMETRIZATION ==========

@dataclass
class ArcLengthSamples:
    """Graph curvature against cumulative arc length at the grid nodes."""

    s: np.ndarray
    kappa: np.ndarray

    @property
    def length(self) -> float:
        return float(self.s[-1])

    def resample(self, samples: int) -> "ArcLengthSamples":
        s = np.linspace(0.0, self.length, samples)
        return ArcLengthSamples(s, np.interp(s, self.s, self.kappa))


def reparam_graph_to_arclength(u: GridFunction, samples: Optional[int] = None) -> ArcLengthSamples:
    """s(x) = int_0^x sqrt(1 + u'^2) with the graph curvature carried along."""
    ds = u.h * np.sqrt(1.0 + u.slopes**2)
    result = ArcLengthSamples(np.concatenate(([0.0], np.cumsum(ds))), u.curvature())
    if samples is not None:
        return result.resample(samples)
    return result


def arc_length_quad(slope: Callable[[float], float]) -> float:
    """int_0^1 sqrt(1 + slope(x)^2) dx by adaptive quadrature."""
    value, _ = integrate.quad(lambda t: np.sqrt(1.0 + slope(t) ** 2), 0.0, 1.0, limit=200)
    return float(value)
