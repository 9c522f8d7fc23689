"""Symmetric decreasing rearrangement of f = G(u')' and the symmetric competitor.

Rearranging f keeps every norm of f, so the reconstructed v with G(v')' = f_*
has the same energy as u. If 1/G^{-1} is convex on the relevant slope range
(checked through 2G' + z G'' > 0) then v also sits above u_* and so above a
symmetric obstacle.
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy import optimize

from .energy import GridFunction, ShapeFunction, curvature_density, energy_discrete
from .exceptions import DomainError, SlopeBlowupError

logger = logging.getLogger(__name__)

CONVEXITY_SAMPLES = 4001


def _placement(n: int) -> np.ndarray:
    """Cell order from the centre outwards: c, c-1, c+1, c-2, ... (odd n)."""
    if n % 2:
        centre = n // 2
        order = [centre]
        for j in range(1, centre + 1):
            order.extend((centre - j, centre + j))
    else:
        left, right = n // 2 - 1, n // 2
        order = []
        for j in range(n // 2):
            order.extend((left - j, right + j))
    return np.array(order, dtype=int)


def sym_decreasing_rearrangement(f: np.ndarray) -> np.ndarray:
    """Permute f so |f| is symmetric about the centre and decreasing outwards.

    f must be one-signed; its sign is kept.
    """
    values = np.asarray(f, dtype=float)
    if values.ndim != 1 or not np.all(np.isfinite(values)):
        raise DomainError("rearrangement needs a finite 1-d sample array")
    if np.any(values > 0) and np.any(values < 0):
        logger.warning("Mixed-sign density passed to the rearrangement; only one-signed input is supported")
        raise DomainError("f changes sign; the rearrangement is only defined here for one-signed f")
    sign = -1.0 if np.any(values < 0) else 1.0
    order = np.argsort(-np.abs(values), kind="stable")
    result = np.empty_like(values)
    result[_placement(values.size)] = np.abs(values[order])
    return sign * result


def reconstruct_v(G: ShapeFunction, f_star: np.ndarray) -> GridFunction:
    """Solve G(v')' = f_star at interior nodes with v(0) = v(1) = 0.

    f_star holds the N - 1 interior values; the midpoint slopes are
    G^{-1}(c0 + F) with F the cumulative integral, and c0 makes them sum to 0.
    """
    f = np.asarray(f_star, dtype=float)
    N = f.size + 1
    h = 1.0 / N
    F = np.concatenate(([0.0], h * np.cumsum(f)))
    sup = G.sup if G.sup is not None else np.inf
    lo, hi = -sup - F.min(), sup - F.max()
    if not lo < hi:
        raise SlopeBlowupError(
            f"cumulative density spans {F.max() - F.min():.6f} >= 2 sup G = {2 * sup:.6f}; "
            "the slope of v would be infinite"
        )

    def mean_slope(c0: float) -> float:
        return float(np.sum(G.inv(c0 + F)))

    c0 = -0.5 * F[-1]
    slopes = G.inv(c0 + F)
    if abs(float(np.sum(slopes))) > 1e-12 * max(1.0, float(np.max(np.abs(slopes)))) * N:
        if np.isinf(lo) or np.isinf(hi):
            width = max(1.0, float(np.ptp(F)))
            lo, hi = c0 - width, c0 + width
            while mean_slope(lo) > 0:
                lo -= width
            while mean_slope(hi) < 0:
                hi += width
        else:
            shrink = 1e-15 * max(1.0, abs(lo), abs(hi))
            lo, hi = lo + shrink, hi - shrink
        c0 = optimize.brentq(mean_slope, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        slopes = G.inv(c0 + F)
    values = np.concatenate(([0.0], h * np.cumsum(slopes)))
    values[-1] = 0.0
    return GridFunction(values)


def convexity_condition(G: ShapeFunction, C0: float, samples: int = CONVEXITY_SAMPLES) -> bool:
    """2 G'(z) + z G''(z) > 0 on [0, C0], sampled."""
    if not C0 > 0:
        raise DomainError(f"C0 must be positive, got {C0}")
    z = np.linspace(0.0, C0, samples)
    first = 2.0 * G.derivative(z)
    values = first + z * G.second_derivative(z)
    return bool(np.min(values) > 64.0 * np.finfo(float).eps * np.max(np.abs(first)))


class SymmetryCriterion(NamedTuple):
    guaranteed: bool
    level: float
    C0: Optional[float]
    small_enough: bool
    convex: bool


def symmetry_guaranteed(G: ShapeFunction, p: float, energy: float) -> SymmetryCriterion:
    """Minimizers at this energy level are symmetric when E^{1/p} <= c_p/2 and the
    convexity condition holds on [0, G^{-1}(E^{1/p})]."""
    level = energy ** (1.0 / p)
    sup = G.sup if G.sup is not None else np.inf
    small = level < sup
    if not small or level == 0:
        return SymmetryCriterion(False, level, None, small, False)
    C0 = float(G.inv(level))
    convex = convexity_condition(G, C0)
    return SymmetryCriterion(small and convex, level, C0, small, convex)


@dataclass
class RearrangementResult:
    f_star: np.ndarray
    v: GridFunction
    energy_preserved: float
    symmetric: bool


def rearranged_competitor(G: ShapeFunction, p: float, u: GridFunction) -> RearrangementResult:
    """Build v from the rearranged density of u and compare energies."""
    f = curvature_density(G, u)
    f_star = sym_decreasing_rearrangement(f)
    v = reconstruct_v(G, f_star)
    residual = abs(energy_discrete(G, p, v) - energy_discrete(G, p, u))
    scale = max(float(np.max(np.abs(v.values))), 1e-300)
    symmetric = bool(np.max(np.abs(v.values - v.values[::-1])) <= 1e-10 * scale)
    logger.info(f"Rearranged competitor: energy residual {residual:.3e}, symmetric={symmetric}")
    return RearrangementResult(f_star, v, residual, symmetric)
