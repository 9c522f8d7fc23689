"""Obstacle-constrained minimization of E(u) = int |G(u')'|^p over u >= psi.

The constraint set is a nodal box u_i >= psi(x_i) with u_0 = u_N = 0, so the
default path hands the problem to L-BFGS-B with lower bounds and then polishes
with a projected Newton method on the exact pentadiagonal Hessian.
The literal projected-gradient scheme with Armijo backtracking is kept as
`method="projected-gradient"`.

Both paths start on a coarse grid, prolong with a natural cubic spline and
project back onto the obstacle; for p < 2 the penalty |z|^p is smoothed to
(z^2 + eps^2)^{p/2} - eps^p and eps is driven down a schedule.
"""
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import integrate, interpolate, optimize, sparse
from scipy.sparse.linalg import spsolve

from . import curves
from .energy import GridFunction, ShapeFunction, energy_discrete, gradient_discrete, hessian_discrete
from .exceptions import (
    AssumptionViolation,
    DomainError,
    InfeasibleIterateError,
    ThresholdError,
    UnsupportedObstacleError,
)

logger = logging.getLogger(__name__)

DEFAULT_EPSILON_SCHEDULE = (1e-2, 1e-4, 1e-6, 1e-8, 1e-10)
FEASIBILITY_SLACK = 1e-12
NEWTON_MAX_STEPS = 60
NEWTON_BACKTRACKS = 40
NEWTON_TARGET = 0.1
BOUND_GAP = 1e-12
ROUNDOFF = 1e-12


# ========== OBSTACLES ==========

@dataclass(eq=False)
class Obstacle:
    """Continuous obstacle psi on [0, 1], stored as a piecewise linear interpolant."""

    kind: str
    x: np.ndarray
    values: np.ndarray
    theta: Optional[float] = None

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.x.shape != self.values.shape or self.x.size < 2:
            raise DomainError("obstacle needs matching x and value arrays of length >= 2")
        if np.any(np.diff(self.x) <= 0) or abs(self.x[0]) > 1e-12 or abs(self.x[-1] - 1.0) > 1e-12:
            raise DomainError("obstacle abscissae must increase strictly from 0 to 1")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("obstacle values must be finite")

    @classmethod
    def cone(cls, theta: float, height: float, left: float = -0.25, right: float = -0.25) -> "Obstacle":
        """Piecewise affine psi through (0, left), (theta, height), (1, right)."""
        if not 0 < theta < 1:
            raise DomainError(f"cone tip must lie in (0, 1), got {theta}")
        return cls("cone", np.array([0.0, theta, 1.0]), np.array([left, height, right]), theta)

    @classmethod
    def symmetric_cone(cls, h: float, endpoint: float = -0.25) -> "Obstacle":
        obstacle = cls.cone(0.5, h, endpoint, endpoint)
        obstacle.kind = "symmetric_cone"
        return obstacle

    @classmethod
    def sampled(cls, x: Sequence[float], values: Sequence[float]) -> "Obstacle":
        return cls("sampled", np.asarray(x, dtype=float), np.asarray(values, dtype=float))

    @classmethod
    def from_csv(cls, path: str) -> "Obstacle":
        """Sampled obstacle from a CSV file with columns x, psi."""
        if not os.path.exists(path):
            raise DomainError(f"Obstacle file not found: {path}")
        frame = pd.read_csv(path)
        if "x" not in frame.columns or "psi" not in frame.columns:
            raise DomainError(f"Expected columns 'x,psi' in {path}, got {list(frame.columns)}")
        logger.info(f"Loaded sampled obstacle with {len(frame)} points from {path}")
        return cls.sampled(frame["x"].to_numpy(), frame["psi"].to_numpy())

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": self.x, "psi": self.values})

    def __call__(self, x: Any) -> np.ndarray:
        return np.interp(np.asarray(x, dtype=float), self.x, self.values)

    @property
    def height(self) -> float:
        """psi(1/2)."""
        return float(self(0.5))

    def nodal(self, N: int) -> np.ndarray:
        return self(np.linspace(0.0, 1.0, N + 1))

    def check_assumption(self) -> None:
        """psi(0) < 0, psi(1) < 0 and psi > 0 somewhere."""
        if self.values[0] >= 0 or self.values[-1] >= 0:
            raise AssumptionViolation(
                f"obstacle must be negative at both ends, got psi(0)={self.values[0]}, psi(1)={self.values[-1]}"
            )
        if np.max(self.values) <= 0:
            raise AssumptionViolation("obstacle must be positive somewhere in (0, 1)")

    def describe(self) -> Dict[str, Any]:
        info: Dict[str, Any] = {"kind": self.kind, "height": self.height}
        if self.theta is not None:
            info["theta"] = self.theta
            info["tip"] = float(self(self.theta))
        info["endpoints"] = [float(self.values[0]), float(self.values[-1])]
        return info


# ========== OPTIONS AND REPORTS ==========

def _env_int(name: str, default: int) -> int:
    return int(os.getenv(name, str(default)))


def _env_float(name: str, default: float) -> float:
    return float(os.getenv(name, str(default)))


@dataclass
class SolverOptions:
    """Solver controls; N, tol and max_iter default from the environment."""

    N: int = field(default_factory=lambda: _env_int("ELASTICA_GRID_N", 512))
    tol: float = field(default_factory=lambda: _env_float("ELASTICA_TOL", 5e-7))
    max_iter: int = field(default_factory=lambda: _env_int("ELASTICA_MAX_ITER", 20000))
    symmetric: bool = False
    method: str = "lbfgsb"
    epsilon_schedule: Tuple[float, ...] = DEFAULT_EPSILON_SCHEDULE
    coarse_N: int = 64
    armijo_c: float = 1e-4
    delta_coin: Optional[float] = None

    def __post_init__(self) -> None:
        if self.N < 64:
            raise DomainError(f"grid must have at least 64 cells, got N={self.N}")
        if self.symmetric and self.N % 2:
            raise DomainError(f"symmetric solves need an even N, got {self.N}")
        if self.method not in ("lbfgsb", "projected-gradient"):
            raise DomainError(f"unknown method '{self.method}'")
        if not self.tol > 0 or self.max_iter < 1:
            raise DomainError("tol must be positive and max_iter at least 1")
        self.epsilon_schedule = tuple(float(e) for e in self.epsilon_schedule)


class ThresholdVerdict(NamedTuple):
    verdict: str
    height: float
    h_star: float


class ExistenceCheck(NamedTuple):
    holds: bool
    symmetric_holds: bool
    trial_energy: Optional[float]
    bound: float
    symmetric_bound: float
    dominating_c: Optional[float]


@dataclass
class SolveReport:
    """Result of a constrained solve. Multipliers are densities: sum(mu) * h is the mass."""

    minimizer: GridFunction
    psi: np.ndarray
    energy: float
    kkt_residual: float
    iterations: int
    converged: bool
    coincidence_nodes: List[int]
    multipliers: np.ndarray
    method: str
    symmetric: bool
    epsilon_final: float
    delta_coin: float
    message: str = ""
    verdicts: Dict[str, Any] = field(default_factory=dict)
    energy_history: List[float] = field(default_factory=list)
    uniqueness: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "energy": self.energy,
            "kkt_residual": self.kkt_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "coincidence_nodes": self.coincidence_nodes,
            "coincidence_mass": float(np.sum(self.multipliers) * self.minimizer.h),
            "verdict": self.verdicts.get("verdict"),
            "h_star": self.verdicts.get("h_star"),
            "c_p": self.verdicts.get("c_p"),
            "N": self.minimizer.N,
            "method": self.method,
            "symmetric": self.symmetric,
            "epsilon_final": self.epsilon_final,
            "delta_coin": self.delta_coin,
            "message": self.message,
            "uniqueness": self.uniqueness,
            "verdicts": self.verdicts,
        }


# ========== KKT RESIDUAL AND COINCIDENCE ==========

def default_delta_coin(u: GridFunction) -> float:
    """10 h sqrt(eps) scaled by the largest slope."""
    slope_scale = 1.0 + float(np.max(np.abs(u.slopes)))
    return 10.0 * u.h * np.sqrt(np.finfo(float).eps) * slope_scale


def _check_feasible(u: GridFunction, psi_nodes: np.ndarray) -> None:
    gap = u.values[1:-1] - psi_nodes[1:-1]
    if np.any(gap < -FEASIBILITY_SLACK):
        worst = int(np.argmin(gap)) + 1
        raise InfeasibleIterateError(f"u lies below the obstacle at node {worst} by {-gap[worst - 1]:.3e}")


def coincidence_mask(u: GridFunction, psi: Obstacle, delta: Optional[float] = None) -> np.ndarray:
    """Interior nodes with u - psi < delta_coin."""
    delta = default_delta_coin(u) if delta is None else delta
    return (u.values[1:-1] - psi.nodal(u.N)[1:-1]) < delta


def vi_residual(
    G: ShapeFunction,
    p: float,
    u: GridFunction,
    psi: Obstacle,
    epsilon: float = 0.0,
    delta: Optional[float] = None,
) -> float:
    """l-inf projected gradient: |g| on free nodes, max(-g, 0) on coincidence nodes."""
    _check_feasible(u, psi.nodal(u.N))
    g = gradient_discrete(G, p, u, epsilon)
    active = coincidence_mask(u, psi, delta)
    free_part = float(np.max(np.abs(g[~active]), initial=0.0))
    contact_part = float(np.max(-np.minimum(g[active], 0.0), initial=0.0))
    return max(free_part, contact_part)


def estimate_coincidence_measure(
    G: ShapeFunction,
    p: float,
    u: GridFunction,
    psi: Obstacle,
    epsilon: float = 0.0,
    delta: Optional[float] = None,
) -> np.ndarray:
    """Nodal densities mu_i = max(g_i, 0)/h on the coincidence set, 0 elsewhere.

    Returned on all N + 1 nodes; the boundary entries are 0.
    """
    g = gradient_discrete(G, p, u, epsilon)
    active = coincidence_mask(u, psi, delta)
    mu = np.zeros(u.N + 1)
    mu[1:-1] = np.where(active, np.maximum(g, 0.0) / u.h, 0.0)
    return mu


# ========== THRESHOLDS AND EXISTENCE ==========

def threshold_verdict(p: float, psi: Obstacle) -> ThresholdVerdict:
    """exists_unique iff psi(1/2) < h_*(p); only defined for symmetric cones."""
    if psi.kind != "symmetric_cone":
        raise UnsupportedObstacleError(f"threshold verdicts cover symmetric cones only, got '{psi.kind}'")
    threshold = curves.h_star(p)
    verdict = "exists_unique" if psi.height < threshold else "no_minimizer"
    return ThresholdVerdict(verdict, psi.height, threshold)


def existence_bound_check(
    G: ShapeFunction,
    p: float,
    psi: Obstacle,
    trial_energy: Optional[float] = None,
    levels: int = 50,
) -> ExistenceCheck:
    """Compare a comparison energy with c_p^p/2^p (and c_p^p for M_sym).

    Also looks for the smallest c in (0, c_p/2) with psi <= u_c; when one exists
    and no trial energy is given, E(u_c) = c^p is used.
    """
    c_p = curves.c_p_of(G)
    x = np.linspace(0.0, 1.0, 257)
    psi_values = psi(x)
    dominating: Optional[float] = None
    for c in c_p * np.linspace(0.01, 0.4999, levels):
        if np.all(psi_values <= np.asarray(curves.comparison_uc(G, float(c), x)) + 1e-14):
            dominating = float(c)
            break
    if trial_energy is None and dominating is not None:
        trial_energy = dominating**p
    bound = c_p**p / 2.0**p
    symmetric_bound = c_p**p
    holds = trial_energy is not None and trial_energy < bound
    symmetric_holds = trial_energy is not None and trial_energy < symmetric_bound
    return ExistenceCheck(holds, symmetric_holds, trial_energy, bound, symmetric_bound, dominating)


# ========== NONEXISTENCE BOUND ==========

def _check_decay(G: ShapeFunction) -> None:
    near, far = 1e4, 1e8
    near_value = near**2 * float(G.derivative(np.array(near)))
    far_value = far**2 * float(G.derivative(np.array(far)))
    if far_value > near_value:
        raise AssumptionViolation(f"{G.name}: z^2 G'(z) does not decay, so H(A) is not bounded")


def _singular_moments(G: ShapeFunction, p: float, A: float, lower: float = 0.0) -> Tuple[float, float]:
    """(int G'(s)(A-s)^{-1/p}, int s G'(s)(A-s)^{-1/p}) over [lower, A], divided by A^{1-1/p}.

    With s = A z the weight (1 - z)^{-1/p} is integrated by the algebraic rule
    on the part away from z = 0, where G'(A z) may be sharply peaked.
    """
    z_lo = lower / A
    if z_lo >= 1.0:
        return 0.0, 0.0
    z_c = min(z_lo + 0.5 * (1.0 - z_lo), z_lo + 50.0 / A)
    exponent = -1.0 / p

    def dens(z: float) -> float:
        return float(G.derivative(np.array(A * z)))

    def moment(z: float) -> float:
        return A * z * dens(z)

    totals = []
    for f in (dens, moment):
        head, _ = integrate.quad(
            lambda z, f=f: f(z) * (1.0 - z) ** exponent, z_lo, z_c, epsabs=1e-14, epsrel=1e-12, limit=200
        )
        tail, _ = integrate.quad(
            f, z_c, 1.0, weight="alg", wvar=(0.0, exponent), epsabs=1e-14, epsrel=1e-12, limit=200
        )
        totals.append(head + tail)
    return totals[0], totals[1]


def nonexistence_H(G: ShapeFunction, p: float, A: float) -> float:
    """H(A): the weighted mean of s under G'(s)(A - s)^{-1/p} on [0, A]."""
    if not A > 0:
        raise DomainError(f"A must be positive, got {A}")
    _check_decay(G)
    den, num = _singular_moments(G, p, A)
    return num / den


def nonexistence_limit(G: ShapeFunction) -> float:
    """lim_{A -> inf} H(A) = 2 int_0^inf s G'(s) ds / c_p(G)."""
    return float(2.0 * G.first_moment(0.0, np.inf) / curves.c_p_of(G))


def default_A_grid() -> np.ndarray:
    return np.logspace(-3.0, 5.0, 81)


def hbound_table(G: ShapeFunction, p: float, A_grid: Optional[np.ndarray] = None) -> pd.DataFrame:
    """H(A) over a grid, with the analytic limit as a final row at A = inf."""
    A_grid = default_A_grid() if A_grid is None else np.asarray(A_grid, dtype=float)
    H = [nonexistence_H(G, p, float(A)) for A in A_grid]
    frame = pd.DataFrame({"A": A_grid, "H": H})
    frame = pd.concat([frame, pd.DataFrame({"A": [np.inf], "H": [nonexistence_limit(G)]})], ignore_index=True)
    frame["half_H"] = 0.5 * frame["H"]
    return frame


def nonexistence_bound(G: ShapeFunction, p: float, A_grid: Optional[np.ndarray] = None) -> float:
    """(1/2) sup_A H(A): no critical point in M(psi) is taller than this."""
    table = hbound_table(G, p, A_grid)
    bound = 0.5 * float(table["H"].max())
    logger.info(f"Nonexistence bound for {G.name}, p={p}: {bound:.10f}")
    return bound


class GeneralConeProfile(NamedTuple):
    slope_at_zero: float
    u: GridFunction


def general_cone_profile(G: ShapeFunction, p: float, h: float, N: int) -> GeneralConeProfile:
    """Symmetric critical point of height h whose slope function is constant on each half.

    With A = u'(0) solving H(A)/2 = h, u' = F^{-1} where
    F(y) = (1/2) int_y^A G'(s)(A - s)^{-1/p} ds / int_0^A G'(s)(A - s)^{-1/p} ds.
    """
    if not h > 0:
        raise DomainError(f"cone height must be positive, got {h}")
    if N < 4:
        raise DomainError(f"N must be at least 4, got {N}")
    target = 2.0 * h
    grid = default_A_grid()
    H_values = np.array([nonexistence_H(G, p, float(A)) for A in grid])
    above = np.nonzero(H_values >= target)[0]
    if above.size == 0:
        raise ThresholdError(
            f"h = {h} exceeds half the largest H(A) = {0.5 * H_values.max():.10f}: no critical point"
        )
    first = int(above[0])
    lo = grid[first - 1] if first > 0 else 1e-10
    A = optimize.brentq(lambda a: nonexistence_H(G, p, a) - target, lo, grid[first], xtol=1e-14, rtol=1e-13)
    den_total, _ = _singular_moments(G, p, A)

    def F(y: float) -> float:
        return 0.5 * _singular_moments(G, p, A, lower=y)[0] / den_total

    values = np.zeros(N + 1)
    half = N // 2
    for i in range(1, half + 1):
        if 2 * i == N:
            values[i] = h
            break
        slope = optimize.brentq(lambda y: F(y) - i / N, 0.0, A, xtol=1e-14, rtol=1e-13)
        values[i] = 0.5 * _singular_moments(G, p, A, lower=slope)[1] / den_total
    values[N - half:] = values[half::-1]
    logger.info(f"General cone profile for {G.name}, p={p}, h={h}: u'(0) = {A:.10f}")
    return GeneralConeProfile(A, GridFunction(values))


# ========== MINIMIZATION ==========

def _initial_guess(G: ShapeFunction, psi_nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """t U_0 with the smallest t that clears psi where psi > 0, then max with psi."""
    if G.sup is not None:
        shape = np.asarray(curves.profile_U0(G, x))
    else:
        shape = x * (1.0 - x)
    positive = (psi_nodes > 0) & (shape > 0)
    t = float(np.max(psi_nodes[positive] / shape[positive])) if np.any(positive) else 0.0
    guess = np.maximum(t * shape, psi_nodes)
    guess[0] = guess[-1] = 0.0
    return guess


def _prolong(coarse: np.ndarray, N: int) -> np.ndarray:
    spline = interpolate.CubicSpline(np.linspace(0.0, 1.0, coarse.size), coarse, bc_type="natural")
    fine = spline(np.linspace(0.0, 1.0, N + 1))
    fine[0] = fine[-1] = 0.0
    return fine


def _grid_levels(opts: SolverOptions) -> List[int]:
    levels = [opts.N]
    while levels[-1] // 2 >= opts.coarse_N and levels[-1] % 2 == 0:
        half = levels[-1] // 2
        if opts.symmetric and half % 2:
            break
        levels.append(half)
    return levels[::-1]


def _epsilon_stages(p: float, opts: SolverOptions) -> Tuple[float, ...]:
    if p >= 2 or not opts.epsilon_schedule:
        return (0.0,)
    return opts.epsilon_schedule


class _Problem:
    """Energy, gradient and bounds in the optimization variables of one grid level."""

    def __init__(self, G: ShapeFunction, p: float, psi_nodes: np.ndarray, symmetric: bool) -> None:
        self.G = G
        self.p = p
        self.N = psi_nodes.size - 1
        self.symmetric = symmetric
        if symmetric:
            lower_full = np.maximum(psi_nodes, psi_nodes[::-1])
            self.lower = lower_full[1 : self.N // 2 + 1]
        else:
            self.lower = psi_nodes[1:-1].copy()
        self.psi_nodes = psi_nodes

    def expand(self, y: np.ndarray) -> np.ndarray:
        if self.symmetric:
            return np.concatenate(([0.0], y, y[-2::-1], [0.0]))
        return np.concatenate(([0.0], y, [0.0]))

    def restrict(self, u: np.ndarray) -> np.ndarray:
        if self.symmetric:
            return u[1 : self.N // 2 + 1].copy()
        return u[1:-1].copy()

    def fold(self, g: np.ndarray) -> np.ndarray:
        """Chain rule from interior gradient g_1..g_{N-1} to the variables."""
        if not self.symmetric:
            return g
        half = self.N // 2
        folded = g[:half].copy()
        folded[: half - 1] += g[::-1][: half - 1]
        return folded

    def value_and_grad(self, y: np.ndarray, epsilon: float) -> Tuple[float, np.ndarray]:
        u = GridFunction(self.expand(y))
        energy = energy_discrete(self.G, self.p, u, epsilon)
        return energy, self.fold(gradient_discrete(self.G, self.p, u, epsilon))

    def hessian(self, y: np.ndarray, epsilon: float, convexify: bool = False) -> sparse.csr_matrix:
        H = hessian_discrete(self.G, self.p, GridFunction(self.expand(y)), epsilon, convexify)
        if not self.symmetric:
            return H
        half = self.N // 2
        rows = np.concatenate((np.arange(half), np.arange(half, self.N - 1)))
        cols = np.concatenate((np.arange(half), half - 2 - np.arange(self.N - 1 - half)))
        E = sparse.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(self.N - 1, half))
        return (E.T @ H @ E).tocsr()

    def project(self, y: np.ndarray) -> np.ndarray:
        return np.maximum(y, self.lower)


def _run_lbfgsb(
    problem: _Problem, y0: np.ndarray, epsilon: float, opts: SolverOptions, check: Callable[[np.ndarray], float]
) -> Tuple[np.ndarray, int, str]:
    bounds = [(float(lo), None) for lo in problem.lower]
    result = optimize.minimize(
        problem.value_and_grad,
        problem.project(y0),
        args=(epsilon,),
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={
            "gtol": opts.tol,
            "ftol": 1e-16,
            "maxcor": 30,
            "maxls": 50,
            "maxiter": opts.max_iter,
            "maxfun": opts.max_iter,
        },
    )
    y = problem.project(result.x)
    logger.info(
        f"  L-BFGS-B N={problem.N} eps={epsilon:.0e}: {result.nit} iterations, "
        f"E={result.fun:.12f}, KKT={check(y):.3e} ({result.message})"
    )
    return y, int(result.nit), str(result.message)


def _newton_direction(
    problem: _Problem, y: np.ndarray, grad: np.ndarray, free: np.ndarray, epsilon: float
) -> np.ndarray:
    """Newton step on the free variables; a scaled gradient step on the bound ones."""
    direction = np.zeros_like(y)
    for convexify in (False, True):
        H = problem.hessian(y, epsilon, convexify)
        diagonal = np.abs(H.diagonal())
        scale = np.maximum(diagonal, 1e-300)
        direction[~free] = -grad[~free] / scale[~free]
        if not np.any(free):
            return direction
        idx = np.nonzero(free)[0]
        H_ff = H[idx][:, idx]
        if convexify:
            H_ff = H_ff + sparse.identity(idx.size) * (1e-10 * float(diagonal[idx].max()))
        step = spsolve(H_ff.tocsc(), -grad[idx])
        if np.all(np.isfinite(step)) and float(np.dot(step, grad[idx])) < 0:
            direction[idx] = step
            return direction
    direction[idx] = -grad[idx] / scale[idx]
    return direction


def _run_newton(
    problem: _Problem,
    y0: np.ndarray,
    epsilon: float,
    opts: SolverOptions,
    check: Callable[[np.ndarray], float],
    max_steps: int = NEWTON_MAX_STEPS,
) -> Tuple[np.ndarray, int, str]:
    """Projected Newton with Armijo backtracking along the projected path.

    Variables at their bound with a positive gradient are held there; the rest
    take a Newton step with the exact banded Hessian.
    """
    y = problem.project(y0)
    energy, grad = problem.value_and_grad(y, epsilon)
    residual = check(y)
    target = NEWTON_TARGET * opts.tol
    for step_count in range(1, max_steps + 1):
        if residual < target:
            return y, step_count - 1, "projected Newton below tolerance"
        gap = y - problem.lower
        free = ~((gap <= BOUND_GAP) & (grad > 0))
        direction = _newton_direction(problem, y, grad, free, epsilon)

        alpha = 1.0
        accepted = None
        full_step = None
        for _ in range(NEWTON_BACKTRACKS):
            trial = problem.project(y + alpha * direction)
            trial_energy, trial_grad = problem.value_and_grad(trial, epsilon)
            if full_step is None:
                full_step = (trial, trial_energy, trial_grad)
            if trial_energy <= energy + opts.armijo_c * float(np.dot(grad, trial - y)):
                accepted = (trial, trial_energy, trial_grad)
                break
            alpha *= 0.5
        if accepted is None:
            # near the optimum energy differences drown in roundoff; fall back on the residual
            if (
                full_step is not None
                and full_step[1] <= energy + ROUNDOFF * abs(energy)
                and check(full_step[0]) < residual
            ):
                accepted = full_step
            else:
                return y, step_count, "projected Newton line search stalled"
        y, energy, grad = accepted
        residual = check(y)
        logger.debug(
            f"  Newton N={problem.N} step {step_count}: alpha={alpha:.1e}, E={energy:.14f}, KKT={residual:.3e}"
        )
    return y, max_steps, "projected Newton step cap reached"


def _run_projected_gradient(
    problem: _Problem,
    y0: np.ndarray,
    epsilon: float,
    opts: SolverOptions,
    check: Callable[[np.ndarray], float],
    history: List[float],
) -> Tuple[np.ndarray, int, str]:
    """Armijo backtracking along the projected arc, step halved on rejection."""
    h = 1.0 / problem.N
    y = problem.project(y0)
    energy, grad = problem.value_and_grad(y, epsilon)
    step = h**3
    for iteration in range(1, opts.max_iter + 1):
        if check(y) < opts.tol:
            return y, iteration - 1, "projected gradient below tolerance"
        trial_step = 2.0 * step
        while True:
            trial = problem.project(y - trial_step * grad)
            trial_energy, trial_grad = problem.value_and_grad(trial, epsilon)
            if trial_energy <= energy - opts.armijo_c * float(np.dot(grad, y - trial)):
                break
            trial_step *= 0.5
            if trial_step < 1e-30:
                return y, iteration, "line search stalled"
        y, energy, grad, step = trial, trial_energy, trial_grad, trial_step
        history.append(energy_discrete(problem.G, problem.p, GridFunction(problem.expand(y))))
        if iteration % 1000 == 0:
            logger.info(f"  PG N={problem.N} eps={epsilon:.0e} iteration {iteration}: E={energy:.12f}")
    return y, opts.max_iter, "iteration cap reached"


def minimize(
    G: ShapeFunction, p: float, psi: Obstacle, opts: Optional[SolverOptions] = None
) -> SolveReport:
    """Minimize the discrete energy over M(psi), or over M_sym(psi) when opts.symmetric."""
    opts = opts or SolverOptions()
    psi.check_assumption()
    if p <= 1:
        raise DomainError(f"p must exceed 1, got {p}")

    logger.info("=" * 80)
    logger.info(f"SOLVE {G.name}, p={p}, obstacle={psi.kind}, N={opts.N}, method={opts.method}")
    logger.info("=" * 80)

    stages = _epsilon_stages(p, opts)
    levels = _grid_levels(opts)
    iterations = 0
    history: List[float] = []
    message = ""
    u_values: Optional[np.ndarray] = None

    for level_index, N in enumerate(levels):
        psi_nodes = psi.nodal(N)
        x = np.linspace(0.0, 1.0, N + 1)
        if u_values is None:
            start = _initial_guess(G, psi_nodes, x)
        else:
            start = _prolong(u_values, N)
        if opts.symmetric:
            start = 0.5 * (start + start[::-1])
        problem = _Problem(G, p, psi_nodes, opts.symmetric)
        level_stages = stages if level_index == 0 else stages[-1:]
        y = problem.project(problem.restrict(start))
        for epsilon in level_stages:
            level_psi = Obstacle.sampled(x, psi_nodes)

            def check(v: np.ndarray, eps: float = epsilon, problem: _Problem = problem) -> float:
                return vi_residual(G, p, GridFunction(problem.expand(v)), level_psi, eps, opts.delta_coin)

            if opts.method == "lbfgsb":
                y, used, message = _run_lbfgsb(problem, y, epsilon, opts, check)
                iterations += used
                y, used, message = _run_newton(problem, y, epsilon, opts, check)
            else:
                y, used, message = _run_projected_gradient(problem, y, epsilon, opts, check, history)
            iterations += used
        u_values = problem.expand(y)
        logger.info(f"Grid level N={N} done after {iterations} total iterations")

    u = GridFunction(u_values)
    epsilon_final = stages[-1]
    delta = opts.delta_coin if opts.delta_coin is not None else default_delta_coin(u)
    residual = vi_residual(G, p, u, psi, epsilon_final, delta)
    mask = coincidence_mask(u, psi, delta)
    multipliers = estimate_coincidence_measure(G, p, u, psi, epsilon_final, delta)
    energy = energy_discrete(G, p, u)
    converged = residual < opts.tol

    verdicts: Dict[str, Any] = {"c_p": curves.c_p_of(G) if G.sup is not None else None}
    uniqueness = "not asserted: uniqueness is only known for symmetric cones"
    if psi.kind == "symmetric_cone" and G.is_eu_p:
        verdict = threshold_verdict(p, psi)
        verdicts.update(verdict._asdict())
        if verdict.verdict == "exists_unique":
            uniqueness = "unique: cone height below h_*"
        else:
            uniqueness = "no minimizer exists; the computed state only approaches the infimum"
    else:
        verdicts["h_star"] = curves.h_star(p) if G.is_eu_p else None

    report = SolveReport(
        minimizer=u,
        psi=psi.nodal(u.N),
        energy=energy,
        kkt_residual=residual,
        iterations=iterations,
        converged=converged,
        coincidence_nodes=[int(i) + 1 for i in np.nonzero(mask)[0]],
        multipliers=multipliers,
        method=opts.method,
        symmetric=opts.symmetric,
        epsilon_final=epsilon_final,
        delta_coin=delta,
        message=message,
        verdicts=verdicts,
        energy_history=history,
        uniqueness=uniqueness,
    )

    logger.info("=" * 80)
    logger.info(
        f"SOLVE COMPLETE - E={energy:.12f}, KKT={residual:.3e}, iterations={iterations}, "
        f"coincidence={report.coincidence_nodes}"
    )
    logger.info("=" * 80)
    if not converged:
        logger.warning(f"Solve stopped above tolerance: KKT {residual:.3e} >= {opts.tol:.1e} ({message})")
    return report
