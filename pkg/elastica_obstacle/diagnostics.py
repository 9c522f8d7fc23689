"""Post-solve checks of the qualitative theory on a computed minimizer.

Every strict inequality becomes a threshold test against a grid-scaled
tolerance, and every check returns its raw numbers next to the verdict.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from .energy import GridFunction, ShapeFunction, euler_substitution, slope_function
from .exceptions import DomainError
from .solver import Obstacle

logger = logging.getLogger(__name__)

BOUNDARY_SKIP = 2
EXPONENT_WINDOW = 0.01


def grid_tolerance(u: GridFunction) -> float:
    """Roundoff level of second quotients: 64 eps N^2 max|u|."""
    scale = max(float(np.max(np.abs(u.values))), 1e-300)
    return 64.0 * np.finfo(float).eps * u.N**2 * scale


class ConcavityCheck(NamedTuple):
    concave: bool
    max_violation: float
    tolerance: float


class NondegeneracyCheck(NamedTuple):
    nondegenerate: bool
    min_curvature: float
    flat_runs: List[Tuple[int, int]]
    tolerance: float


class BoundaryResiduals(NamedTuple):
    u2_left: float
    u2_right: float
    w_left: float
    w_right: float

    @property
    def worst(self) -> float:
        return float(max(abs(v) for v in self))


class SlopeFunctionCheck(NamedTuple):
    x_mid: np.ndarray
    m: np.ndarray
    monotone: bool
    two_plateau: bool
    jump_node: int
    plateaus: Tuple[float, float]
    tolerance: float


class ExponentFit(NamedTuple):
    exponent: float
    expected: float
    r_squared: float
    points: int
    w_lower: float
    w_upper: float


def check_concavity(u: GridFunction, tol: Optional[float] = None) -> ConcavityCheck:
    tol = grid_tolerance(u) if tol is None else tol
    violation = float(np.max(u.second_quotients))
    return ConcavityCheck(violation <= tol, violation, tol)


def _runs(mask: np.ndarray, offset: int) -> List[Tuple[int, int]]:
    runs: List[Tuple[int, int]] = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if i - start >= 2:
                runs.append((start + offset, i - 1 + offset))
            start = None
    if start is not None and mask.size - start >= 2:
        runs.append((start + offset, mask.size - 1 + offset))
    return runs


def check_nondegeneracy(u: GridFunction, tol: Optional[float] = None, skip: int = BOUNDARY_SKIP) -> NondegeneracyCheck:
    """-u'' > tol at interior nodes away from the ends, and no flat cores."""
    tol = grid_tolerance(u) if tol is None else tol
    curvature = -u.second_quotients
    inner = curvature[skip : curvature.size - skip] if skip else curvature
    flat = np.abs(curvature) <= tol
    runs = _runs(flat, offset=1)
    minimum = float(np.min(inner)) if inner.size else 0.0
    return NondegeneracyCheck(minimum > tol and not _runs_inside(runs, u.N, skip), minimum, runs, tol)


def _runs_inside(runs: List[Tuple[int, int]], N: int, skip: int) -> bool:
    """True if any flat run reaches past the skipped boundary nodes."""
    return any(end > skip and start < N - skip for start, end in runs)


def check_natural_bc(G: ShapeFunction, p: float, u: GridFunction) -> BoundaryResiduals:
    """u'' and w extrapolated to both ends by one-sided second-order formulas."""
    u2 = u.nodal_second_derivative()
    w = euler_substitution(G, p, u)
    if w.size < 3:
        raise DomainError("need at least 4 cells for boundary extrapolation")
    w_left = 3.0 * w[0] - 3.0 * w[1] + w[2]
    w_right = 3.0 * w[-1] - 3.0 * w[-2] + w[-3]
    return BoundaryResiduals(float(u2[0]), float(u2[-1]), float(w_left), float(w_right))


def slope_function_m(
    G: ShapeFunction,
    p: float,
    u: GridFunction,
    plateau_tol: Optional[float] = None,
    skip: int = BOUNDARY_SKIP,
) -> SlopeFunctionCheck:
    """m = G'(u') w' at midpoints, with monotonicity and two-plateau verdicts.

    The jump is placed at the largest drop of m; cells within `skip` of either
    end or of the jump are left out of the plateau test.
    """
    m = slope_function(G, p, u)
    scale = float(np.max(np.abs(m))) if m.size else 0.0
    tol = 1e-2 * scale if plateau_tol is None else plateau_tol
    drops = np.diff(m)
    monotone = bool(np.all(drops <= tol))
    k = int(np.argmin(drops)) if drops.size else 0
    jump_node = k + 1
    left = m[skip : max(k + 1 - skip, skip)]
    right = m[min(k + 1 + skip, m.size - skip) : m.size - skip]
    c1 = float(np.median(left)) if left.size else float("nan")
    c2 = float(np.median(right)) if right.size else float("nan")
    two_plateau = bool(
        left.size
        and right.size
        and np.max(np.abs(left - c1)) <= tol
        and np.max(np.abs(right - c2)) <= tol
        and c1 - c2 > tol
    )
    return SlopeFunctionCheck(u.x_mid, m, monotone, two_plateau, jump_node, (c1, c2), tol)


def boundary_exponent_fit(
    p: float, u: GridFunction, G: Optional[ShapeFunction] = None, window: float = EXPONENT_WINDOW
) -> ExponentFit:
    """Slope of log|u'''| against log x on [max(2h, window/10), window] next to x = 0.

    Past about x = 0.01 the regular part of u''' dominates the x^{(2-p)/(p-1)}
    singularity. The first two third differences are dropped. When G is given,
    the pinch c x <= w(x) <= C x is reported over the same window.
    """
    t = u.third_differences
    centers = (np.arange(t.size) + 1.5) * u.h
    select = (centers >= max(2.0 * u.h, 0.1 * window)) & (centers <= window)
    select[:2] = False
    select &= np.abs(t) > 0
    if np.count_nonzero(select) < 3:
        raise DomainError("too few third differences in the fitting window; refine the grid")
    log_x = np.log(centers[select])
    log_t = np.log(np.abs(t[select]))
    slope, intercept = np.polyfit(log_x, log_t, 1)
    fitted = slope * log_x + intercept
    ss_res = float(np.sum((log_t - fitted) ** 2))
    ss_tot = float(np.sum((log_t - log_t.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0

    w_lower = w_upper = float("nan")
    if G is not None:
        w = euler_substitution(G, p, u)
        x = u.x[1:-1]
        near = x <= window
        ratio = w[near] / x[near]
        w_lower, w_upper = float(np.min(ratio)), float(np.max(ratio))
    expected = (2.0 - p) / (p - 1.0)
    return ExponentFit(float(slope), expected, float(r_squared), int(np.count_nonzero(select)), w_lower, w_upper)


def third_derivative_jump(u: GridFunction, tip_index: int, exclude: int = 4) -> float:
    """Jump of u''' across the tip over the largest off-tip step of u'''.

    t[i] is centred at x_{i + 3/2}; t[tip] and t[tip - 3] are the one-sided
    stencils just right and left of the tip.
    """
    t = u.third_differences
    if not 3 <= tip_index <= t.size - 1:
        raise DomainError(f"tip index {tip_index} too close to the boundary")
    jump = abs(float(t[tip_index] - t[tip_index - 3]))
    reach = max(u.N // 8, exclude + 2)
    lo, hi = max(tip_index - reach, 0), min(tip_index + reach, t.size - 1)
    steps = np.abs(np.diff(t[lo : hi + 1]))
    step_centers = np.arange(lo, hi) + 2.0
    off_tip = steps[np.abs(step_centers - tip_index) > exclude]
    variation = float(np.max(off_tip)) if off_tip.size else 0.0
    return jump / variation if variation > 0 else float("inf")


def check_noncoincidence_convex(
    u: GridFunction, psi: Obstacle, coincidence: List[int], tol: Optional[float] = None
) -> List[int]:
    """Coincidence nodes where psi has positive second quotients."""
    tol = grid_tolerance(u) if tol is None else tol
    psi_nodes = psi.nodal(u.N)
    psi2 = np.diff(psi_nodes, 2) / u.h**2
    return [int(i) for i in coincidence if 1 <= i <= u.N - 1 and psi2[i - 1] > tol]


@dataclass
class DiagnosticsReport:
    """Verdicts plus raw residuals of every qualitative check."""

    concave: bool
    max_concavity_violation: float
    nondegenerate: bool
    min_interior_curvature: float
    flat_runs: List[Tuple[int, int]]
    bc_residuals: Dict[str, float]
    m_monotone: bool
    m_two_plateau: bool
    m_jump_node: int
    m_plateaus: Tuple[float, float]
    plateau_tolerance: float
    coincidence_set: List[int] = field(default_factory=list)
    convex_coincidence_nodes: List[int] = field(default_factory=list)
    boundary_exponent_fit: Optional[Dict[str, float]] = None
    third_derivative_jump: Optional[float] = None
    tolerance: float = 0.0
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["flat_runs"] = [list(run) for run in self.flat_runs]
        data["m_plateaus"] = list(self.m_plateaus)
        return data


def run_diagnostics(
    G: ShapeFunction,
    p: float,
    u: GridFunction,
    psi: Optional[Obstacle] = None,
    coincidence: Optional[List[int]] = None,
    fit_exponent: bool = False,
) -> DiagnosticsReport:
    """Run every check that applies to u and collect the results."""
    concavity = check_concavity(u)
    nondegeneracy = check_nondegeneracy(u)
    residuals = check_natural_bc(G, p, u)
    m_check = slope_function_m(G, p, u)
    coincidence = list(coincidence or [])
    notes = [f"plateau tolerance 1e-2 max|m| = {m_check.tolerance:.3e} is a tooling choice"]

    convex_nodes: List[int] = []
    jump: Optional[float] = None
    if psi is not None:
        convex_nodes = check_noncoincidence_convex(u, psi, coincidence)
        if psi.kind in ("cone", "symmetric_cone") and psi.theta is not None:
            tip = int(round(psi.theta * u.N))
            if coincidence and any(abs(i - tip) > 2 for i in coincidence):
                notes.append(f"coincidence set {coincidence} is not the tip node {tip}")
            try:
                jump = third_derivative_jump(u, tip)
            except DomainError as e:
                notes.append(str(e))
    if not coincidence and psi is not None:
        notes.append("empty coincidence set")

    fit: Optional[Dict[str, float]] = None
    if fit_exponent:
        try:
            fit = boundary_exponent_fit(p, u, G)._asdict()
        except DomainError as e:
            notes.append(str(e))

    report = DiagnosticsReport(
        concave=concavity.concave,
        max_concavity_violation=concavity.max_violation,
        nondegenerate=nondegeneracy.nondegenerate,
        min_interior_curvature=nondegeneracy.min_curvature,
        flat_runs=nondegeneracy.flat_runs,
        bc_residuals=residuals._asdict(),
        m_monotone=m_check.monotone,
        m_two_plateau=m_check.two_plateau,
        m_jump_node=m_check.jump_node,
        m_plateaus=m_check.plateaus,
        plateau_tolerance=m_check.tolerance,
        coincidence_set=coincidence,
        convex_coincidence_nodes=convex_nodes,
        boundary_exponent_fit=fit,
        third_derivative_jump=jump,
        tolerance=concavity.tolerance,
        notes=notes,
    )
    logger.info(
        f"Diagnostics: concave={report.concave}, nondegenerate={report.nondegenerate}, "
        f"bc worst={residuals.worst:.3e}, m two-plateau={report.m_two_plateau}"
    )
    return report
