"""Shape functions, grid functions and the discrete energy E(u) = int |G(u')'|^p.

The discretization keeps the algebraic form of the functional: slopes live at
cell midpoints, G is applied there, and its difference quotient at interior
nodes is the density f = G(u')'. Everything downstream (gradient, Euler's
substitution, the slope function m) is built from f.
"""
import logging
import os
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import pandas as pd
from scipy import integrate, optimize, sparse, special

from .exceptions import AssumptionViolation, DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]
Evaluator = Callable[[np.ndarray], np.ndarray]


# ========== EU_p ==========

def _eu_exponent(p: float) -> float:
    return 1.5 - 0.5 / p


def _eu_b(p: float) -> float:
    return 1.0 - 0.5 / p


def _check_p(p: float) -> None:
    if not p > 1:
        raise DomainError(f"p must exceed 1, got {p}")


def eu_p_constant(p: float) -> float:
    """c_p(EU_p) = B(1/2, 1 - 1/(2p))."""
    _check_p(p)
    return float(special.beta(0.5, _eu_b(p)))


def eu_p(p: float, z: ArrayLike) -> ArrayLike:
    """EU_p(z) = int_0^z (1 + s^2)^(-(3/2 - 1/(2p))) ds.

    With s = tan(phi) and v = sin^2(phi) the integral is an incomplete beta
    function, EU_p(z) = sign(z) (c_p/2) I_v(1/2, 1 - 1/(2p)), v = z^2/(1 + z^2).
    """
    _check_p(p)
    values = np.asarray(z, dtype=float)
    mag = np.abs(values)
    with np.errstate(over="ignore", invalid="ignore"):
        v = np.where(mag > 1e150, 1.0, mag * mag / (1.0 + mag * mag))
    result = np.sign(values) * 0.5 * eu_p_constant(p) * special.betainc(0.5, _eu_b(p), v)
    return float(result) if result.ndim == 0 else result


def eu_p_derivative(p: float, z: ArrayLike) -> ArrayLike:
    values = np.asarray(z, dtype=float)
    result = (1.0 + values * values) ** (-_eu_exponent(p))
    return float(result) if result.ndim == 0 else result


def eu_p_second_derivative(p: float, z: ArrayLike) -> ArrayLike:
    beta_exp = _eu_exponent(p)
    values = np.asarray(z, dtype=float)
    result = -2.0 * beta_exp * values * (1.0 + values * values) ** (-beta_exp - 1.0)
    return float(result) if result.ndim == 0 else result


def eu_p_inverse(p: float, y: ArrayLike) -> ArrayLike:
    """Inverse of EU_p on (-c_p/2, c_p/2), polished by monotone Newton steps."""
    _check_p(p)
    values = np.asarray(y, dtype=float)
    half = 0.5 * eu_p_constant(p)
    if np.any(np.abs(values) >= half) or np.any(np.isnan(values)):
        raise DomainError(f"EU_p inverse is defined on (-{half:.10f}, {half:.10f})")
    target = np.abs(values)
    v = special.betaincinv(0.5, _eu_b(p), target / half)
    z = np.sqrt(v / (1.0 - v))
    for _ in range(3):
        residual = eu_p(p, z) - target
        z = np.maximum(z - residual / eu_p_derivative(p, z), 0.0)
    result = np.sign(values) * z
    return float(result) if result.ndim == 0 else result


# ========== SHAPE FUNCTIONS ==========

@dataclass(frozen=True)
class ShapeFunction:
    """An odd, strictly increasing profile G with derivatives and inverse.

    sup is lim_{z->inf} G(z) (None when G is unbounded); moment is an
    antiderivative of s * G'(s), when one is known in closed form.
    """

    name: str
    value: Evaluator
    derivative: Evaluator
    second_derivative: Evaluator
    inverse: Evaluator
    sup: Optional[float] = None
    p: Optional[float] = None
    moment: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def __call__(self, z: ArrayLike) -> np.ndarray:
        return self.value(np.asarray(z, dtype=float))

    @property
    def is_eu_p(self) -> bool:
        return self.p is not None

    @property
    def c_p(self) -> float:
        """c_p(G) = 2 lim G, or inf for an unbounded profile."""
        return float("inf") if self.sup is None else 2.0 * self.sup

    def inv(self, y: ArrayLike) -> np.ndarray:
        return self.inverse(np.asarray(y, dtype=float))

    def first_moment(self, a: ArrayLike, b: ArrayLike) -> np.ndarray:
        """int_a^b s G'(s) ds elementwise; b may be +inf."""
        a_arr, b_arr = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        if self.moment is not None:
            return np.asarray(self.moment(b_arr) - self.moment(a_arr), dtype=float)
        out = np.empty(a_arr.shape)
        for idx in np.ndindex(a_arr.shape):
            out[idx] = integrate.quad(
                lambda s: s * float(self.derivative(np.array(s))), a_arr[idx], b_arr[idx],
                epsabs=1e-13, epsrel=1e-12, limit=200,
            )[0]
        return out

    # ---------- factories ----------

    @classmethod
    def eu_p(cls, p: float) -> "ShapeFunction":
        """The p-elastic profile EU_p."""
        _check_p(p)
        p_conj = p / (p - 1.0)
        exponent = 0.5 - 0.5 / p
        return cls(
            name=f"EU_{p:g}",
            value=lambda z: eu_p(p, z),
            derivative=lambda z: eu_p_derivative(p, z),
            second_derivative=lambda z: eu_p_second_derivative(p, z),
            inverse=lambda y: eu_p_inverse(p, y),
            sup=0.5 * eu_p_constant(p),
            p=p,
            moment=lambda s: -p_conj * (1.0 + np.asarray(s, dtype=float) ** 2) ** (-exponent),
        )

    @classmethod
    def tanh(cls) -> "ShapeFunction":
        """G = tanh, bounded with sup 1."""

        def sech2(z: np.ndarray) -> np.ndarray:
            e = np.exp(-2.0 * np.abs(z))
            return 4.0 * e / (1.0 + e) ** 2

        def inverse(y: np.ndarray) -> np.ndarray:
            if np.any(np.abs(y) >= 1.0):
                raise DomainError("tanh inverse is defined on (-1, 1)")
            return np.arctanh(y)

        def moment(s: np.ndarray) -> np.ndarray:
            s = np.asarray(s, dtype=float)
            with np.errstate(invalid="ignore"):
                finite = s * np.tanh(s) - (np.abs(s) + np.log1p(np.exp(-2.0 * np.abs(s))) - np.log(2.0))
            return np.where(np.isinf(s), np.log(2.0), finite)

        return cls(
            name="tanh",
            value=np.tanh,
            derivative=sech2,
            second_derivative=lambda z: -2.0 * np.tanh(z) * sech2(z),
            inverse=inverse,
            sup=1.0,
            moment=moment,
        )

    @classmethod
    def identity(cls) -> "ShapeFunction":
        """G(z) = z. Unbounded; only meaningful for derivative conditions."""
        return cls(
            name="identity",
            value=lambda z: np.asarray(z, dtype=float),
            derivative=lambda z: np.ones_like(np.asarray(z, dtype=float)),
            second_derivative=lambda z: np.zeros_like(np.asarray(z, dtype=float)),
            inverse=lambda y: np.asarray(y, dtype=float),
        )

    @classmethod
    def from_derivative(
        cls, derivative: Evaluator, second_derivative: Evaluator, name: str = "custom"
    ) -> "ShapeFunction":
        """Build G(z) = int_0^z G' numerically from a user supplied G'."""

        def scalar_value(z: float) -> float:
            mag = abs(z)
            integral = integrate.quad(
                lambda s: float(derivative(np.array(s))), 0.0, mag, epsabs=1e-13, epsrel=1e-12, limit=200
            )[0]
            return float(np.sign(z)) * integral

        def value(z: np.ndarray) -> np.ndarray:
            z = np.asarray(z, dtype=float)
            return np.vectorize(scalar_value, otypes=[float])(z)

        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                sup, _ = integrate.quad(lambda s: float(derivative(np.array(s))), 0.0, np.inf, limit=200)
                sup = float(sup) if np.isfinite(sup) else None
            except integrate.IntegrationWarning:
                sup = None

        def scalar_inverse(y: float) -> float:
            if sup is not None and abs(y) >= sup:
                raise DomainError(f"{name} inverse is defined on (-{sup}, {sup})")
            if y == 0:
                return 0.0
            hi = 1.0
            while scalar_value(hi) < abs(y):
                hi *= 2.0
            root = optimize.brentq(lambda z: scalar_value(z) - abs(y), 0.0, hi, xtol=1e-14)
            return float(np.sign(y)) * root

        return cls(
            name=name,
            value=value,
            derivative=derivative,
            second_derivative=second_derivative,
            inverse=lambda y: np.vectorize(scalar_inverse, otypes=[float])(np.asarray(y, dtype=float)),
            sup=sup,
        )


def shape_function_by_name(name: str, p: float) -> ShapeFunction:
    """Resolve a configuration name ('eu_p' or 'tanh') to a ShapeFunction."""
    key = name.strip().lower()
    if key in ("eu_p", "eup", "eu"):
        return ShapeFunction.eu_p(p)
    if key == "tanh":
        return ShapeFunction.tanh()
    raise DomainError(f"Unknown shape function '{name}' (expected eu_p or tanh)")


def check_shape_assumption(G: ShapeFunction, samples: int = 257) -> None:
    """Spot-check oddness and positivity of G' on a symmetric grid."""
    z = np.linspace(-20.0, 20.0, samples)
    if np.max(np.abs(G(z) + G(-z))) > 1e-10:
        raise AssumptionViolation(f"{G.name} is not odd")
    if np.any(G.derivative(z) <= 0):
        raise AssumptionViolation(f"{G.name} has a non-positive derivative")


# ========== GRID FUNCTIONS ==========

@dataclass
class GridFunction:
    """Nodal samples u_0..u_N on x_i = i/N with u_0 = u_N = 0."""

    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.array(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 4:
            raise DomainError("GridFunction needs at least 4 nodal values")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("GridFunction values must be finite")
        scale = max(1.0, float(np.max(np.abs(self.values))))
        if abs(self.values[0]) > 1e-9 * scale or abs(self.values[-1]) > 1e-9 * scale:
            raise DomainError(
                f"GridFunction must vanish at both ends, got {self.values[0]}, {self.values[-1]}"
            )
        self.values[0] = 0.0
        self.values[-1] = 0.0

    @classmethod
    def from_function(cls, func: Callable[[np.ndarray], np.ndarray], N: int) -> "GridFunction":
        x = np.linspace(0.0, 1.0, N + 1)
        return cls(np.asarray(func(x), dtype=float))

    @classmethod
    def zeros(cls, N: int) -> "GridFunction":
        return cls(np.zeros(N + 1))

    @property
    def N(self) -> int:
        return self.values.size - 1

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.N + 1)

    @property
    def x_mid(self) -> np.ndarray:
        return (np.arange(self.N) + 0.5) * self.h

    @property
    def slopes(self) -> np.ndarray:
        """Midpoint slopes d_{i+1/2}."""
        return np.diff(self.values) / self.h

    @property
    def second_quotients(self) -> np.ndarray:
        """u'' at interior nodes 1..N-1."""
        return np.diff(self.values, 2) / self.h**2

    @property
    def third_differences(self) -> np.ndarray:
        """u''' centred at x_{i+3/2}, i = 0..N-3."""
        return np.diff(self.values, 3) / self.h**3

    @property
    def nodal_slopes(self) -> np.ndarray:
        return np.gradient(self.values, self.h, edge_order=2)

    def nodal_second_derivative(self) -> np.ndarray:
        """u'' at every node, one-sided second order at the ends."""
        u, h = self.values, self.h
        out = np.empty_like(u)
        out[1:-1] = self.second_quotients
        out[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / h**2
        out[-1] = (2.0 * u[-1] - 5.0 * u[-2] + 4.0 * u[-3] - u[-4]) / h**2
        return out

    def curvature(self) -> np.ndarray:
        """Graph curvature u''/(1 + u'^2)^{3/2} at every node."""
        slope = self.nodal_slopes
        return self.nodal_second_derivative() / (1.0 + slope**2) ** 1.5

    def reflected(self) -> "GridFunction":
        return GridFunction(self.values[::-1].copy())

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": self.x, "u": self.values})

    def to_csv(self, path: str) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def from_csv(cls, path: str) -> "GridFunction":
        """Load a `x,u` CSV; N is inferred from the row count."""
        if not os.path.exists(path):
            raise DomainError(f"Grid function file not found: {path}")
        frame = pd.read_csv(path)
        if list(frame.columns[:2]) != ["x", "u"]:
            raise DomainError(f"Expected header 'x,u' in {path}, got {list(frame.columns)}")
        expected = np.linspace(0.0, 1.0, len(frame))
        if np.max(np.abs(frame["x"].to_numpy() - expected)) > 1e-9:
            raise DomainError(f"{path} is not sampled on a uniform grid of [0, 1]")
        return cls(frame["u"].to_numpy())


# ========== DISCRETE ENERGY ==========

def _penalty(z: np.ndarray, p: float, epsilon: float) -> np.ndarray:
    if epsilon > 0:
        return (z * z + epsilon * epsilon) ** (0.5 * p) - epsilon**p
    return np.abs(z) ** p


def _penalty_derivative(z: np.ndarray, p: float, epsilon: float) -> np.ndarray:
    if epsilon > 0:
        return p * z * (z * z + epsilon * epsilon) ** (0.5 * p - 1.0)
    return p * np.sign(z) * np.abs(z) ** (p - 1.0)


def _penalty_second_derivative(z: np.ndarray, p: float, epsilon: float) -> np.ndarray:
    if epsilon > 0:
        s = z * z + epsilon * epsilon
        return p * s ** (0.5 * p - 2.0) * ((p - 1.0) * z * z + epsilon * epsilon)
    magnitude = np.maximum(np.abs(z), np.finfo(float).tiny) if p < 2 else np.abs(z)
    return p * (p - 1.0) * magnitude ** (p - 2.0)


def curvature_density(G: ShapeFunction, u: GridFunction) -> np.ndarray:
    """f_i = (G(d_{i+1/2}) - G(d_{i-1/2}))/h at interior nodes."""
    return np.diff(G(u.slopes)) / u.h


def energy_discrete(G: ShapeFunction, p: float, u: GridFunction, epsilon: float = 0.0) -> float:
    """h * sum |f_i|^p over interior nodes (smoothed when epsilon > 0)."""
    f = curvature_density(G, u)
    return float(u.h * np.sum(_penalty(f, p, epsilon)))


def euler_substitution(G: ShapeFunction, p: float, u: GridFunction, epsilon: float = 0.0) -> np.ndarray:
    """w = -p G'(u')^{p-1} |u''|^{p-2} u'' at interior nodes.

    In terms of f = G'(u') u'' this is -p |f|^{p-2} f.
    """
    return -_penalty_derivative(curvature_density(G, u), p, epsilon)


def slope_function(G: ShapeFunction, p: float, u: GridFunction, epsilon: float = 0.0) -> np.ndarray:
    """m = G'(u') w' at cell midpoints, with w pinned to 0 at both ends."""
    w = np.concatenate(([0.0], euler_substitution(G, p, u, epsilon), [0.0]))
    return G.derivative(u.slopes) * np.diff(w) / u.h


def gradient_discrete(G: ShapeFunction, p: float, u: GridFunction, epsilon: float = 0.0) -> np.ndarray:
    """dE/du_j at interior nodes; equals m_{j-1/2} - m_{j+1/2}."""
    m = slope_function(G, p, u, epsilon)
    return m[:-1] - m[1:]


def hessian_discrete(
    G: ShapeFunction, p: float, u: GridFunction, epsilon: float = 0.0, convexify: bool = False
) -> sparse.csr_matrix:
    """d^2E/du_i du_j at interior nodes, a pentadiagonal sparse matrix.

    With a = G(d) at midpoints and f = diff(a)/h, the midpoint Hessian is
    diag(G') D^T diag(phi'') D diag(G') / h + diag(b G''), b = D^T phi'(f).
    convexify drops the negative part of the second term.
    """
    h = u.h
    N = u.N
    d = u.slopes
    f = curvature_density(G, u)
    dG = G.derivative(d)
    ddG = G.second_derivative(d)
    first = _penalty_derivative(f, p, epsilon)
    second = _penalty_second_derivative(f, p, epsilon)
    b = np.concatenate(([0.0], first)) - np.concatenate((first, [0.0]))
    curvature_term = b * ddG
    if convexify:
        curvature_term = np.maximum(curvature_term, 0.0)

    D = sparse.diags([-np.ones(N - 1), np.ones(N - 1)], [0, 1], shape=(N - 1, N), format="csr")
    scale = sparse.diags(dG)
    H_mid = scale @ (D.T @ sparse.diags(second) @ D) @ scale / h + sparse.diags(curvature_term)
    Dn = sparse.diags([-np.ones(N), np.ones(N)], [0, 1], shape=(N, N + 1), format="csr")
    H_nodes = (Dn.T @ H_mid @ Dn).tocsr() / (h * h)
    return H_nodes[1:-1, 1:-1].tocsr()


def energy_curvature_form(p: float, u: GridFunction) -> float:
    """h * sum |kappa_u|^p sqrt(1 + u'^2) over interior nodes."""
    slope = u.nodal_slopes[1:-1]
    kappa = u.second_quotients / (1.0 + slope**2) ** 1.5
    return float(u.h * np.sum(np.abs(kappa) ** p * np.sqrt(1.0 + slope**2)))


def slope_bound(G: ShapeFunction, p: float, energy: float) -> float:
    """G^{-1}(E^{1/p}), the Jensen bound on max |u'| for symmetric concave u."""
    level = energy ** (1.0 / p)
    if G.sup is not None and level >= G.sup:
        return float("inf")
    return float(G.inv(level))
