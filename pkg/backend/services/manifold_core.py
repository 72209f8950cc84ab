"""
Chart-based Riemannian manifolds and finite-difference calculus.

Everything here is a pure function of immutable inputs. Derivatives of the
metric, of vector fields and of scalar fields are central differences with
step h_fd * max(1, |coordinate|); second derivatives of scalars use a ten
times wider stencil so that cancellation stays below truncation error.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DomainError, OutOfDomain, SingularMetric
from . import settings

logger = logging.getLogger(__name__)

LAPLACIAN_PLUS = "plus"    # +div(grad h)
LAPLACIAN_MINUS = "minus"  # -div(grad h)
LAPLACIAN_CONVENTIONS = (LAPLACIAN_PLUS, LAPLACIAN_MINUS)

SYMMETRY_TOLERANCE = 1e-12
SECOND_DIFFERENCE_FACTOR = 10.0


@dataclass(frozen=True, eq=False)
class TangentVector:
    base: np.ndarray
    components: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))
        object.__setattr__(self, "components", np.asarray(self.components, dtype=float))

    def __array__(self, dtype=None, copy=None):
        return self.components if dtype is None else self.components.astype(dtype)

    def __add__(self, other: "TangentVector") -> "TangentVector":
        return TangentVector(self.base, self.components + np.asarray(other))

    def __sub__(self, other: "TangentVector") -> "TangentVector":
        return TangentVector(self.base, self.components - np.asarray(other))

    def scaled(self, factor: float) -> "TangentVector":
        return TangentVector(self.base, factor * self.components)


VectorLike = Union[np.ndarray, Sequence[float], TangentVector]
FieldLike = Union[Callable[[np.ndarray], np.ndarray], VectorLike]


@dataclass(frozen=True)
class ScalarField:
    """Smooth real-valued function of chart coordinates"""

    fn: Callable[[np.ndarray], float] = field(repr=False, compare=False)
    label: str = "h"

    def __call__(self, point) -> float:
        return float(self.fn(np.asarray(point, dtype=float)))

    def partials(self, point, fd_step: float = settings.FD_STEP) -> np.ndarray:
        p = np.asarray(point, dtype=float)
        return central_gradient(self.fn, p, fd_step)

    def log(self) -> "ScalarField":
        def log_fn(p):
            value = float(self.fn(p))
            if value <= 0.0:
                raise DomainError("ln of non-positive value", self.label)
            return math.log(value)

        return ScalarField(log_fn, f"ln({self.label})")

    def exp(self) -> "ScalarField":
        return ScalarField(lambda p: math.exp(float(self.fn(p))), f"exp({self.label})")

    def compose(self, projection: Callable[[np.ndarray], np.ndarray], label: Optional[str] = None) -> "ScalarField":
        """Pull back along a coordinate projection (e.g. from a factor to a product chart)"""
        return ScalarField(lambda p: self.fn(projection(p)), label or self.label)

    @classmethod
    def constant(cls, value: float, label: Optional[str] = None) -> "ScalarField":
        return cls(lambda p: value, label or repr(float(value)))

    @classmethod
    def from_expression(cls, expr) -> "ScalarField":
        return cls(expr.evaluate, str(expr))


@dataclass(frozen=True)
class ChartManifold:
    """A manifold covered by a single chart: an open coordinate box and a metric field"""

    name: str
    dim: int
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    metric_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    fd_step: float = settings.FD_STEP

    def __post_init__(self):
        if self.dim < 0 or len(self.lower) != self.dim or len(self.upper) != self.dim:
            raise ValueError(f"Chart box of {self.name} does not match dimension {self.dim}")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError(f"Empty chart box for {self.name}")

    # -- points ---------------------------------------------------------

    def as_point(self, point) -> np.ndarray:
        p = np.atleast_1d(np.asarray(point, dtype=float)) if self.dim else np.zeros(0)
        if p.shape != (self.dim,):
            raise ValueError(f"{self.name} expects points with {self.dim} coordinates, got shape {p.shape}")
        return p

    def contains(self, point) -> bool:
        p = self.as_point(point)
        return bool(np.all(p > np.asarray(self.lower)) and np.all(p < np.asarray(self.upper)))

    def require_domain(self, point) -> np.ndarray:
        p = self.as_point(point)
        if not self.contains(p):
            raise OutOfDomain(self.name, p)
        return p

    def steps(self, point) -> np.ndarray:
        p = self.as_point(point)
        return self.fd_step * np.maximum(1.0, np.abs(p))

    def sample_points(self, count: int, rng: np.random.Generator, clip: float = 3.0) -> np.ndarray:
        """Uniform samples from the chart box intersected with [-clip, clip], kept off the boundary"""
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        margin = np.minimum(0.02 * (upper - lower), 0.05)
        lo = np.maximum(lower + margin, -clip)
        hi = np.minimum(upper - margin, clip)
        hi = np.where(hi > lo, hi, lo + 1e-3)
        return lo + (hi - lo) * rng.random((count, self.dim))

    # -- metric -----------------------------------------------------------

    def metric_matrix(self, point) -> np.ndarray:
        """Metric at a point without domain or definiteness checks (used on stencils)"""
        p = self.as_point(point)
        if self.dim == 0:
            return np.zeros((0, 0))
        g = np.asarray(self.metric_fn(p), dtype=float).reshape(self.dim, self.dim)
        return 0.5 * (g + g.T)

    def eval_metric(self, point) -> np.ndarray:
        p = self.require_domain(point)
        if self.dim == 0:
            return np.zeros((0, 0))
        raw = np.asarray(self.metric_fn(p), dtype=float).reshape(self.dim, self.dim)
        asymmetry = np.max(np.abs(raw - raw.T))
        if asymmetry > SYMMETRY_TOLERANCE * max(1.0, np.max(np.abs(raw))):
            logger.warning(f"Metric of {self.name} asymmetric by {asymmetry:.2e} at {p}; symmetrizing")
        g = 0.5 * (raw + raw.T)
        eigenvalues = np.linalg.eigvalsh(g)
        if not np.all(np.isfinite(eigenvalues)) or eigenvalues[0] <= 0.0:
            raise SingularMetric(self.name, p, eigenvalues[0])
        return g

    def inverse_metric(self, point) -> np.ndarray:
        g = self.eval_metric(point)
        if self.dim == 0:
            return g
        try:
            return np.linalg.inv(g)
        except np.linalg.LinAlgError as e:
            raise SingularMetric(self.name, self.as_point(point), 0.0) from e

    def inner(self, point, u: VectorLike, v: VectorLike) -> float:
        g = self.metric_matrix(point)
        return float(np.asarray(u, dtype=float) @ g @ np.asarray(v, dtype=float))

    def norm(self, point, v: VectorLike) -> float:
        return math.sqrt(max(self.inner(point, v, v), 0.0))

    def metric_derivatives(self, point) -> np.ndarray:
        """dg[a, b, c] = d_a g_bc by central differences"""
        p = self.as_point(point)
        h = self.steps(p)
        dg = np.empty((self.dim, self.dim, self.dim))
        for a in range(self.dim):
            forward = p.copy()
            backward = p.copy()
            forward[a] += h[a]
            backward[a] -= h[a]
            dg[a] = (self.metric_matrix(forward) - self.metric_matrix(backward)) / (2.0 * h[a])
        return dg

    def christoffel(self, point) -> np.ndarray:
        """Gamma[k, i, j] = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)"""
        if self.dim == 0:
            return np.zeros((0, 0, 0))
        ginv = self.inverse_metric(point)
        dg = self.metric_derivatives(point)
        lowered = dg + dg.transpose(1, 0, 2) - dg.transpose(1, 2, 0)
        return 0.5 * np.einsum("kl,ijl->kij", ginv, lowered)


# ---------------------------------------------------------------------------
# Finite-difference helpers
# ---------------------------------------------------------------------------

def _steps(point: np.ndarray, fd_step: float) -> np.ndarray:
    return fd_step * np.maximum(1.0, np.abs(point))


def central_gradient(fn: Callable[[np.ndarray], float], point: np.ndarray, fd_step: float) -> np.ndarray:
    p = np.asarray(point, dtype=float)
    h = _steps(p, fd_step)
    grad = np.empty(p.size)
    for i in range(p.size):
        forward = p.copy()
        backward = p.copy()
        forward[i] += h[i]
        backward[i] -= h[i]
        grad[i] = (float(fn(forward)) - float(fn(backward))) / (2.0 * h[i])
    return grad


def central_jacobian(fn: Callable[[np.ndarray], np.ndarray], point: np.ndarray, fd_step: float) -> np.ndarray:
    """J[k, i] = d_i fn^k"""
    p = np.asarray(point, dtype=float)
    h = _steps(p, fd_step)
    columns = []
    for i in range(p.size):
        forward = p.copy()
        backward = p.copy()
        forward[i] += h[i]
        backward[i] -= h[i]
        diff = np.asarray(fn(forward), dtype=float) - np.asarray(fn(backward), dtype=float)
        columns.append(diff / (2.0 * h[i]))
    if not columns:
        return np.zeros((np.asarray(fn(p)).size, 0))
    return np.stack(columns, axis=-1)


def second_partials(fn: Callable[[np.ndarray], float], point: np.ndarray, fd_step: float) -> np.ndarray:
    """Symmetric matrix of second partial derivatives (four-point stencil)"""
    p = np.asarray(point, dtype=float)
    s = SECOND_DIFFERENCE_FACTOR * _steps(p, fd_step)
    n = p.size
    hess = np.empty((n, n))

    def shifted(i, si, j, sj):
        q = p.copy()
        q[i] += si
        q[j] += sj
        return float(fn(q))

    for i in range(n):
        for j in range(i, n):
            value = (
                shifted(i, s[i], j, s[j])
                - shifted(i, s[i], j, -s[j])
                - shifted(i, -s[i], j, s[j])
                + shifted(i, -s[i], j, -s[j])
            ) / (4.0 * s[i] * s[j])
            hess[i, j] = hess[j, i] = value
    return hess


def as_field(v: FieldLike) -> Callable[[np.ndarray], np.ndarray]:
    """Vector fields are component functions; a bare vector becomes a constant-component field"""
    if callable(v):
        return v
    constant = np.asarray(v, dtype=float).copy()
    return lambda p: constant


def field_value(v: FieldLike, point: np.ndarray) -> np.ndarray:
    if callable(v):
        return np.asarray(v(point), dtype=float)
    return np.asarray(v, dtype=float)


def _scalar_fn(h) -> Callable[[np.ndarray], float]:
    return h.fn if isinstance(h, ScalarField) else h


# ---------------------------------------------------------------------------
# Connection and scalar calculus
# ---------------------------------------------------------------------------

def covariant_derivative(m: ChartManifold, X: FieldLike, Y: FieldLike, point) -> TangentVector:
    """(nabla_X Y)^k = X^i d_i Y^k + Gamma^k_ij X^i Y^j"""
    p = m.require_domain(point)
    x = field_value(X, p)
    y_field = as_field(Y)
    y = np.asarray(y_field(p), dtype=float)
    gamma = m.christoffel(p)
    dY = central_jacobian(y_field, p, m.fd_step)
    result = dY @ x + np.einsum("kij,i,j->k", gamma, x, y)
    return TangentVector(p, result)


def lie_bracket(m: ChartManifold, X: FieldLike, Y: FieldLike, point) -> TangentVector:
    p = m.require_domain(point)
    x_field = as_field(X)
    y_field = as_field(Y)
    dX = central_jacobian(x_field, p, m.fd_step)
    dY = central_jacobian(y_field, p, m.fd_step)
    return TangentVector(p, dY @ x_field(p) - dX @ y_field(p))


def directional_derivative(m: ChartManifold, h, X: VectorLike, point) -> float:
    p = m.require_domain(point)
    return float(central_gradient(_scalar_fn(h), p, m.fd_step) @ np.asarray(X, dtype=float))


def gradient(m: ChartManifold, h, point) -> TangentVector:
    """(grad h)^k = g^{kj} d_j h"""
    p = m.require_domain(point)
    ginv = m.inverse_metric(p)
    return TangentVector(p, ginv @ central_gradient(_scalar_fn(h), p, m.fd_step))


def hessian_matrix(m: ChartManifold, h, point) -> np.ndarray:
    """H_ij = d_i d_j h - Gamma^k_ij d_k h"""
    p = m.require_domain(point)
    fn = _scalar_fn(h)
    gamma = m.christoffel(p)
    dh = central_gradient(fn, p, m.fd_step)
    hess = second_partials(fn, p, m.fd_step) - np.einsum("kij,k->ij", gamma, dh)
    return 0.5 * (hess + hess.T)


def hessian(m: ChartManifold, h, X: VectorLike, Y: VectorLike, point) -> float:
    """H^h(X, Y) = X(Y(h)) - (nabla_X Y)(h), evaluated through its coordinate form"""
    return float(np.asarray(X, dtype=float) @ hessian_matrix(m, h, point) @ np.asarray(Y, dtype=float))


def divergence(m: ChartManifold, X: FieldLike, point) -> float:
    """Trace of the endomorphism V -> nabla_V X"""
    p = m.require_domain(point)
    x_field = as_field(X)
    dX = central_jacobian(x_field, p, m.fd_step)
    gamma = m.christoffel(p)
    return float(np.trace(dX) + np.einsum("iik,k->", gamma, x_field(p)))


def laplacian(m: ChartManifold, h, point, convention: str = LAPLACIAN_PLUS) -> float:
    if convention not in LAPLACIAN_CONVENTIONS:
        raise ValueError(f"Unknown Laplacian convention: {convention}")
    ginv = m.inverse_metric(point)
    value = float(np.einsum("ij,ij->", ginv, hessian_matrix(m, h, point)))
    return value if convention == LAPLACIAN_PLUS else -value


def gradient_field(m: ChartManifold, h) -> Callable[[np.ndarray], np.ndarray]:
    """The vector field q -> grad h(q) as a component function"""
    fn = _scalar_fn(h)

    def components(q):
        return np.linalg.solve(m.metric_matrix(q), central_gradient(fn, q, m.fd_step))

    return components
