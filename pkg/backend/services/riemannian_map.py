"""
Product maps phi = phi1 x phi2 between warped products, the vertical and
horizontal distributions of phi, O'Neill's tensors T and A and the second
fundamental form of the map.
"""

import logging
import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import NoFibers, RankDrop
from .expression_parser import Expr, coordinate_names, parse
from .manifold_core import (
    ChartManifold,
    ScalarField,
    TangentVector,
    central_jacobian,
    covariant_derivative,
    second_partials,
)
from .warped_product import WarpedProduct, build

logger = logging.getLogger(__name__)

RANK_THRESHOLD = 1e-7
RANK_AMBIGUITY = 1e-8
FRAME_CACHE_SIZE = 4096


@dataclass(frozen=True)
class FactorMap:
    """Map between factor charts given by one component function per target coordinate"""

    source: ChartManifold
    target: ChartManifold
    components: Tuple[Callable[[np.ndarray], float], ...] = field(compare=False, repr=False)
    label: str = "phi"

    def __call__(self, point) -> np.ndarray:
        p = self.source.as_point(point)
        return np.array([float(c(p)) for c in self.components])

    def jacobian(self, point) -> np.ndarray:
        p = self.source.as_point(point)
        if self.target.dim == 0:
            return np.zeros((0, self.source.dim))
        return central_jacobian(self, p, self.source.fd_step).reshape(self.target.dim, self.source.dim)

    @classmethod
    def from_expressions(
        cls, source: ChartManifold, target: ChartManifold, sources: Sequence[str], label: Optional[str] = None
    ) -> "FactorMap":
        if len(sources) != target.dim:
            raise ValueError(f"Map into {target.name} needs {target.dim} component expressions, got {len(sources)}")
        names = coordinate_names(1, source.dim)
        exprs: List[Expr] = [parse(src, names) for src in sources]
        return cls(source, target, tuple(e.evaluate for e in exprs), label or f"({', '.join(sources)})")

    @classmethod
    def identity(cls, m: ChartManifold) -> "FactorMap":
        return cls(m, m, tuple((lambda p, i=i: p[i]) for i in range(m.dim)), "identity")

    @classmethod
    def collapse(cls, source: ChartManifold, point_manifold: ChartManifold) -> "FactorMap":
        if point_manifold.dim != 0:
            raise ValueError("Collapse target must be 0-dimensional")
        return cls(source, point_manifold, (), "collapse")


@dataclass(frozen=True, eq=False)
class VerticalHorizontalFrame:
    point: np.ndarray
    vertical: np.ndarray     # columns: g-orthonormal basis of ker phi_*
    horizontal: np.ndarray   # columns: g-orthonormal basis of the orthogonal complement
    singular_values: np.ndarray
    metric: np.ndarray

    @property
    def vertical_dim(self) -> int:
        return self.vertical.shape[1]

    @property
    def horizontal_dim(self) -> int:
        return self.horizontal.shape[1]

    @property
    def vertical_projector(self) -> np.ndarray:
        return self.vertical @ self.vertical.T @ self.metric

    @property
    def horizontal_projector(self) -> np.ndarray:
        return np.eye(self.point.size) - self.vertical_projector

    def vertical_part(self, v) -> np.ndarray:
        return self.vertical_projector @ np.asarray(v, dtype=float)

    def horizontal_part(self, v) -> np.ndarray:
        return self.horizontal_projector @ np.asarray(v, dtype=float)


def _g_orthonormalize(basis: np.ndarray, g: np.ndarray) -> np.ndarray:
    if basis.shape[1] == 0:
        return basis
    gram = basis.T @ g @ basis
    chol = np.linalg.cholesky(0.5 * (gram + gram.T))
    return basis @ np.linalg.inv(chol).T


def compute_frame(jacobian: np.ndarray, g: np.ndarray, point: np.ndarray) -> VerticalHorizontalFrame:
    """Split the tangent space at a point into ker J and its g-orthogonal complement"""
    dim = g.shape[0]
    if jacobian.shape[0] == 0 or dim == 0:
        singular_values = np.zeros(0)
        rank = 0
        right = np.eye(dim)
    else:
        _, singular_values, vt = np.linalg.svd(jacobian, full_matrices=True)
        right = vt.T
        smax = float(singular_values.max()) if singular_values.size else 0.0
        threshold = RANK_THRESHOLD * smax
        if smax > 0.0 and np.any(np.abs(singular_values - threshold) < RANK_AMBIGUITY * smax):
            raise RankDrop(point, singular_values)
        rank = int(np.sum(singular_values > threshold)) if smax > 0.0 else 0
    kernel = right[:, rank:]
    horizontal = np.linalg.solve(g, right[:, :rank]) if rank else np.zeros((dim, 0))
    return VerticalHorizontalFrame(
        point=np.asarray(point, dtype=float),
        vertical=_g_orthonormalize(kernel, g),
        horizontal=_g_orthonormalize(horizontal, g),
        singular_values=singular_values,
        metric=g,
    )


@dataclass(eq=False)
class ProductRiemannianMap:
    source: WarpedProduct
    target: WarpedProduct
    phi1: FactorMap
    phi2: FactorMap
    name: str = "phi"
    riemannian: bool = True
    clairaut_g: Optional[str] = None
    _cache: Dict[Tuple[float, ...], VerticalHorizontalFrame] = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if self.phi1.source.dim != self.source.m1 or self.phi2.source.dim != self.source.m2:
            raise ValueError(f"Factor maps of {self.name} do not match the source factors")
        if self.phi1.target.dim != self.target.m1 or self.phi2.target.dim != self.target.m2:
            raise ValueError(f"Factor maps of {self.name} do not match the target factors")
        self.logger = logger

    def clairaut_function(self) -> ScalarField:
        """The hinted Clairaut function, or ln f of the source when there is no hint"""
        if self.clairaut_g is None:
            return self.source.log_warp()
        return ScalarField.from_expression(parse(self.clairaut_g, coordinate_names(1, self.source.dim)))

    @property
    def M(self) -> ChartManifold:
        return self.source.manifold

    @property
    def N(self) -> ChartManifold:
        return self.target.manifold

    def __call__(self, point) -> np.ndarray:
        p1, p2 = self.source.split_point(point)
        return np.concatenate([self.phi1(p1), self.phi2(p2)])

    def jacobian(self, point) -> np.ndarray:
        p1, p2 = self.source.split_point(point)
        J = np.zeros((self.target.dim, self.source.dim))
        J[: self.target.m1, : self.source.m1] = self.phi1.jacobian(p1)
        J[self.target.m1:, self.source.m1:] = self.phi2.jacobian(p2)
        return J

    def pushforward(self, point, v) -> TangentVector:
        """(phi1 x phi2)_* (u, w) = (phi1_* u, phi2_* w)"""
        p = self.M.require_domain(point)
        return TangentVector(self(p), self.jacobian(p) @ np.asarray(v, dtype=float))

    # -- frames -----------------------------------------------------------

    def _compute_frame(self, p: np.ndarray) -> VerticalHorizontalFrame:
        return compute_frame(self.jacobian(p), self.M.metric_matrix(p), p)

    def frame(self, point) -> VerticalHorizontalFrame:
        p = self.M.require_domain(point)
        key = tuple(float(x) for x in p)
        with self._lock:
            cached = self._cache.get(key)
        if cached is not None:
            return cached
        result = self._compute_frame(p)
        with self._lock:
            if len(self._cache) >= FRAME_CACHE_SIZE:
                self._cache.clear()
            self._cache[key] = result
        return result

    def projectors(self, point) -> Tuple[np.ndarray, np.ndarray]:
        fr = self.frame(point)
        return fr.vertical_projector, fr.horizontal_projector

    def vertical_field(self, v) -> Callable[[np.ndarray], np.ndarray]:
        """q -> V(q) v for a fixed coordinate vector v"""
        constant = np.asarray(v, dtype=float).copy()
        return lambda q: self._compute_frame(np.asarray(q, dtype=float)).vertical_projector @ constant

    def horizontal_field(self, v) -> Callable[[np.ndarray], np.ndarray]:
        constant = np.asarray(v, dtype=float).copy()
        return lambda q: self._compute_frame(np.asarray(q, dtype=float)).horizontal_projector @ constant

    def horizontal_lift(self, point, w) -> TangentVector:
        """Unique horizontal vector at a point whose pushforward is w"""
        p = self.M.require_domain(point)
        fr = self.frame(p)
        image = self.jacobian(p) @ fr.horizontal
        coefficients, *_ = np.linalg.lstsq(image, np.asarray(w, dtype=float), rcond=None)
        return TangentVector(p, fr.horizontal @ coefficients)

    def basic_field(self, w) -> Callable[[np.ndarray], np.ndarray]:
        """Horizontal lift of a constant-coordinate target field"""
        constant = np.asarray(w, dtype=float).copy()

        def components(q):
            q = np.asarray(q, dtype=float)
            fr = self._compute_frame(q)
            image = self.jacobian(q) @ fr.horizontal
            coefficients, *_ = np.linalg.lstsq(image, constant, rcond=None)
            return fr.horizontal @ coefficients

        return components

    def is_surjective_at(self, point) -> bool:
        return self.frame(point).horizontal_dim == self.target.dim

    # -- map geometry -------------------------------------------------------

    def second_fundamental_form(self, point, X, Y) -> np.ndarray:
        p = self.M.require_domain(point)
        return map_second_fundamental_form(self.M, self.N, self, p, X, Y)

    def tension(self, point) -> np.ndarray:
        """Sum of (nabla phi_*)(e_a, e_a) over a horizontal orthonormal frame"""
        fr = self.frame(point)
        total = np.zeros(self.target.dim)
        for a in range(fr.horizontal_dim):
            e = fr.horizontal[:, a]
            total += self.second_fundamental_form(point, e, e)
        return total

    def isometry_residual(self, point) -> float:
        """max |g_N(phi_* e_a, phi_* e_b) - delta_ab| over the horizontal frame"""
        p = self.M.require_domain(point)
        fr = self.frame(p)
        if fr.horizontal_dim == 0:
            return 0.0
        image = self.jacobian(p) @ fr.horizontal
        gram = image.T @ self.N.metric_matrix(self(p)) @ image
        return float(np.max(np.abs(gram - np.eye(fr.horizontal_dim))))

    def factor_map(self, which: int) -> "ProductRiemannianMap":
        """phi1 or phi2 as a map in its own right, between (Mi x point) and (Ni x point)"""
        from .catalog import POINT

        phi = self.phi1 if which == 1 else self.phi2
        source = build(phi.source, POINT, 1.0, name=phi.source.name)
        target = build(phi.target, POINT, 1.0, name=phi.target.name)
        return ProductRiemannianMap(
            source, target, phi, FactorMap.collapse(POINT, POINT), name=f"{self.name}[{which}]", riemannian=self.riemannian
        )


def map_second_fundamental_form(
    M: ChartManifold, N: ChartManifold, fn: Callable[[np.ndarray], np.ndarray], point, X, Y
) -> np.ndarray:
    """
    (nabla phi_*)(X, Y)^a = X^i Y^j (d_i d_j phi^a - Gamma^k_ij d_k phi^a
                                     + GammaN^a_bc d_i phi^b d_j phi^c)
    """
    p = np.asarray(point, dtype=float)
    x = np.asarray(X, dtype=float)
    y = np.asarray(Y, dtype=float)
    image = np.asarray(fn(p), dtype=float)
    if N.dim == 0:
        return np.zeros(0)
    J = central_jacobian(fn, p, M.fd_step).reshape(N.dim, M.dim)
    gamma_m = M.christoffel(p)
    gamma_n = N.christoffel(image)
    result = np.empty(N.dim)
    for a in range(N.dim):
        second = second_partials(lambda q, a=a: float(np.asarray(fn(q))[a]), p, M.fd_step)
        hess_a = second - np.einsum("kij,k->ij", gamma_m, J[a])
        result[a] = x @ hess_a @ y
    jx = J @ x
    jy = J @ y
    return result + np.einsum("abc,b,c->a", gamma_n, jx, jy)


# ---------------------------------------------------------------------------
# O'Neill tensors
# ---------------------------------------------------------------------------

def tensor_T(phi: ProductRiemannianMap, point, E1, E2) -> TangentVector:
    """T_E F = H nabla_{VE} VF + V nabla_{VE} HF"""
    p = phi.M.require_domain(point)
    Pv, Ph = phi.projectors(p)
    e = Pv @ np.asarray(E1, dtype=float)
    d_vertical = np.asarray(covariant_derivative(phi.M, e, phi.vertical_field(E2), p))
    d_horizontal = np.asarray(covariant_derivative(phi.M, e, phi.horizontal_field(E2), p))
    return TangentVector(p, Ph @ d_vertical + Pv @ d_horizontal)


def tensor_A(phi: ProductRiemannianMap, point, E1, E2) -> TangentVector:
    """A_E F = H nabla_{HE} VF + V nabla_{HE} HF"""
    p = phi.M.require_domain(point)
    Pv, Ph = phi.projectors(p)
    e = Ph @ np.asarray(E1, dtype=float)
    d_vertical = np.asarray(covariant_derivative(phi.M, e, phi.vertical_field(E2), p))
    d_horizontal = np.asarray(covariant_derivative(phi.M, e, phi.horizontal_field(E2), p))
    return TangentVector(p, Ph @ d_vertical + Pv @ d_horizontal)


def g_norm(phi: ProductRiemannianMap, point, v) -> float:
    return phi.M.norm(point, v)


@dataclass
class DecompositionReport:
    point: List[float]
    residuals: Dict[str, Optional[float]]

    @property
    def max_residual(self) -> float:
        values = [r for r in self.residuals.values() if r is not None]
        return max(values) if values else 0.0


def decomposition_check(phi: ProductRiemannianMap, point, rng: Optional[np.random.Generator] = None) -> DecompositionReport:
    """
    Assemble both sides of the four connection splittings for random vertical
    fields V, W and horizontal fields X, Y:

        nabla_V W = T_V W + V nabla_V W
        nabla_V X = H nabla_V X + T_V X
        nabla_X V = A_X V + V nabla_X V
        nabla_X Y = H nabla_X Y + A_X Y

    plus H nabla_V X = A_X V for a basic field X when phi is onto at the point.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    p = phi.M.require_domain(point)
    M = phi.M
    Pv, Ph = phi.projectors(p)

    def random_vector():
        return rng.normal(size=M.dim)

    v0, w0, x0, y0 = (random_vector() for _ in range(4))
    V, W = phi.vertical_field(v0), phi.vertical_field(w0)
    X, Y = phi.horizontal_field(x0), phi.horizontal_field(y0)
    v, w, x, y = V(p), W(p), X(p), Y(p)

    def nabla(a, B):
        return np.asarray(covariant_derivative(M, a, B, p))

    def dist(a, b):
        return M.norm(p, a - b)

    vw = nabla(v, W)
    vx = nabla(v, X)
    xv = nabla(x, V)
    xy = nabla(x, Y)
    residuals: Dict[str, Optional[float]] = {
        "vertical_vertical": dist(vw, np.asarray(tensor_T(phi, p, v, w)) + Pv @ vw),
        "vertical_horizontal": dist(vx, Ph @ vx + np.asarray(tensor_T(phi, p, v, x))),
        "horizontal_vertical": dist(xv, np.asarray(tensor_A(phi, p, x, v)) + Pv @ xv),
        "horizontal_horizontal": dist(xy, Ph @ xy + np.asarray(tensor_A(phi, p, x, y))),
        "basic_field": None,
    }
    if phi.is_surjective_at(p) and phi.frame(p).vertical_dim:
        basic = phi.basic_field(rng.normal(size=phi.target.dim))
        xb = basic(p)
        lhs = Ph @ nabla(v, basic)
        residuals["basic_field"] = dist(lhs, np.asarray(tensor_A(phi, p, xb, v)))
    return DecompositionReport(point=p.tolist(), residuals=residuals)


def fiber_mean_curvature(phi: ProductRiemannianMap, point) -> TangentVector:
    p = phi.M.require_domain(point)
    fr = phi.frame(p)
    if fr.vertical_dim == 0:
        raise NoFibers(f"{phi.name} has no fibers at {p.tolist()}")
    total = np.zeros(phi.M.dim)
    for i in range(fr.vertical_dim):
        e = fr.vertical[:, i]
        total += np.asarray(tensor_T(phi, p, e, e))
    return TangentVector(p, total / fr.vertical_dim)


def umbilical_residual(phi: ProductRiemannianMap, point) -> float:
    """max |T(e_i, e_j) - delta_ij H| over an orthonormal vertical frame"""
    p = phi.M.require_domain(point)
    fr = phi.frame(p)
    H = np.asarray(fiber_mean_curvature(phi, p))
    worst = 0.0
    for i in range(fr.vertical_dim):
        for j in range(i, fr.vertical_dim):
            t = np.asarray(tensor_T(phi, p, fr.vertical[:, i], fr.vertical[:, j]))
            expected = H if i == j else np.zeros_like(H)
            worst = max(worst, phi.M.norm(p, t - expected))
    return worst


def totally_geodesic_residual(phi: ProductRiemannianMap, point) -> float:
    """max |T(e_i, e_j)| over an orthonormal vertical frame (0 without fibers)"""
    p = phi.M.require_domain(point)
    fr = phi.frame(p)
    worst = 0.0
    for i in range(fr.vertical_dim):
        for j in range(i, fr.vertical_dim):
            t = np.asarray(tensor_T(phi, p, fr.vertical[:, i], fr.vertical[:, j]))
            worst = max(worst, phi.M.norm(p, t))
    return worst


@dataclass
class TensorLawReport:
    samples: int
    residuals: Dict[str, float]

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values()) if self.residuals else 0.0


def tensor_law_check(phi: ProductRiemannianMap, points: np.ndarray, rng: np.random.Generator) -> TensorLawReport:
    """
    Algebraic laws of T and A on random vectors: symmetry of T on vertical
    pairs, antisymmetry of A on horizontal pairs, reversal of the
    distributions, skew-symmetry of T_E and A_E, and T_E = T_VE, A_E = A_HE.
    """
    residuals = {
        "T_symmetric": 0.0,
        "A_antisymmetric": 0.0,
        "reversal": 0.0,
        "skew": 0.0,
        "projection": 0.0,
    }
    M = phi.M
    for p in points:
        Pv, Ph = phi.projectors(p)
        g = M.metric_matrix(p)
        e, f_, h = (rng.normal(size=M.dim) for _ in range(3))
        u, w = Pv @ e, Pv @ f_
        x, y = Ph @ e, Ph @ f_

        def record(key, value):
            residuals[key] = max(residuals[key], float(value))

        T = lambda a, b: np.asarray(tensor_T(phi, p, a, b))
        A = lambda a, b: np.asarray(tensor_A(phi, p, a, b))
        t_uw = T(u, w)
        a_xy = A(x, y)
        record("T_symmetric", M.norm(p, t_uw - T(w, u)))
        record("A_antisymmetric", M.norm(p, a_xy + A(y, x)))
        record("reversal", M.norm(p, Pv @ t_uw))
        record("reversal", M.norm(p, Ph @ T(u, x)))
        record("reversal", M.norm(p, Ph @ a_xy))
        record("reversal", M.norm(p, Pv @ A(x, u)))
        t_ef = T(e, f_)
        t_eh = T(e, h)
        a_ef = A(e, f_)
        a_eh = A(e, h)
        record("skew", abs(t_ef @ g @ h + f_ @ g @ t_eh))
        record("skew", abs(a_ef @ g @ h + f_ @ g @ a_eh))
        record("projection", M.norm(p, t_ef - T(Pv @ e, f_)))
        record("projection", M.norm(p, a_ef - A(Ph @ e, f_)))
    return TensorLawReport(samples=len(points), residuals=residuals)
