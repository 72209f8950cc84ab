"""
Warped products M1 x_f M2 with block metric g1 + f^2 g2.

The product chart concatenates base coordinates then fiber coordinates, so a
lift is zero padding and the splitting map is slicing.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

from .errors import MixedField, NonPositiveWarp
from .expression_parser import Expr, parse, coordinate_names
from .manifold_core import (
    ChartManifold,
    ScalarField,
    TangentVector,
    as_field,
    central_gradient,
    covariant_derivative,
    field_value,
    gradient,
)

logger = logging.getLogger(__name__)

BASE = 1
FIBER = 2
CONNECTION_TOLERANCE = 1e-4
CONNECTION_CASES = ((BASE, BASE), (BASE, FIBER), (FIBER, BASE), (FIBER, FIBER))

WarpLike = Union[ScalarField, Expr, str, float, int]


@dataclass(frozen=True)
class WarpedProduct:
    base: ChartManifold
    fiber: ChartManifold
    warp: ScalarField = field(compare=False)
    manifold: ChartManifold = field(compare=False, repr=False)

    @property
    def name(self) -> str:
        return self.manifold.name

    @property
    def dim(self) -> int:
        return self.manifold.dim

    @property
    def m1(self) -> int:
        return self.base.dim

    @property
    def m2(self) -> int:
        return self.fiber.dim

    def split_point(self, point) -> Tuple[np.ndarray, np.ndarray]:
        p = self.manifold.as_point(point)
        return p[: self.m1], p[self.m1:]

    def join_point(self, p1, p2) -> np.ndarray:
        return np.concatenate([self.base.as_point(p1), self.fiber.as_point(p2)])

    def warp_at(self, point) -> float:
        p1, _ = self.split_point(point)
        return self.warp(p1)

    def log_warp(self) -> ScalarField:
        """ln f pulled back to the product chart"""
        m1 = self.m1
        return self.warp.log().compose(lambda p: p[:m1], f"ln({self.warp.label})")

    def base_field(self, h: ScalarField) -> ScalarField:
        """Pull back a base scalar field to the product chart"""
        m1 = self.m1
        return h.compose(lambda p: p[:m1])

    def warp_gradient(self, point) -> np.ndarray:
        """Base gradient of f at the base point of a product point"""
        p1, _ = self.split_point(point)
        return np.asarray(gradient(self.base, self.warp, p1))


@dataclass(frozen=True, eq=False)
class LiftedVector:
    origin: int
    factor_components: np.ndarray
    components: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return self.components if dtype is None else self.components.astype(dtype)


@dataclass(frozen=True, eq=False)
class LiftedField:
    """A vector field on one factor viewed as a field on the product"""

    origin: int
    factor_field: Callable[[np.ndarray], np.ndarray]
    product: WarpedProduct = field(repr=False)

    def factor_point(self, point: np.ndarray) -> np.ndarray:
        p1, p2 = self.product.split_point(point)
        return p1 if self.origin == BASE else p2

    def factor_value(self, point) -> np.ndarray:
        return np.asarray(self.factor_field(self.factor_point(point)), dtype=float)

    def __call__(self, point) -> np.ndarray:
        return _pad(self.product, self.origin, self.factor_value(point))


def _as_warp(warp: WarpLike, base: ChartManifold) -> ScalarField:
    if isinstance(warp, ScalarField):
        return warp
    if isinstance(warp, (int, float)):
        return ScalarField.constant(float(warp))
    expr = warp if isinstance(warp, Expr) else parse(str(warp), coordinate_names(1, base.dim))
    if expr.arity != base.dim:
        expr = parse(expr.source, coordinate_names(1, base.dim))
    return ScalarField.from_expression(expr)


def _pad(w: WarpedProduct, origin: int, factor_vector) -> np.ndarray:
    v = np.asarray(factor_vector, dtype=float)
    out = np.zeros(w.dim)
    if origin == BASE:
        out[: w.m1] = v
    else:
        out[w.m1:] = v
    return out


def build(
    m1: ChartManifold,
    m2: ChartManifold,
    f: WarpLike = 1.0,
    name: Optional[str] = None,
    samples: int = 1000,
    seed: int = 0,
    catalog=None,
) -> WarpedProduct:
    """
    Build the warped product M1 x_f M2

    Args:
        m1: base manifold
        m2: fiber manifold
        f: warping function on base coordinates (expression, scalar field or constant)
        name: catalog name; a composite name is generated when omitted
        samples: number of base points used to check positivity of f
        seed: seed for the positivity sample
        catalog: optional ManifoldCatalog the product is registered in

    Returns:
        WarpedProduct
    """
    warp = _as_warp(f, m1)

    if m1.dim:
        rng = np.random.default_rng(seed)
        for p1 in m1.sample_points(samples, rng, clip=math.inf):
            value = warp(p1)
            if not value > 0.0:
                raise NonPositiveWarp(warp.label, p1, value)

    m1_dim = m1.dim

    def metric_fn(p: np.ndarray) -> np.ndarray:
        p1 = p[:m1_dim]
        p2 = p[m1_dim:]
        g = np.zeros((p.size, p.size))
        g[:m1_dim, :m1_dim] = m1.metric_matrix(p1)
        g[m1_dim:, m1_dim:] = warp(p1) ** 2 * m2.metric_matrix(p2)
        return g

    product_name = name or f"{m1.name} x[{warp.label}] {m2.name}"
    manifold = ChartManifold(
        name=product_name,
        dim=m1.dim + m2.dim,
        lower=tuple(m1.lower) + tuple(m2.lower),
        upper=tuple(m1.upper) + tuple(m2.upper),
        metric_fn=metric_fn,
        fd_step=m1.fd_step,
    )
    w = WarpedProduct(base=m1, fiber=m2, warp=warp, manifold=manifold)
    if catalog is not None:
        catalog.register(manifold)
    logger.debug(f"Built warped product {product_name} (dim {manifold.dim})")
    return w


def lift(w: WarpedProduct, origin: int, v, point=None) -> LiftedVector:
    """Lift a factor vector (or evaluate a factor field at a product point) to the product"""
    if origin not in (BASE, FIBER):
        raise ValueError(f"Lift origin must be 1 or 2, got {origin}")
    if callable(v):
        if point is None:
            raise ValueError("Lifting a field needs a product point")
        v = LiftedField(origin, v, w).factor_value(point)
    factor = np.asarray(v, dtype=float).reshape(-1)
    expected = w.m1 if origin == BASE else w.m2
    if factor.size != expected:
        raise ValueError(f"Factor {origin} vectors have {expected} components, got {factor.size}")
    return LiftedVector(origin, factor, _pad(w, origin, factor))


def lift_field(w: WarpedProduct, origin: int, factor_field) -> LiftedField:
    return LiftedField(origin, as_field(factor_field), w)


def split(w: WarpedProduct, v) -> Tuple[TangentVector, TangentVector]:
    """Splitting isomorphism v -> (pi1_* v, pi2_* v)"""
    components = np.asarray(v, dtype=float)
    if components.shape != (w.dim,):
        raise ValueError(f"{w.name} vectors have {w.dim} components, got shape {components.shape}")
    if isinstance(v, TangentVector):
        w.manifold.require_domain(v.base)
        p1, p2 = w.split_point(v.base)
    else:
        p1, p2 = np.zeros(w.m1), np.zeros(w.m2)
    return TangentVector(p1, components[: w.m1]), TangentVector(p2, components[w.m1:])


def _classify(w: WarpedProduct, v, point: np.ndarray) -> Tuple[int, Callable[[np.ndarray], np.ndarray]]:
    """Return (origin, factor field) of a pure lift"""
    if isinstance(v, LiftedField):
        return v.origin, v.factor_field
    if isinstance(v, LiftedVector):
        constant = v.factor_components
        return v.origin, lambda q: constant
    if callable(v):
        raise MixedField("Raw product fields must be wrapped with lift_field")
    components = np.asarray(v, dtype=float)
    if not np.any(components[w.m1:]):
        constant = components[: w.m1].copy()
        return BASE, lambda q: constant
    if not np.any(components[: w.m1]):
        constant = components[w.m1:].copy()
        return FIBER, lambda q: constant
    raise MixedField(f"Vector {components.tolist()} has components in both factors")


def warped_connection(w: WarpedProduct, X, Y, point) -> TangentVector:
    """
    Closed-form covariant derivative of one lift along another

    Cases (origin of X, origin of Y):
        (1, 1): lift of the base connection
        (1, 2), (2, 1): (X1(f)/f) X2 with X1 the base and X2 the fiber argument
        (2, 2): lift of the fiber connection minus g_M(X2, Y2) grad(ln f)
    """
    p = w.manifold.require_domain(point)
    p1, p2 = w.split_point(p)
    x_origin, x_field = _classify(w, X, p)
    y_origin, y_field = _classify(w, Y, p)
    x = np.asarray(x_field(p1 if x_origin == BASE else p2), dtype=float)
    y = np.asarray(y_field(p1 if y_origin == BASE else p2), dtype=float)
    f = w.warp(p1)

    if (x_origin, y_origin) == (BASE, BASE):
        result = _pad(w, BASE, np.asarray(covariant_derivative(w.base, x, y_field, p1)))
    elif (x_origin, y_origin) == (FIBER, FIBER):
        tangential = _pad(w, FIBER, np.asarray(covariant_derivative(w.fiber, x, y_field, p2)))
        g_xy = f ** 2 * w.fiber.inner(p2, x, y)
        log_f_gradient = _pad(w, BASE, w.warp_gradient(p) / f)
        result = tangential - g_xy * log_f_gradient
    else:
        base_vec, fiber_vec = (x, y) if x_origin == BASE else (y, x)
        x1_f = float(central_gradient(w.warp.fn, p1, w.base.fd_step) @ base_vec)
        result = _pad(w, FIBER, (x1_f / f) * fiber_vec)
    return TangentVector(p, result)


# ---------------------------------------------------------------------------
# Cross-check against the product Christoffel symbols
# ---------------------------------------------------------------------------

@dataclass
class ConnectionLawReport:
    product: str
    samples: int
    residuals: Dict[str, Optional[float]]
    tolerance: float = CONNECTION_TOLERANCE

    @property
    def max_residual(self) -> float:
        values = [r for r in self.residuals.values() if r is not None]
        return max(values) if values else 0.0

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance

    def to_dict(self) -> Dict[str, object]:
        return {
            "product": self.product,
            "samples": self.samples,
            "residuals": dict(self.residuals),
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def random_polynomial_field(dim: int, center: np.ndarray, rng: np.random.Generator) -> Callable[[np.ndarray], np.ndarray]:
    """Quadratic vector field centered at a point with coefficients in [-1, 1]"""
    a = rng.uniform(-1.0, 1.0, dim)
    b = rng.uniform(-1.0, 1.0, (dim, dim))
    c = rng.uniform(-1.0, 1.0, (dim, dim, dim))
    center = np.asarray(center, dtype=float).copy()

    def components(q):
        d = np.asarray(q, dtype=float) - center
        return a + b @ d + np.einsum("kij,i,j->k", c, d, d)

    return components


def _case_label(case: Tuple[int, int]) -> str:
    return f"{case[0]}{case[1]}"


def verify_connection_laws(
    w: WarpedProduct,
    samples: int = 200,
    rng: Optional[np.random.Generator] = None,
    tolerance: float = CONNECTION_TOLERANCE,
) -> ConnectionLawReport:
    """
    Compare warped_connection against the product Christoffel oracle on
    random lifted quadratic fields at random product points.

    Residuals are the maximum absolute component difference per case;
    cases involving a 0-dimensional factor are reported as None.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    residuals: Dict[str, Optional[float]] = {_case_label(case): 0.0 for case in CONNECTION_CASES}
    for case in CONNECTION_CASES:
        if any((w.m1 if origin == BASE else w.m2) == 0 for origin in case):
            residuals[_case_label(case)] = None

    points = w.manifold.sample_points(samples, rng)
    for p in points:
        p1, p2 = w.split_point(p)
        for case in CONNECTION_CASES:
            label = _case_label(case)
            if residuals[label] is None:
                continue
            fields = []
            for origin in case:
                factor_dim, center = (w.m1, p1) if origin == BASE else (w.m2, p2)
                fields.append(lift_field(w, origin, random_polynomial_field(factor_dim, center, rng)))
            X, Y = fields
            closed = np.asarray(warped_connection(w, X, Y, p))
            brute = np.asarray(covariant_derivative(w.manifold, field_value(X, p), Y, p))
            residuals[label] = max(residuals[label], float(np.max(np.abs(closed - brute))))

    report = ConnectionLawReport(product=w.name, samples=samples, residuals=residuals, tolerance=tolerance)
    logger.info(f"Connection laws on {w.name}: max residual {report.max_residual:.3e}")
    return report
