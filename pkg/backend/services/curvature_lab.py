"""
Finite-difference Riemann tensor oracle and the closed-form Ricci and
sectional curvature items for product maps between warped products.

Conventions:
    R(d_i, d_j) d_k = R^l_ijk d_l with R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y]
    sec(X, Y) = g(R(X,Y)Y, X) / |X ^ Y|^2   (round sphere: +1)
    Ric_jk = R^i_ijk
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DegeneratePlane, NotComputable
from .manifold_core import (
    LAPLACIAN_MINUS,
    LAPLACIAN_PLUS,
    ChartManifold,
    ScalarField,
    covariant_derivative,
    divergence,
    gradient,
    gradient_field,
    hessian,
    laplacian,
)
from .riemannian_map import ProductRiemannianMap, map_second_fundamental_form, tensor_A, tensor_T

logger = logging.getLogger(__name__)

RIEMANN_STEP_FACTOR = 10.0
DEGENERATE_AREA = 1e-12
SYMMETRY_TOLERANCE = 1e-4
ITEM_TOLERANCE = 1e-3
ALIGNMENT_TOLERANCE = 1e-10

CURVATURE_SIGN = "sphere_positive"
LITERAL = "literal"
GAUSS = "gauss"
FACTOR = "factor"
FIBER = "fiber"

SECTIONAL_ITEMS = (
    "base-fibers",
    "fiber-plane",
    "base-horizontal",
    "base-mixed",
    "fiber-horizontal",
    "fiber-mixed",
)
RICCI_ITEMS = ("vertical-base", "vertical-fiber", "horizontal-base", "horizontal-fiber")

# Candidate orientations in tie-break order
SECTIONAL_ORIENTATIONS: Dict[str, Tuple[str, ...]] = {
    "base-fibers": (GAUSS, LITERAL),
    "fiber-plane": (FACTOR, FIBER),
    "base-horizontal": (GAUSS, LITERAL),
    "base-mixed": (GAUSS, LITERAL),
    "fiber-horizontal": (GAUSS, LITERAL),
    "fiber-mixed": (LITERAL,),
}
# Items whose residual is bound by ITEM_TOLERANCE; the rest are report-only
BOUND_ITEMS = ("sectional:fiber-plane", "sectional:fiber-mixed", "ricci:vertical-fiber")


# ---------------------------------------------------------------------------
# Oracle
# ---------------------------------------------------------------------------

def riemann(m: ChartManifold, point) -> np.ndarray:
    """R[l, i, j, k] = R^l_ijk from central differences of the Christoffel symbols"""
    p = m.require_domain(point)
    n = m.dim
    gamma = m.christoffel(p)
    steps = RIEMANN_STEP_FACTOR * m.steps(p)
    d_gamma = np.empty((n, n, n, n))
    for a in range(n):
        forward = p.copy()
        backward = p.copy()
        forward[a] += steps[a]
        backward[a] -= steps[a]
        d_gamma[a] = (m.christoffel(forward) - m.christoffel(backward)) / (2.0 * steps[a])
    first = d_gamma.transpose(1, 0, 2, 3)        # d_i Gamma^l_jk
    quadratic = np.einsum("lis,sjk->lijk", gamma, gamma)
    return first - first.transpose(0, 2, 1, 3) + quadratic - quadratic.transpose(0, 2, 1, 3)


def lowered(m: ChartManifold, point) -> np.ndarray:
    """R[a, b, c, d] = g(R(d_a, d_b) d_c, d_d)"""
    return np.einsum("mabc,md->abcd", riemann(m, point), m.metric_matrix(point))


def _area(m: ChartManifold, p, X, Y) -> float:
    return m.inner(p, X, X) * m.inner(p, Y, Y) - m.inner(p, X, Y) ** 2


def sectional(m: ChartManifold, point, X, Y) -> float:
    p = m.require_domain(point)
    x = np.asarray(X, dtype=float)
    y = np.asarray(Y, dtype=float)
    area = _area(m, p, x, y)
    if area <= DEGENERATE_AREA:
        raise DegeneratePlane(f"Vectors {x.tolist()} and {y.tolist()} span no plane")
    return float(np.einsum("abcd,a,b,c,d->", lowered(m, p), x, y, y, x) / area)


def ricci(m: ChartManifold, point, X, Y) -> float:
    ric = np.einsum("iijk->jk", riemann(m, point))
    return float(np.asarray(X, dtype=float) @ ric @ np.asarray(Y, dtype=float))


def bianchi_and_symmetry_check(m: ChartManifold, point) -> Dict[str, float]:
    """Symmetry defects of the lowered tensor, relative to max(1, max |R_abcd|)"""
    R = lowered(m, point)
    scale = max(1.0, float(np.max(np.abs(R), initial=0.0)))

    def defect(D):
        return float(np.max(np.abs(D), initial=0.0)) / scale

    return {
        "antisymmetry_first_pair": defect(R + R.transpose(1, 0, 2, 3)),
        "antisymmetry_second_pair": defect(R + R.transpose(0, 1, 3, 2)),
        "pair_symmetry": defect(R - R.transpose(2, 3, 0, 1)),
        "first_bianchi": defect(R + R.transpose(1, 2, 0, 3) + R.transpose(2, 0, 1, 3)),
    }


def coordinate_slice(m: ChartManifold, point, axes: Sequence[int]) -> Tuple[ChartManifold, np.ndarray]:
    """Submanifold through a point along the given coordinate axes, with the induced metric"""
    p = m.as_point(point).copy()
    axes = list(axes)

    def embed(q):
        full = p.copy()
        full[axes] = q
        return full

    def metric_fn(q):
        return m.metric_matrix(embed(q))[np.ix_(axes, axes)]

    sub = ChartManifold(
        name=f"{m.name}|{''.join(str(a + 1) for a in axes)}",
        dim=len(axes),
        lower=tuple(m.lower[a] for a in axes),
        upper=tuple(m.upper[a] for a in axes),
        metric_fn=metric_fn,
        fd_step=m.fd_step,
    )
    return sub, p[axes]


def aligned_axes(basis: np.ndarray) -> Optional[List[int]]:
    """Coordinate axes spanning the column space of a basis, if it is coordinate aligned"""
    if basis.shape[1] == 0:
        return []
    scale = np.max(np.abs(basis))
    rows = [i for i in range(basis.shape[0]) if np.max(np.abs(basis[i])) > ALIGNMENT_TOLERANCE * scale]
    return rows if len(rows) == basis.shape[1] else None


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class ConventionStamp:
    curvature: str = CURVATURE_SIGN
    laplacian: str = LAPLACIAN_MINUS
    orientation: Optional[str] = None

    def to_dict(self) -> Dict[str, Optional[str]]:
        return {"curvature": self.curvature, "laplacian": self.laplacian, "orientation": self.orientation}


@dataclass
class CurvatureReport:
    item: str
    point: List[float]
    vectors: List[List[float]] = field(default_factory=list)
    oracle: Optional[float] = None
    closed_form: Optional[float] = None
    residual: Optional[float] = None
    stamp: ConventionStamp = field(default_factory=ConventionStamp)
    candidates: Dict[str, Dict[str, float]] = field(default_factory=dict)
    terms: Dict[str, float] = field(default_factory=dict)
    status: str = "ok"
    note: str = ""

    @property
    def computable(self) -> bool:
        return self.status == "ok"

    def apply_orientation(self, orientation: str) -> "CurvatureReport":
        candidate = self.candidates[orientation]
        self.closed_form = candidate["closed_form"]
        self.residual = candidate["residual"]
        self.stamp.orientation = orientation
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "item": self.item,
            "point": self.point,
            "vectors": self.vectors,
            "oracle": self.oracle,
            "closed_form": self.closed_form,
            "residual": self.residual,
            "stamp": self.stamp.to_dict(),
            "candidates": self.candidates,
            "terms": self.terms,
            "status": self.status,
            "note": self.note,
        }


def _not_computable(item: str, p, note: str, stamp: ConventionStamp) -> CurvatureReport:
    logger.warning(f"{item} at {list(np.round(p, 6))}: {note}")
    return CurvatureReport(item=item, point=[float(x) for x in p], stamp=stamp, status="not_computable", note=note)


def _candidates(oracle: float, values: Dict[str, float]) -> Dict[str, Dict[str, float]]:
    return {name: {"closed_form": float(v), "residual": float(abs(oracle - v))} for name, v in values.items()}


# ---------------------------------------------------------------------------
# Shared geometric data of a product map at a point
# ---------------------------------------------------------------------------

def _lift(phi: ProductRiemannianMap, which: int, v: np.ndarray) -> np.ndarray:
    out = np.zeros(phi.source.dim)
    if which == 1:
        out[: phi.source.m1] = v
    else:
        out[phi.source.m1:] = v
    return out


def _factor_frames(phi: ProductRiemannianMap, which: int, p: np.ndarray):
    """(factor map as product map, factor point, frame) for phi1 or phi2"""
    factor = phi.factor_map(which)
    p1, p2 = phi.source.split_point(p)
    q = factor.source.join_point(p1 if which == 1 else p2, np.zeros(0))
    return factor, q, factor.frame(q)


def _supported_on(v: np.ndarray, axes) -> bool:
    """True when v vanishes, up to rounding, outside the given axes"""
    outside = np.delete(np.asarray(v, dtype=float), list(axes))
    scale = np.max(np.abs(v), initial=0.0)
    return bool(np.max(np.abs(outside), initial=0.0) <= 1e-12 * max(scale, 1e-300))


def _intrinsic_fiber(m: ChartManifold, p: np.ndarray, basis: np.ndarray, item: str):
    axes = aligned_axes(basis)
    if axes is None:
        raise NotComputable(f"{item}: fibers are not coordinate aligned at {p.tolist()}")
    return coordinate_slice(m, p, axes), axes


def _warp_terms(phi: ProductRiemannianMap, p: np.ndarray, convention: str) -> Dict[str, float]:
    w = phi.source
    p1, _ = w.split_point(p)
    f = w.warp(p1)
    if w.m1 == 0:
        return {"f": f, "grad_f_sq": 0.0, "laplacian_f": 0.0}
    grad_f = w.warp_gradient(p)
    return {
        "f": f,
        "grad_f_sq": w.base.inner(p1, grad_f, grad_f),
        "laplacian_f": laplacian(w.base, w.warp, p1, convention),
    }


def _clairaut_on_base(phi: ProductRiemannianMap, g: ScalarField, p: np.ndarray) -> ScalarField:
    """Restrict a product scalar field to the base slice through p"""
    _, p2 = phi.source.split_point(p)
    p2 = p2.copy()
    return ScalarField(lambda q: g(np.concatenate([q, p2])), g.label)


# ---------------------------------------------------------------------------
# Sectional items
# ---------------------------------------------------------------------------

def default_sectional_vectors(phi: ProductRiemannianMap, item: str, point) -> Tuple[np.ndarray, np.ndarray]:
    """Canonical plane of an item at a point, as product-chart vectors"""
    p = phi.M.require_domain(point)
    fr = phi.frame(p)
    if item == "base-fibers":
        if fr.vertical_dim < 2:
            raise NotComputable(f"{item}: fibers of {phi.name} have dimension {fr.vertical_dim} < 2")
        return fr.vertical[:, 0], fr.vertical[:, 1]
    if item == "fiber-plane":
        if phi.source.m2 < 2:
            raise NotComputable(f"{item}: fiber factor has dimension {phi.source.m2} < 2")
        eye = np.eye(phi.source.m2)
        return _lift(phi, 2, eye[0]), _lift(phi, 2, eye[1])
    if item == "base-mixed":
        base_horizontal = [v for v in fr.horizontal.T if _supported_on(v, range(phi.source.m1))]
        if fr.vertical_dim == 0 or not base_horizontal:
            raise NotComputable(f"{item}: needs a vertical vector and a horizontal base vector")
        return fr.vertical[:, 0], base_horizontal[0]
    which = 1 if item == "base-horizontal" else 2
    factor, _, ffr = _factor_frames(phi, which, p)
    if item in ("base-horizontal", "fiber-horizontal"):
        if ffr.horizontal_dim < 2:
            raise NotComputable(f"{item}: horizontal space of factor {which} has dimension {ffr.horizontal_dim} < 2")
        return _lift(phi, which, ffr.horizontal[:, 0]), _lift(phi, which, ffr.horizontal[:, 1])
    if item == "fiber-mixed":
        if ffr.vertical_dim == 0 or ffr.horizontal_dim == 0:
            raise NotComputable(f"{item}: second factor map needs vertical and horizontal directions")
        return _lift(phi, 2, ffr.vertical[:, 0]), _lift(phi, 2, ffr.horizontal[:, 0])
    raise KeyError(f"Unknown sectional item: {item}")


def sectional_item(
    phi: ProductRiemannianMap,
    item: str,
    point,
    g: Optional[ScalarField] = None,
    vectors: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
    orientation: Optional[str] = None,
    stamp: Optional[ConventionStamp] = None,
) -> CurvatureReport:
    """
    Closed-form sectional curvature of a typed plane against the oracle.

    Items:
        base-fibers       vertical plane: sec = sec_fiber + |grad g|^2 (literal)
                          or sec_fiber = sec + |grad g|^2 (gauss)
        fiber-plane       fiber factor plane: (sec2 - |grad f|^2) / f^2 with
                          sec2 of (M2, g2) (factor) or of the fiber slice (fiber)
        base-horizontal   horizontal plane of phi1: target curvature with
                          second fundamental form corrections
        base-mixed        vertical U and base-horizontal Y, with grad g and A
        fiber-horizontal  horizontal plane of phi2, warped
        fiber-mixed       -(|A_Y U|^2 + |grad f|^2) / (f^2 |U|^2 |Y|^2)
    """
    if item not in SECTIONAL_ITEMS:
        raise KeyError(f"Unknown sectional item: {item}")
    stamp = stamp if stamp is not None else ConventionStamp()
    name = f"sectional:{item}"
    M = phi.M
    p = M.require_domain(point)
    g = g if g is not None else phi.clairaut_function()
    try:
        if vectors is None:
            X, Y = default_sectional_vectors(phi, item, p)
        else:
            X, Y = (np.asarray(v, dtype=float) for v in vectors)
        oracle = sectional(M, p, X, Y)
        values, terms, note = _SECTIONAL_EVALUATORS[item](phi, p, X, Y, g, stamp)
    except NotComputable as e:
        return _not_computable(name, p, str(e), ConventionStamp(**vars(stamp)))

    report = CurvatureReport(
        item=name,
        point=p.tolist(),
        vectors=[X.tolist(), Y.tolist()],
        oracle=oracle,
        stamp=ConventionStamp(**vars(stamp)),
        candidates=_candidates(oracle, values),
        terms=terms,
        note=note,
    )
    chosen = orientation or min(SECTIONAL_ORIENTATIONS[item], key=lambda o: report.candidates.get(o, {"residual": np.inf})["residual"])
    if chosen not in report.candidates:
        chosen = next(o for o in SECTIONAL_ORIENTATIONS[item] if o in report.candidates)
    return report.apply_orientation(chosen)


def _base_fibers(phi, p, X, Y, g, stamp):
    M = phi.M
    fr = phi.frame(p)
    (fiber, q), axes = _intrinsic_fiber(M, p, fr.vertical, "sectional:base-fibers")
    intrinsic = sectional(fiber, q, X[axes], Y[axes])
    grad_g = np.asarray(gradient(M, g, p))
    grad_sq = M.inner(p, grad_g, grad_g)
    values = {LITERAL: intrinsic + grad_sq, GAUSS: intrinsic - grad_sq}
    return values, {"intrinsic_fiber": intrinsic, "grad_g_sq": grad_sq}, ""


def _fiber_plane(phi, p, X, Y, g, stamp):
    w = phi.source
    _, p2 = w.split_point(p)
    x2, y2 = X[w.m1:], Y[w.m1:]
    warp = _warp_terms(phi, p, stamp.laplacian)
    f, grad_sq = warp["f"], warp["grad_f_sq"]
    factor_sec = sectional(w.fiber, p2, x2, y2)
    values = {FACTOR: (factor_sec - grad_sq) / f ** 2}
    terms = {"factor_sec": factor_sec, "grad_f_sq": grad_sq, "f": f}
    fr = phi.frame(p)
    axes = aligned_axes(fr.vertical)
    fiber_axes = [a for a in (axes or []) if a >= w.m1]
    if len(fiber_axes) >= 2 and _supported_on(X, fiber_axes) and _supported_on(Y, fiber_axes):
        fiber, q = coordinate_slice(phi.M, p, fiber_axes)
        fiber_sec = sectional(fiber, q, X[fiber_axes], Y[fiber_axes]) * f ** 2
        values[FIBER] = (fiber_sec - grad_sq) / f ** 2
        terms["fiber_sec"] = fiber_sec
    return values, terms, ""


def _horizontal_item(phi, p, X, Y, which, stamp):
    """Shared evaluation of base-horizontal (which=1) and fiber-horizontal (which=2)"""
    w = phi.source
    factor, q, ffr = _factor_frames(phi, which, p)
    sl = slice(0, w.m1) if which == 1 else slice(w.m1, w.dim)
    x, y = X[sl], Y[sl]
    fmap = phi.phi1 if which == 1 else phi.phi2
    image = fmap(q[: fmap.source.dim])
    N_i = fmap.target
    J = fmap.jacobian(q)
    jx, jy = J @ x, J @ y
    q_factor = q[: fmap.source.dim]
    b_xx = map_second_fundamental_form(fmap.source, N_i, fmap, q_factor, x, x)
    b_yy = map_second_fundamental_form(fmap.source, N_i, fmap, q_factor, y, y)
    b_xy = map_second_fundamental_form(fmap.source, N_i, fmap, q_factor, x, y)
    g_n = N_i.metric_matrix(image)
    second = float(b_xx @ g_n @ b_yy - b_xy @ g_n @ b_xy)
    target_area = _area(N_i, image, jx, jy)
    target_sec = sectional(N_i, image, jx, jy) if target_area > DEGENERATE_AREA else 0.0
    literal_r = float(np.einsum("abcd,a,b,c,d->", lowered(N_i, image), jx, jy, jx, jy)) if N_i.dim >= 2 else 0.0
    factor_area = _area(fmap.source, q_factor, x, y)
    terms = {"target_sec": target_sec, "second_fundamental": second, "factor_area": factor_area}
    if which == 1:
        values = {
            LITERAL: (literal_r - second) / factor_area,
            GAUSS: (target_sec * target_area + second) / factor_area,
        }
    else:
        warp = _warp_terms(phi, p, stamp.laplacian)
        f, grad_sq = warp["f"], warp["grad_f_sq"]
        terms.update({"f": f, "grad_f_sq": grad_sq})
        values = {
            LITERAL: (literal_r - second - grad_sq / f ** 2) / factor_area,
            GAUSS: (target_sec * target_area + second - grad_sq * factor_area) / (f ** 2 * factor_area),
        }
    return values, terms, "literal reads R^N(phiY, phiZ, phiY, phiZ) in the oracle index order"


def _base_horizontal(phi, p, X, Y, g, stamp):
    return _horizontal_item(phi, p, X, Y, 1, stamp)


def _fiber_horizontal(phi, p, X, Y, g, stamp):
    return _horizontal_item(phi, p, X, Y, 2, stamp)


def _base_mixed(phi, p, U, Y, g, stamp):
    M = phi.M
    u_sq = M.inner(p, U, U)
    y_sq = M.inner(p, Y, Y)
    hess = hessian(M, g, Y, Y, p)
    y_g = float(np.asarray(gradient(M, g, p)) @ M.metric_matrix(p) @ Y)
    a_yu = np.asarray(tensor_A(phi, p, Y, U))
    a_sq = M.inner(p, a_yu, a_yu)
    literal = (u_sq * hess + y_g ** 2 * u_sq - a_sq) / (u_sq * y_sq)
    terms = {"hessian_g": hess, "Y_g": y_g, "A_sq": a_sq}
    return {LITERAL: literal, GAUSS: -literal}, terms, ""


def _fiber_mixed(phi, p, U, Y, g, stamp):
    w = phi.source
    factor, q, _ = _factor_frames(phi, 2, p)
    u2, y2 = U[w.m1:], Y[w.m1:]
    a = np.asarray(tensor_A(factor, q, y2, u2))
    a_sq = factor.M.inner(q, a, a)
    warp = _warp_terms(phi, p, stamp.laplacian)
    f, grad_sq = warp["f"], warp["grad_f_sq"]
    _, p2 = w.split_point(p)
    norms = w.fiber.inner(p2, u2, u2) * w.fiber.inner(p2, y2, y2)
    value = -(a_sq + grad_sq) / (f ** 2 * norms)
    return {LITERAL: value}, {"A_sq": a_sq, "grad_f_sq": grad_sq, "f": f}, ""


_SECTIONAL_EVALUATORS: Dict[str, Callable] = {
    "base-fibers": _base_fibers,
    "fiber-plane": _fiber_plane,
    "base-horizontal": _base_horizontal,
    "base-mixed": _base_mixed,
    "fiber-horizontal": _fiber_horizontal,
    "fiber-mixed": _fiber_mixed,
}


# ---------------------------------------------------------------------------
# Ricci items
# ---------------------------------------------------------------------------

def _a_derivative_trace(factor: ProductRiemannianMap, q: np.ndarray, y, z, frame_vectors: np.ndarray) -> float:
    """sum_j g((nabla_{e_j} A)_Y Z, e_j) with Y, Z extended as constant-coordinate fields"""
    M = factor.M
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    total = 0.0
    a_field = lambda r: np.asarray(tensor_A(factor, r, y, z))
    for j in range(frame_vectors.shape[1]):
        e = frame_vectors[:, j]
        nabla_a = np.asarray(covariant_derivative(M, e, a_field, q))
        nabla_y = np.asarray(covariant_derivative(M, e, y, q))
        nabla_z = np.asarray(covariant_derivative(M, e, z, q))
        value = nabla_a - np.asarray(tensor_A(factor, q, nabla_y, z)) - np.asarray(tensor_A(factor, q, y, nabla_z))
        total += M.inner(q, value, e)
    return total


def _range_ricci(fmap, image, jx, jy, which: int, horizontal_dim: int) -> float:
    if horizontal_dim < fmap.target.dim:
        raise NotComputable(f"range of factor {which} is a proper subspace of its target")
    if fmap.target.dim < 2:
        return 0.0
    return ricci(fmap.target, image, jx, jy)


def _ricci_vertical_base(phi, p, X, Y, g, stamp):
    w = phi.source
    factor, q, ffr = _factor_frames(phi, 1, p)
    x, y = X[: w.m1], Y[: w.m1]
    (fiber, qf), axes = _intrinsic_fiber(factor.M, q, ffr.vertical, "ricci:vertical-base")
    fiber_ric = ricci(fiber, qf, x[axes], y[axes]) if fiber.dim >= 2 else 0.0
    g_base = _clairaut_on_base(phi, g, p)
    p1 = q[: w.m1]
    grad_g = np.asarray(gradient(w.base, g_base, p1))
    grad_sq = w.base.inner(p1, grad_g, grad_g)
    div_grad = divergence(w.base, gradient_field(w.base, g_base), p1)
    a_sum = 0.0
    for a in range(ffr.horizontal_dim):
        e = ffr.horizontal[:, a]
        a_x = np.asarray(tensor_A(factor, q, e, x))
        a_y = np.asarray(tensor_A(factor, q, e, y))
        a_sum += factor.M.inner(q, a_x, a_y)
    warp = _warp_terms(phi, p, stamp.laplacian)
    hess_f = hessian(w.base, w.warp, x, y, p1)
    gxy = w.base.inner(p1, x, y)
    rank = ffr.horizontal_dim
    value = (
        fiber_ric
        - (w.m1 - rank) * grad_sq * gxy
        - gxy * div_grad
        + a_sum
        - w.m2 / warp["f"] * hess_f
    )
    terms = {"fiber_ricci": fiber_ric, "grad_g_sq": grad_sq, "div_grad_g": div_grad, "A_sum": a_sum, "hessian_f": hess_f}
    return value, terms, ""


def _ricci_vertical_fiber(phi, p, X, Y, g, stamp):
    w = phi.source
    factor, q, ffr = _factor_frames(phi, 2, p)
    x, y = X[w.m1:], Y[w.m1:]
    (fiber, qf), axes = _intrinsic_fiber(factor.M, q, ffr.vertical, "ricci:vertical-fiber")
    fiber_ric = ricci(fiber, qf, x[axes], y[axes]) if fiber.dim >= 2 else 0.0
    a_sum = 0.0
    for b in range(ffr.horizontal_dim):
        e = ffr.horizontal[:, b]
        a_sum += factor.M.inner(q, np.asarray(tensor_A(factor, q, e, x)), np.asarray(tensor_A(factor, q, e, y)))
    warp = _warp_terms(phi, p, stamp.laplacian)
    f = warp["f"]
    coefficient = warp["laplacian_f"] / f - (w.m2 - 1) * warp["grad_f_sq"] / f ** 2
    value = fiber_ric + a_sum + coefficient * phi.M.inner(p, X, Y)
    terms = {"fiber_ricci": fiber_ric, "A_sum": a_sum, "warp_coefficient": coefficient}
    return value, terms, ""


def _ricci_horizontal(phi, p, X, Y, g, which, stamp):
    w = phi.source
    factor, q, ffr = _factor_frames(phi, which, p)
    sl = slice(0, w.m1) if which == 1 else slice(w.m1, w.dim)
    x, y = X[sl], Y[sl]
    fmap = phi.phi1 if which == 1 else phi.phi2
    qf = q[: fmap.source.dim]
    image = fmap(qf)
    J = fmap.jacobian(qf)
    range_ric = _range_ricci(fmap, image, J @ x, J @ y, which, ffr.horizontal_dim)
    g_n = fmap.target.metric_matrix(image)

    def sff(a, b):
        return map_second_fundamental_form(fmap.source, fmap.target, fmap, qf, a, b)

    tension = np.zeros(fmap.target.dim)
    cross = 0.0
    for a in range(ffr.horizontal_dim):
        e = ffr.horizontal[:, a]
        tension += sff(e, e)
        cross += float(sff(x, e) @ g_n @ sff(y, e))
    tension_term = float(sff(x, y) @ g_n @ tension)
    a_sum = 0.0
    t_sum = 0.0
    for j in range(ffr.vertical_dim):
        e = ffr.vertical[:, j]
        a_sum += factor.M.inner(q, np.asarray(tensor_A(factor, q, x, e)), np.asarray(tensor_A(factor, q, y, e)))
        t_sum += factor.M.inner(q, np.asarray(tensor_T(factor, q, e, x)), np.asarray(tensor_T(factor, q, e, y)))
    a_derivative = _a_derivative_trace(factor, q, x, y, ffr.vertical)
    warp = _warp_terms(phi, p, stamp.laplacian)
    f = warp["f"]
    terms = {
        "range_ricci": range_ric,
        "tension_term": tension_term,
        "cross_second_fundamental": cross,
        "A_sum": a_sum,
        "T_sum": t_sum,
        "A_derivative": a_derivative,
    }
    if which == 1:
        p1 = qf
        g_base = _clairaut_on_base(phi, g, p)
        hess_g = hessian(w.base, g_base, x, y, p1)
        hess_f = hessian(w.base, w.warp, x, y, p1)
        rank = ffr.horizontal_dim
        value = (
            range_ric
            - (w.m1 - rank) * hess_g
            + a_derivative
            - t_sum
            + a_sum
            + tension_term
            - cross
            - w.m2 / f * hess_f
        )
        terms.update({"hessian_g": hess_g, "hessian_f": hess_f})
    else:
        coefficient = warp["laplacian_f"] / f - (w.m2 - 1) * warp["grad_f_sq"] / f ** 2
        value = range_ric + tension_term + a_sum - cross + a_derivative + coefficient * phi.M.inner(p, X, Y)
        terms["warp_coefficient"] = coefficient
    note = "(nabla phi_*)(Z, e_a) read for the bare (Z, e_a) factor; tension summed over a horizontal frame"
    return value, terms, note


def _ricci_horizontal_base(phi, p, X, Y, g, stamp):
    return _ricci_horizontal(phi, p, X, Y, g, 1, stamp)


def _ricci_horizontal_fiber(phi, p, X, Y, g, stamp):
    return _ricci_horizontal(phi, p, X, Y, g, 2, stamp)


_RICCI_EVALUATORS: Dict[str, Callable] = {
    "vertical-base": _ricci_vertical_base,
    "vertical-fiber": _ricci_vertical_fiber,
    "horizontal-base": _ricci_horizontal_base,
    "horizontal-fiber": _ricci_horizontal_fiber,
}


def default_ricci_vectors(phi: ProductRiemannianMap, item: str, point) -> Tuple[np.ndarray, np.ndarray]:
    p = phi.M.require_domain(point)
    which = 1 if item.endswith("base") else 2
    _, _, ffr = _factor_frames(phi, which, p)
    basis = ffr.vertical if item.startswith("vertical") else ffr.horizontal
    if basis.shape[1] == 0:
        kind = "vertical" if item.startswith("vertical") else "horizontal"
        raise NotComputable(f"ricci:{item}: factor {which} has no {kind} directions")
    v = _lift(phi, which, basis[:, 0])
    return v, v


def ricci_item(
    phi: ProductRiemannianMap,
    item: str,
    point,
    g: Optional[ScalarField] = None,
    vectors: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
    stamp: Optional[ConventionStamp] = None,
) -> CurvatureReport:
    """
    Closed-form Ricci curvature of a typed pair, evaluated termwise, against
    the oracle Ricci tensor of the source

    Items:
        vertical-base     U1, V1 vertical for phi1
        vertical-fiber    U2, V2 vertical for phi2
        horizontal-base   Y1, Z1 horizontal for phi1
        horizontal-fiber  Y2, Z2 horizontal for phi2
    """
    if item not in RICCI_ITEMS:
        raise KeyError(f"Unknown Ricci item: {item}")
    stamp = ConventionStamp(**vars(stamp)) if stamp is not None else ConventionStamp()
    name = f"ricci:{item}"
    M = phi.M
    p = M.require_domain(point)
    g = g if g is not None else phi.clairaut_function()
    try:
        if vectors is None:
            X, Y = default_ricci_vectors(phi, item, p)
        else:
            X, Y = (np.asarray(v, dtype=float) for v in vectors)
        oracle = ricci(M, p, X, Y)
        value, terms, note = _RICCI_EVALUATORS[item](phi, p, X, Y, g, stamp)
    except NotComputable as e:
        return _not_computable(name, p, str(e), stamp)
    return CurvatureReport(
        item=name,
        point=p.tolist(),
        vectors=[X.tolist(), Y.tolist()],
        oracle=oracle,
        closed_form=float(value),
        residual=float(abs(oracle - value)),
        stamp=stamp,
        terms=terms,
        note=note,
    )


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------

def calibrate_laplacian(phi: Optional[ProductRiemannianMap] = None, point=None) -> Tuple[str, Dict[str, float]]:
    """
    Pick the Laplacian sign that reproduces the oracle for the vertical-fiber
    Ricci item; defaults to pi1 on the hyperbolic 3-space model at the origin.
    """
    if phi is None:
        from .catalog import ManifoldCatalog, projection_map

        phi = projection_map("pi1", ManifoldCatalog().warped_product("h3_model"))
    point = np.zeros(phi.M.dim) if point is None else np.asarray(point, dtype=float)
    residuals = {}
    for convention in (LAPLACIAN_MINUS, LAPLACIAN_PLUS):
        report = ricci_item(phi, "vertical-fiber", point, stamp=ConventionStamp(laplacian=convention))
        residuals[convention] = report.residual if report.residual is not None else np.inf
    chosen = min((LAPLACIAN_MINUS, LAPLACIAN_PLUS), key=lambda c: residuals[c])
    logger.info(f"Laplacian calibration selected '{chosen}' (residuals {residuals})")
    return chosen, residuals


def select_orientation(reports: Sequence[CurvatureReport], item: str) -> Optional[str]:
    """One orientation per item across all points: smallest worst-case residual, ties in listed order"""
    computable = [r for r in reports if r.computable and r.candidates]
    if not computable:
        return None
    orientations = [o for o in SECTIONAL_ORIENTATIONS[item] if all(o in r.candidates for r in computable)]
    if not orientations:
        orientations = [o for o in SECTIONAL_ORIENTATIONS[item] if o in computable[0].candidates]
    worst = {o: max(r.candidates[o]["residual"] for r in computable if o in r.candidates) for o in orientations}
    chosen = min(orientations, key=lambda o: worst[o])
    for r in computable:
        if chosen in r.candidates:
            r.apply_orientation(chosen)
    return chosen
