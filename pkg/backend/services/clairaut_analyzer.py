"""
Clairaut invariant e^{g(gamma)} sin(omega) along geodesics, the angle
identity it rests on, and the umbilical-fiber criterion for product maps.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .errors import NoFibers, WarpLabError
from .geodesic_engine import DEFAULT_STRIDE, GeodesicTrace, decompose, integrate, interior_indices
from .manifold_core import ScalarField, gradient
from .riemannian_map import ProductRiemannianMap, tensor_A, tensor_T, totally_geodesic_residual, umbilical_residual
from .warped_product import WarpedProduct

logger = logging.getLogger(__name__)

CONDITION_TOLERANCE = 1e-4
DRIFT_TOLERANCE = 1e-4
INCONSISTENCY_FACTOR = 10.0
AUTO = "auto"


@dataclass
class InvariantSeries:
    values: np.ndarray
    initial: float
    drift_abs: float
    drift_rel: float

    @property
    def drift(self) -> float:
        """Relative drift, absolute when the initial value vanishes"""
        return self.drift_rel if self.initial > 0.0 else self.drift_abs


@dataclass
class LaunchResult:
    index: int
    point: List[float]
    velocity: List[float]
    samples: int = 0
    initial: Optional[float] = None
    drift: Optional[float] = None
    exit_reason: Optional[str] = None
    error: Optional[str] = None


@dataclass
class ClairautReport:
    clairaut_g: str
    condition_residuals: List[float] = field(default_factory=list)
    umbilical_residual: Optional[float] = None
    totally_geodesic_residual: Optional[float] = None
    verdict: Optional[bool] = None
    launches: List[LaunchResult] = field(default_factory=list)
    tolerance: float = CONDITION_TOLERANCE
    drift_tolerance: float = DRIFT_TOLERANCE

    @property
    def max_condition_residual(self) -> float:
        return max(self.condition_residuals) if self.condition_residuals else 0.0

    @property
    def max_drift(self) -> float:
        drifts = [r.drift for r in self.launches if r.drift is not None]
        return max(drifts) if drifts else 0.0

    @property
    def failures(self) -> List[LaunchResult]:
        return [r for r in self.launches if r.error is not None]

    @property
    def drifts_small(self) -> bool:
        return self.max_drift <= self.drift_tolerance

    @property
    def consistent(self) -> bool:
        """Verdict and drift agree: small drift when true, visible drift when false"""
        if self.verdict:
            return self.drifts_small
        return self.max_drift >= INCONSISTENCY_FACTOR * self.drift_tolerance

    @property
    def passed(self) -> bool:
        return bool(self.verdict) and self.drifts_small and not self.failures

    def to_dict(self) -> Dict[str, Any]:
        return {
            "clairaut_g": self.clairaut_g,
            "max_condition_residual": self.max_condition_residual,
            "umbilical_residual": self.umbilical_residual,
            "totally_geodesic_residual": self.totally_geodesic_residual,
            "verdict": self.verdict,
            "max_drift": self.max_drift,
            "consistent": self.consistent,
            "passed": self.passed,
            "launches": [vars(r) for r in self.launches],
        }


def resolve_clairaut_function(source: WarpedProduct, spec, phi: Optional[ProductRiemannianMap] = None) -> ScalarField:
    """'auto' means the map's hinted function or ln f pulled back from the base; otherwise an expression in product coordinates"""
    from .expression_parser import coordinate_names, parse

    if isinstance(spec, ScalarField):
        return spec
    if spec is None or str(spec).strip() == AUTO:
        if phi is not None:
            return phi.clairaut_function()
        return source.log_warp()
    expr = parse(str(spec), coordinate_names(1, source.dim))
    return ScalarField.from_expression(expr)


def invariant_series(trace: GeodesicTrace, g: ScalarField, phi: Optional[ProductRiemannianMap] = None) -> InvariantSeries:
    if not trace.decomposed:
        if phi is None:
            raise ValueError("Trace must be decomposed before computing the invariant")
        trace = decompose(phi, trace)
    sin_omega = np.clip(np.sin(trace.omega), 0.0, 1.0)
    values = np.array([math.exp(g(p)) for p in trace.points]) * sin_omega
    initial = float(values[0])
    drift_abs = float(np.max(np.abs(values - initial)))
    drift_rel = drift_abs / initial if initial > 0.0 else drift_abs
    return InvariantSeries(values=values, initial=initial, drift_abs=drift_abs, drift_rel=drift_rel)


def angle_identity_check(
    phi: ProductRiemannianMap, trace: GeodesicTrace, stride: int = DEFAULT_STRIDE
) -> Dict[str, np.ndarray]:
    """
    g(T(U,U) + A(Y,U), Y) against b cos(omega) sin(omega) d(omega)/dt at
    interior samples of a geodesic.

    The right side is taken as (b/2) d(sin^2 omega)/dt by centered
    differences; omega itself has a corner where Y changes sign.
    """
    if not trace.decomposed:
        trace = decompose(phi, trace)
    M = phi.M
    b = trace.speed
    indices = interior_indices(trace, stride)
    lhs, rhs = [], []
    for k in indices:
        p = trace.points[k]
        u = trace.vertical[k]
        y = trace.horizontal[k]
        combined = np.asarray(tensor_T(phi, p, u, u)) + np.asarray(tensor_A(phi, p, y, u))
        lhs.append(M.inner(p, combined, y))
        d_sin_sq = (math.sin(trace.omega[k + 1]) ** 2 - math.sin(trace.omega[k - 1]) ** 2) / (2.0 * trace.dt)
        rhs.append(0.5 * b[k] * d_sin_sq)
    lhs_arr = np.asarray(lhs)
    rhs_arr = np.asarray(rhs)
    return {
        "index": np.asarray(indices, dtype=int),
        "lhs": lhs_arr,
        "rhs": rhs_arr,
        "residual": np.abs(lhs_arr - rhs_arr),
    }


def clairaut_condition_check(
    phi: ProductRiemannianMap,
    g: ScalarField,
    rng: Optional[np.random.Generator] = None,
    samples: int = 20,
    tolerance: float = CONDITION_TOLERANCE,
) -> ClairautReport:
    """
    Sample |T(U,U) + g(U,U) grad g| over random unit vertical U, plus the
    intrinsic umbilical residual of the first factor map and the totally
    geodesic residual of the second; verdict is true iff all are within
    tolerance.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    M = phi.M
    points = M.sample_points(samples, rng)
    if phi.frame(points[0]).vertical_dim == 0:
        raise NoFibers(f"{phi.name} has no fibers; the Clairaut condition needs dim ker phi_* >= 1")

    report = ClairautReport(clairaut_g=g.label, tolerance=tolerance)
    for p in points:
        fr = phi.frame(p)
        coefficients = rng.normal(size=fr.vertical_dim)
        u = fr.vertical @ (coefficients / np.linalg.norm(coefficients))
        grad_g = np.asarray(gradient(M, g, p))
        residual = np.asarray(tensor_T(phi, p, u, u)) + M.inner(p, u, u) * grad_g
        report.condition_residuals.append(M.norm(p, residual))

    first = phi.factor_map(1)
    second = phi.factor_map(2)
    umbilical, geodesic = [], []
    for p in points[: max(1, samples // 4)]:
        p1, p2 = phi.source.split_point(p)
        q1 = first.source.join_point(p1, np.zeros(0))
        q2 = second.source.join_point(p2, np.zeros(0))
        if first.M.dim and first.frame(q1).vertical_dim:
            umbilical.append(umbilical_residual(first, q1))
        if second.M.dim:
            geodesic.append(totally_geodesic_residual(second, q2))
    report.umbilical_residual = max(umbilical) if umbilical else None
    report.totally_geodesic_residual = max(geodesic) if geodesic else None

    bounded = [report.max_condition_residual]
    bounded += [r for r in (report.umbilical_residual, report.totally_geodesic_residual) if r is not None]
    report.verdict = all(r <= tolerance for r in bounded)
    logger.info(
        f"Clairaut condition on {phi.name} with g={g.label}: max residual "
        f"{report.max_condition_residual:.3e}, verdict {report.verdict}"
    )
    return report


def oblique_launches(
    phi: ProductRiemannianMap,
    count: int = 10,
    center: Optional[Sequence[float]] = None,
    spread: float = 0.1,
    omega_range: Tuple[float, float] = (0.3, 1.3),
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    Launch family: unit-speed launches at angles omega in omega_range
    between a horizontal and a vertical unit vector, from points spread along
    the first coordinate around the center of the chart box.
    """
    M = phi.M
    lower = np.asarray(M.lower, dtype=float)
    upper = np.asarray(M.upper, dtype=float)
    base_point = np.asarray(center, dtype=float) if center is not None else 0.5 * (lower + upper)
    launches = []
    offsets = np.linspace(-spread, spread, count) if count > 1 else np.zeros(1)
    omegas = np.linspace(omega_range[0], omega_range[1], count) if count > 1 else np.array([omega_range[0]])
    for offset, omega in zip(offsets, omegas):
        p = base_point.copy()
        p[0] += offset
        fr = phi.frame(p)
        if fr.vertical_dim == 0 or fr.horizontal_dim == 0:
            raise NoFibers(f"{phi.name} needs both vertical and horizontal directions for oblique launches")
        v = math.cos(omega) * fr.horizontal[:, 0] + math.sin(omega) * fr.vertical[:, 0]
        launches.append((p, v))
    return launches


def geodesic_sweep(
    phi: ProductRiemannianMap,
    g: ScalarField,
    launches: Sequence[Tuple[Sequence[float], Sequence[float]]],
    t_end: float = 10.0,
    dt: float = 1e-3,
    report: Optional[ClairautReport] = None,
    drift_tolerance: float = DRIFT_TOLERANCE,
    traces: Optional[List[GeodesicTrace]] = None,
    show_progress: bool = False,
) -> ClairautReport:
    """
    Integrate every launch, record invariant drift and merge into the
    condition report. Per-launch failures are collected, never raised.
    """
    report = report if report is not None else ClairautReport(clairaut_g=g.label)
    report.drift_tolerance = drift_tolerance
    iterator = tqdm(list(enumerate(launches)), desc="Clairaut sweep", disable=not show_progress)
    for k, (p0, v0) in iterator:
        result = LaunchResult(index=k, point=[float(x) for x in p0], velocity=[float(x) for x in v0])
        try:
            trace = traces[k] if traces is not None else integrate(phi.M, p0, v0, t_end, dt, label=f"launch_{k}")
            trace = trace if trace.decomposed else decompose(phi, trace)
            series = invariant_series(trace, g)
            result.samples = len(trace)
            result.initial = series.initial
            result.drift = series.drift
            result.exit_reason = trace.exit_reason
        except WarpLabError as e:
            logger.error(f"Launch {k} failed: {e}")
            result.error = str(e)
        report.launches.append(result)
    logger.info(f"Clairaut sweep over {len(launches)} launches: max drift {report.max_drift:.3e}")
    return report
