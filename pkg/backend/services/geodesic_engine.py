"""
Geodesic integration, curve sampling, vertical/horizontal decomposition of
velocities and the case-wise geodesic residuals of a product map.
"""

import math
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import CaseMismatch, DomainExit, InvalidLaunch, OutOfDomain, SingularMetric, StepTooLarge
from .manifold_core import ChartManifold
from .riemannian_map import ProductRiemannianMap, tensor_A, tensor_T
from .warped_product import WarpedProduct

logger = logging.getLogger(__name__)

DEFAULT_DT = 1e-3
MAX_ENERGY_DRIFT = 1e-3
CASE_MARGIN = 0.1
DEFAULT_STRIDE = 10

VERTICAL = "vertical"
HORIZONTAL = "horizontal"
MIXED = "mixed"
CASES = (VERTICAL, HORIZONTAL, MIXED)


@dataclass(frozen=True, eq=False)
class GeodesicTrace:
    manifold: ChartManifold = field(repr=False)
    times: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    dt: float
    label: str = "trace"
    exit_reason: Optional[str] = None
    vertical: Optional[np.ndarray] = None
    horizontal: Optional[np.ndarray] = None
    omega: Optional[np.ndarray] = None
    clairaut_invariant: Optional[np.ndarray] = None
    residuals: Dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def speed(self) -> np.ndarray:
        """b = g(gamma', gamma') per sample"""
        return np.array([self.manifold.inner(p, v, v) for p, v in zip(self.points, self.velocities)])

    @property
    def speed_drift(self) -> float:
        b = self.speed
        return float(np.max(np.abs(b - b[0])) / b[0]) if b[0] > 0 else 0.0

    @property
    def decomposed(self) -> bool:
        return self.omega is not None

    def with_residual(self, name: str, indices: Sequence[int], values: Sequence[float]) -> "GeodesicTrace":
        column = np.full(len(self), np.nan)
        column[np.asarray(indices, dtype=int)] = values
        residuals = dict(self.residuals)
        residuals[name] = column
        return replace(self, residuals=residuals)

    def to_frame(self) -> pd.DataFrame:
        """Columns: t, x1.., v1.., b, omega, clairaut_invariant, residual columns (sorted)"""
        dim = self.points.shape[1]
        data = {"t": self.times}
        for i in range(dim):
            data[f"x{i + 1}"] = self.points[:, i]
        for i in range(dim):
            data[f"v{i + 1}"] = self.velocities[:, i]
        nan = np.full(len(self), np.nan)
        data["b"] = self.speed
        data["omega"] = self.omega if self.omega is not None else nan
        data["clairaut_invariant"] = self.clairaut_invariant if self.clairaut_invariant is not None else nan
        for name in sorted(self.residuals):
            data[name] = self.residuals[name]
        return pd.DataFrame(data)


def _acceleration(m: ChartManifold, p: np.ndarray, v: np.ndarray) -> np.ndarray:
    return -np.einsum("kij,i,j->k", m.christoffel(p), v, v)


def integrate(
    m: ChartManifold,
    p0,
    v0,
    t_end: float,
    dt: float = DEFAULT_DT,
    label: str = "geodesic",
) -> GeodesicTrace:
    """
    Classic fixed-step RK4 on p' = v, v'^k = -Gamma^k_ij v^i v^j

    Leaving the chart box truncates the trace and sets exit_reason; relative
    energy drift above 1e-3 raises StepTooLarge.
    """
    p = m.require_domain(p0).copy()
    v = np.asarray(v0, dtype=float).copy()
    if v.shape != (m.dim,) or not np.any(v):
        raise InvalidLaunch(f"Initial velocity must be a nonzero {m.dim}-vector, got {v.tolist()}")
    if dt <= 0.0 or t_end <= 0.0:
        raise InvalidLaunch(f"dt and t_end must be positive (dt={dt}, t_end={t_end})")

    steps = int(round(t_end / dt))
    b0 = m.inner(p, v, v)
    times, points, velocities = [0.0], [p.copy()], [v.copy()]
    exit_reason = None

    for n in range(1, steps + 1):
        try:
            k1p, k1v = v, _acceleration(m, p, v)
            k2p, k2v = v + 0.5 * dt * k1v, _acceleration(m, p + 0.5 * dt * k1p, v + 0.5 * dt * k1v)
            k3p, k3v = v + 0.5 * dt * k2v, _acceleration(m, p + 0.5 * dt * k2p, v + 0.5 * dt * k2v)
            k4p, k4v = v + dt * k3v, _acceleration(m, p + dt * k3p, v + dt * k3v)
            p_next = p + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
            v_next = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            if not m.contains(p_next):
                raise OutOfDomain(m.name, p_next)
        except (OutOfDomain, SingularMetric):
            exit_error = DomainExit(n * dt, p)
            logger.warning(f"{label}: {exit_error}")
            exit_reason = str(exit_error)
            break
        p, v = p_next, v_next
        drift = abs(m.inner(p, v, v) - b0) / b0
        if drift > MAX_ENERGY_DRIFT:
            raise StepTooLarge(drift, dt)
        times.append(n * dt)
        points.append(p.copy())
        velocities.append(v.copy())

    trace = GeodesicTrace(
        manifold=m,
        times=np.array(times),
        points=np.array(points),
        velocities=np.array(velocities),
        dt=dt,
        label=label,
        exit_reason=exit_reason,
    )
    logger.debug(f"{label}: {len(trace)} samples, speed drift {trace.speed_drift:.2e}")
    return trace


def sample_curve(
    m: ChartManifold,
    curve: Callable[[float], Sequence[float]],
    t_end: float,
    dt: float = DEFAULT_DT,
    label: str = "curve",
) -> GeodesicTrace:
    """Trace of a prescribed curve; velocities by centered differences in t"""
    steps = int(round(t_end / dt))
    times = np.arange(steps + 1) * dt
    points = np.array([m.require_domain(curve(t)) for t in times])
    velocities = np.array(
        [(np.asarray(curve(t + dt), dtype=float) - np.asarray(curve(t - dt), dtype=float)) / (2.0 * dt) for t in times]
    )
    return GeodesicTrace(manifold=m, times=times, points=points, velocities=velocities, dt=dt, label=label)


def decompose(phi: ProductRiemannianMap, trace: GeodesicTrace) -> GeodesicTrace:
    """Fill U = V gamma', Y = H gamma' and the angle omega to the horizontal space"""
    vertical = np.empty_like(trace.velocities)
    horizontal = np.empty_like(trace.velocities)
    omega = np.empty(len(trace))
    for k, (p, v) in enumerate(zip(trace.points, trace.velocities)):
        Pv, _ = phi.projectors(p)
        u = Pv @ v
        y = v - u
        vertical[k] = u
        horizontal[k] = y
        omega[k] = math.atan2(phi.M.norm(p, u), phi.M.norm(p, y))
    return replace(trace, vertical=vertical, horizontal=horizontal, omega=np.clip(omega, 0.0, math.pi))


def interior_indices(trace: GeodesicTrace, stride: int = DEFAULT_STRIDE) -> List[int]:
    return list(range(1, len(trace) - 1, max(1, stride)))


def along_curve_derivative(m: ChartManifold, trace: GeodesicTrace, series: np.ndarray, k: int) -> np.ndarray:
    """D_t W at interior sample k: centered dW/dt + Gamma(gamma', W)"""
    p = trace.points[k]
    dW = (series[k + 1] - series[k - 1]) / (2.0 * trace.dt)
    return dW + np.einsum("kij,i,j->k", m.christoffel(p), trace.velocities[k], series[k])


def _require_decomposed(phi: ProductRiemannianMap, trace: GeodesicTrace) -> GeodesicTrace:
    return trace if trace.decomposed else decompose(phi, trace)


def _check_case(trace: GeodesicTrace, case: str) -> None:
    omega = trace.omega
    if case == VERTICAL and np.any(omega < math.pi / 2 - CASE_MARGIN):
        raise CaseMismatch(f"{trace.label}: vertical case requested but min omega is {omega.min():.3f}")
    if case == HORIZONTAL and np.any(omega > CASE_MARGIN):
        raise CaseMismatch(f"{trace.label}: horizontal case requested but max omega is {omega.max():.3f}")
    if case == MIXED:
        pure = (omega <= CASE_MARGIN) | (omega >= math.pi / 2 - CASE_MARGIN)
        if np.all(pure):
            raise CaseMismatch(f"{trace.label}: mixed case requested but every sample is purely vertical or horizontal")


def geodesic_case_residuals(
    phi: ProductRiemannianMap, trace: GeodesicTrace, case: str, stride: int = DEFAULT_STRIDE
) -> Dict[str, np.ndarray]:
    """
    Residual series of the geodesic conditions for a given case, g-norms.

    vertical:   |T(U,U)|, |V D_t U|
    horizontal: |A(Y,Y)|, |H D_t Y|
    mixed:      |V D_t U + T(U,Y) + A(Y,Y)|, |T(U,U) + H D_t Y + A(Y,U)|, |A(Y,Y)|
    """
    if case not in CASES:
        raise ValueError(f"Unknown geodesic case: {case}")
    trace = _require_decomposed(phi, trace)
    _check_case(trace, case)
    M = phi.M
    indices = interior_indices(trace, stride)
    series: Dict[str, List[float]] = {}

    def record(name, value):
        series.setdefault(name, []).append(value)

    for k in indices:
        p = trace.points[k]
        u = trace.vertical[k]
        y = trace.horizontal[k]
        Pv, Ph = phi.projectors(p)
        if case == VERTICAL:
            record("T_UU", M.norm(p, np.asarray(tensor_T(phi, p, u, u))))
            record("vertical_DtU", M.norm(p, Pv @ along_curve_derivative(M, trace, trace.vertical, k)))
        elif case == HORIZONTAL:
            record("A_YY", M.norm(p, np.asarray(tensor_A(phi, p, y, y))))
            record("horizontal_DtY", M.norm(p, Ph @ along_curve_derivative(M, trace, trace.horizontal, k)))
        else:
            a_yy = np.asarray(tensor_A(phi, p, y, y))
            vertical_eq = (
                Pv @ along_curve_derivative(M, trace, trace.vertical, k)
                + np.asarray(tensor_T(phi, p, u, y))
                + a_yy
            )
            horizontal_eq = (
                np.asarray(tensor_T(phi, p, u, u))
                + Ph @ along_curve_derivative(M, trace, trace.horizontal, k)
                + np.asarray(tensor_A(phi, p, y, u))
            )
            record("mixed_vertical", M.norm(p, vertical_eq))
            record("mixed_horizontal", M.norm(p, horizontal_eq))
            record("A_YY", M.norm(p, a_yy))

    result = {name: np.asarray(values) for name, values in series.items()}
    result["index"] = np.asarray(indices, dtype=int)
    return result


def acceleration_expansion_check(
    w: WarpedProduct, trace: GeodesicTrace, stride: int = 1
) -> Dict[str, np.ndarray]:
    """
    Compare the product acceleration D_t gamma' with its factor expansion

        D_t X1 (on M1) + 2 (X1(f)/f) X2 - g_M(X2, X2) grad ln f + D_t X2 (on M2)

    at interior samples; holds for any curve, geodesic or not.
    """
    M = w.manifold
    m1 = w.m1
    indices = interior_indices(trace, stride)
    base_velocities = trace.velocities[:, :m1]
    fiber_velocities = trace.velocities[:, m1:]
    residuals, brute_norms, closed_norms = [], [], []

    for k in indices:
        p = trace.points[k]
        p1, p2 = w.split_point(p)
        x1 = base_velocities[k]
        x2 = fiber_velocities[k]
        brute = along_curve_derivative(M, trace, trace.velocities, k)

        closed = np.zeros(w.dim)
        if m1:
            d_x1 = (base_velocities[k + 1] - base_velocities[k - 1]) / (2.0 * trace.dt)
            closed[:m1] = d_x1 + np.einsum("kij,i,j->k", w.base.christoffel(p1), x1, x1)
        if w.m2:
            d_x2 = (fiber_velocities[k + 1] - fiber_velocities[k - 1]) / (2.0 * trace.dt)
            closed[m1:] = d_x2 + np.einsum("kij,i,j->k", w.fiber.christoffel(p2), x2, x2)
        if m1 and w.m2:
            f = w.warp(p1)
            grad_f = w.warp_gradient(p)
            x1_f = float(grad_f @ w.base.metric_matrix(p1) @ x1)
            closed[m1:] += 2.0 * (x1_f / f) * x2
            closed[:m1] -= f ** 2 * w.fiber.inner(p2, x2, x2) * grad_f / f

        residuals.append(M.norm(p, brute - closed))
        brute_norms.append(M.norm(p, brute))
        closed_norms.append(M.norm(p, closed))

    return {
        "index": np.asarray(indices, dtype=int),
        "residual": np.asarray(residuals),
        "brute_norm": np.asarray(brute_norms),
        "closed_norm": np.asarray(closed_norms),
    }
