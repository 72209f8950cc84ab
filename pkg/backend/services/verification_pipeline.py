"""
Runs the checks of a scenario: resolves the source and map, integrates the
launched geodesics once, dispatches the checks concurrently and merges their
results in request order.
"""

import asyncio
import time
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from .check_registry import get_check
from .clairaut_analyzer import (
    LaunchResult,
    angle_identity_check,
    clairaut_condition_check,
    geodesic_sweep,
    invariant_series,
    oblique_launches,
    resolve_clairaut_function,
)
from .curvature_lab import (
    ConventionStamp,
    bianchi_and_symmetry_check,
    calibrate_laplacian,
    ricci_item,
    sectional_item,
    select_orientation,
)
from .errors import ConfigError, WarpLabError
from .expression_parser import parse
from .geodesic_engine import (
    GeodesicTrace,
    acceleration_expansion_check,
    decompose,
    geodesic_case_residuals,
    integrate,
    sample_curve,
)
from .manifold_core import ScalarField
from .residual_evaluation import CheckResult, ResidualEvaluationService
from .riemannian_map import decomposition_check, tensor_law_check
from .scenario_loader import CASE_CHECK_PREFIX, Scenario, build_catalog, resolve
from .warped_product import verify_connection_laws
from . import settings

logger = logging.getLogger(__name__)

GEODESIC = "geodesic"
CURVE = "curve"

CASE_BOUND_SERIES = {
    "vertical": ["T_UU", "vertical_DtU"],
    "horizontal": ["A_YY", "horizontal_DtY"],
    "mixed": ["mixed_vertical", "mixed_horizontal"],
}

# (trace index, column name, sample indices or None for a full series, values)
Column = Tuple[int, str, Optional[np.ndarray], np.ndarray]


@dataclass
class TraceRecord:
    index: int
    label: str
    kind: str
    case: Optional[str] = None
    point: List[float] = field(default_factory=list)
    velocity: List[float] = field(default_factory=list)
    trace: Optional[GeodesicTrace] = None
    error: Optional[str] = None

    def summary(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "label": self.label,
            "kind": self.kind,
            "case": self.case,
            "point": self.point,
            "velocity": self.velocity,
            "samples": len(self.trace) if self.trace is not None else 0,
            "exit_reason": self.trace.exit_reason if self.trace is not None else None,
            "error": self.error,
        }


@dataclass
class RunResult:
    scenario: str
    seed: int
    source: str
    map: str
    clairaut_g: str
    results: List[CheckResult]
    summary: Dict[str, Any]
    records: List[TraceRecord]
    calibration: Optional[Dict[str, Any]] = None
    elapsed_seconds: float = 0.0

    @property
    def all_passed(self) -> bool:
        return bool(self.summary.get("all_passed"))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "source": self.source,
            "map": self.map,
            "clairaut_g": self.clairaut_g,
            "calibration": self.calibration,
            "summary": self.summary,
            "checks": [r.to_dict() for r in self.results],
            "traces": [r.summary() for r in self.records],
        }


class VerificationPipeline:
    """Scenario → traces → concurrent checks → merged report"""

    def __init__(
        self,
        scenario: Scenario,
        seed: Optional[int] = None,
        max_workers: int = settings.MAX_WORKERS,
        show_progress: bool = False,
    ):
        self.logger = logger
        self.scenario = scenario
        self.seed = seed if seed is not None else (scenario.seed if scenario.seed is not None else settings.DEFAULT_SEED)
        self.max_workers = max(1, max_workers)
        self.show_progress = show_progress
        self.evaluation = ResidualEvaluationService()

        self.catalog = build_catalog(scenario)
        self.source, self.phi = resolve(scenario, self.catalog)
        self.clairaut_g = self._resolve_g()
        self.records: List[TraceRecord] = []
        self.laplacian: Optional[str] = None
        self.calibration: Optional[Dict[str, Any]] = None

    @property
    def M(self):
        return self.phi.M

    def _resolve_g(self) -> ScalarField:
        try:
            return resolve_clairaut_function(self.source, self.scenario.clairaut.g, phi=self.phi)
        except WarpLabError as e:
            raise ConfigError(str(e), location="clairaut.g") from e

    # -- preparation ----------------------------------------------------------

    def _launch_specs(self) -> List[Tuple[str, Optional[str], np.ndarray, np.ndarray, float, float]]:
        geo = self.scenario.geodesics
        specs = []
        for k, launch in enumerate(geo.launches):
            if len(launch.point) != self.M.dim or len(launch.velocity) != self.M.dim:
                raise ConfigError(f"point and velocity need {self.M.dim} entries", location=f"geodesics.launches.{k}")
            specs.append(
                (
                    launch.label or f"launch_{k}",
                    launch.case,
                    np.asarray(launch.point, dtype=float),
                    np.asarray(launch.velocity, dtype=float),
                    launch.t_end or geo.t_end,
                    launch.dt or geo.dt,
                )
            )
        if geo.family is not None:
            family = geo.family
            if family.center is not None and len(family.center) != self.M.dim:
                raise ConfigError(f"center needs {self.M.dim} entries", location="geodesics.family.center")
            try:
                launches = oblique_launches(
                    self.phi,
                    count=family.count,
                    center=family.center,
                    spread=family.spread,
                    omega_range=(family.omega_min, family.omega_max),
                )
            except WarpLabError as e:
                raise ConfigError(str(e), location="geodesics.family") from e
            offset = len(specs)
            for j, (p, v) in enumerate(launches):
                specs.append((f"launch_{offset + j}", None, p, v, geo.t_end, geo.dt))
        return specs

    def _curve(self, coordinates: List[str]) -> Callable[[float], np.ndarray]:
        expressions = [parse(src, ["t"]) for src in coordinates]
        return lambda t: np.array([e.evaluate([t]) for e in expressions])

    def prepare(self) -> List[TraceRecord]:
        """Integrate launches and sample curves once; every check reads the same traces"""
        geo = self.scenario.geodesics
        records: List[TraceRecord] = []
        for label, case, p0, v0, t_end, dt in self._launch_specs():
            record = TraceRecord(
                index=len(records), label=label, kind=GEODESIC, case=case, point=p0.tolist(), velocity=v0.tolist()
            )
            try:
                record.trace = decompose(self.phi, integrate(self.M, p0, v0, t_end, dt, label=label))
            except WarpLabError as e:
                self.logger.error(f"Launch {label} failed: {e}")
                record.error = str(e)
            records.append(record)
        for k, spec in enumerate(geo.curves):
            if len(spec.coordinates) != self.M.dim:
                raise ConfigError(f"curve needs {self.M.dim} coordinates", location=f"geodesics.curves.{k}")
            label = spec.label or f"curve_{k}"
            record = TraceRecord(index=len(records), label=label, kind=CURVE, case=spec.case)
            try:
                trace = sample_curve(self.M, self._curve(spec.coordinates), spec.t_end or geo.t_end, spec.dt or geo.dt, label)
                record.trace = decompose(self.phi, trace)
                record.point = trace.points[0].tolist()
                record.velocity = trace.velocities[0].tolist()
            except WarpLabError as e:
                self.logger.error(f"Curve {label} failed: {e}")
                record.error = str(e)
            records.append(record)
        self.records = records
        self.logger.info(f"Prepared {len(records)} traces on {self.M.name}")

        if any(name.startswith(("ricci:", "sectional:")) for name in self.scenario.checks):
            chosen, residuals = calibrate_laplacian()
            self.laplacian = chosen
            self.calibration = {"laplacian": chosen, "residuals": residuals, "calibrated_on": "h3_model"}
        return records

    # -- helpers --------------------------------------------------------------

    def _points(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self.scenario.samples.at is not None:
            return np.array([self.M.require_domain(p) for p in self.scenario.samples.at])
        return self.M.sample_points(count, rng)

    def _traces(self, kind: Optional[str] = None, case: Optional[str] = None) -> List[TraceRecord]:
        return [
            r
            for r in self.records
            if r.trace is not None and (kind is None or r.kind == kind) and (case is None or r.case == case)
        ]

    def _failed_launches(self, kind: Optional[str] = GEODESIC) -> List[Dict[str, Any]]:
        return [{"label": r.label, "error": r.error} for r in self.records if r.error and (kind is None or r.kind == kind)]

    def _stamp(self) -> ConventionStamp:
        return ConventionStamp(laplacian=self.laplacian) if self.laplacian else ConventionStamp()

    # -- checks ---------------------------------------------------------------

    def _connection_laws(self, name, tol, rng) -> Tuple[CheckResult, List[Column]]:
        report = verify_connection_laws(self.source, self.scenario.samples.connection, rng, tol)
        residuals = {case: [value] for case, value in report.residuals.items()}
        bound = [case for case, value in report.residuals.items() if value is not None]
        return self.evaluation.evaluate(name, residuals, tol, bound=bound, details={"samples": report.samples}), []

    def _tensor_laws(self, name, tol, rng):
        points = self._points(rng, self.scenario.samples.points)
        report = tensor_law_check(self.phi, points, rng)
        residuals = {key: [value] for key, value in report.residuals.items()}
        return self.evaluation.evaluate(name, residuals, tol, details={"samples": report.samples}), []

    def _oneill_decomposition(self, name, tol, rng):
        series: Dict[str, List[Optional[float]]] = {}
        for p in self._points(rng, self.scenario.samples.points):
            report = decomposition_check(self.phi, p, rng)
            for key, value in report.residuals.items():
                series.setdefault(key, []).append(value)
        bound = [key for key, values in series.items() if any(v is not None for v in values)]
        return self.evaluation.evaluate(name, series, tol, bound=bound), []

    def _riemannian_map(self, name, tol, rng):
        values = [self.phi.isometry_residual(p) for p in self._points(rng, self.scenario.samples.points)]
        details = {"declared_riemannian": self.phi.riemannian}
        return self.evaluation.evaluate(name, {"isometry": values}, tol, details=details), []

    def _oracle_symmetries(self, name, tol, rng):
        series: Dict[str, List[float]] = {}
        for p in self._points(rng, self.scenario.samples.points):
            for key, value in bianchi_and_symmetry_check(self.M, p).items():
                series.setdefault(key, []).append(value)
        return self.evaluation.evaluate(name, series, tol), []

    def _speed(self, name, tol, rng):
        drifts = {r.label: r.trace.speed_drift for r in self._traces(GEODESIC)}
        failures = self._failed_launches()
        result = self.evaluation.evaluate(
            name, {"speed_drift": list(drifts.values())}, tol, details={"per_trace": drifts, "failures": failures}
        )
        result.passed = result.passed and not failures
        return result, []

    def _geodesic_cases(self, name, tol, rng):
        case = name[len(CASE_CHECK_PREFIX):]
        stride = self.scenario.geodesics.stride
        series: Dict[str, List[float]] = {}
        columns: List[Column] = []
        per_trace, errors = {}, []
        for record in self._traces(case=case):
            try:
                residuals = geodesic_case_residuals(self.phi, record.trace, case, stride)
            except WarpLabError as e:
                self.logger.warning(f"{name} on {record.label}: {e}")
                errors.append({"label": record.label, "error": str(e)})
                continue
            indices = residuals.pop("index")
            per_trace[record.label] = {key: float(np.max(values, initial=0.0)) for key, values in residuals.items()}
            for key, values in residuals.items():
                series.setdefault(key, []).extend(values.tolist())
                columns.append((record.index, key, indices, values))
        bound = [key for key in CASE_BOUND_SERIES[case] if key in series] or CASE_BOUND_SERIES[case][:1]
        for key in bound:
            series.setdefault(key, [])
        details = {"per_trace": per_trace, "errors": errors + self._failed_launches(None)}
        result = self.evaluation.evaluate(name, series, tol, bound=bound, details=details)
        result.passed = result.passed and not errors
        return result, columns

    def _geodesic_expansion(self, name, tol, rng):
        stride = self.scenario.geodesics.stride
        values: List[float] = []
        columns: List[Column] = []
        for record in self._traces():
            check = acceleration_expansion_check(self.source, record.trace, stride)
            values.extend(check["residual"].tolist())
            columns.append((record.index, "expansion", check["index"], check["residual"]))
        return self.evaluation.evaluate(name, {"expansion": values}, tol), columns

    def _angle_identity(self, name, tol, rng):
        stride = self.scenario.geodesics.stride
        values: List[float] = []
        columns: List[Column] = []
        for record in self._traces(GEODESIC):
            check = angle_identity_check(self.phi, record.trace, stride)
            values.extend(check["residual"].tolist())
            columns.append((record.index, "angle_identity", check["index"], check["residual"]))
        return self.evaluation.evaluate(name, {"angle_identity": values}, tol), columns

    def _clairaut(self, name, tol, rng):
        g = self.clairaut_g
        report = clairaut_condition_check(self.phi, g, rng, self.scenario.clairaut.samples, tol)
        records = self._traces(GEODESIC)
        geodesic_sweep(
            self.phi,
            g,
            [(r.point, r.velocity) for r in records],
            report=report,
            drift_tolerance=tol,
            traces=[r.trace for r in records],
            show_progress=self.show_progress,
        )
        for k, r in enumerate(report.launches):
            r.index = records[k].index
        for failure in (r for r in self.records if r.kind == GEODESIC and r.error):
            report.launches.append(
                LaunchResult(index=failure.index, point=failure.point, velocity=failure.velocity, error=failure.error)
            )
        report.launches.sort(key=lambda r: r.index)
        columns = [
            (r.index, "clairaut_invariant", None, invariant_series(r.trace, g).values) for r in records
        ]
        bounded = [report.max_condition_residual, report.max_drift]
        bounded += [v for v in (report.umbilical_residual, report.totally_geodesic_residual) if v is not None]
        result = CheckResult(
            name=name,
            passed=report.passed,
            max_residual=max(bounded),
            tolerance=tol,
            details=report.to_dict(),
        )
        self.logger.info(
            f"{name}: {'passed' if result.passed else 'FAILED'} (verdict {report.verdict}, "
            f"max drift {report.max_drift:.3e}, consistent {report.consistent})"
        )
        return result, columns

    def _sectional(self, name, tol, rng):
        item = name.split(":", 1)[1]
        spec = get_check(name)
        forced = self.scenario.curvature_orientation.get(item)
        stamp = self._stamp()
        reports = [
            sectional_item(self.phi, item, p, g=self.clairaut_g, orientation=forced, stamp=stamp)
            for p in self._points(rng, self.scenario.samples.curvature)
        ]
        chosen = forced or select_orientation(reports, item)
        return self._curvature_result(name, spec.bound, tol, reports, stamp, chosen), []

    def _ricci(self, name, tol, rng):
        item = name.split(":", 1)[1]
        spec = get_check(name)
        stamp = self._stamp()
        reports = [
            ricci_item(self.phi, item, p, g=self.clairaut_g, stamp=stamp)
            for p in self._points(rng, self.scenario.samples.curvature)
        ]
        return self._curvature_result(name, spec.bound, tol, reports, stamp, None), []

    def _curvature_result(self, name, bound, tol, reports, stamp, orientation) -> CheckResult:
        stamps = {**stamp.to_dict(), "orientation": orientation}
        residuals = [r.residual for r in reports if r.computable]
        details = {
            "reports": [r.to_dict() for r in reports],
            "not_computable": sum(1 for r in reports if not r.computable),
        }
        if bound:
            return self.evaluation.evaluate(name, {"residual": residuals}, tol, details=details, stamps=stamps)
        # report-only items: complete reports under one stamp
        consistent = all(r.stamp.orientation == orientation for r in reports if r.computable and r.candidates)
        statistics = self.evaluation.series_statistics(residuals)
        details.update({"series": {"residual": statistics}, "report_only": True, "stamp_consistent": consistent})
        return CheckResult(
            name=name, passed=consistent, max_residual=statistics["max"], tolerance=tol, details=details, stamps=stamps
        )

    _HANDLERS: Dict[str, str] = {
        "angle-identity": "_angle_identity",
        "clairaut": "_clairaut",
        "connection-laws": "_connection_laws",
        "geodesic-expansion": "_geodesic_expansion",
        "oneill-decomposition": "_oneill_decomposition",
        "oracle-symmetries": "_oracle_symmetries",
        "riemannian-map": "_riemannian_map",
        "speed": "_speed",
        "tensor-laws": "_tensor_laws",
    }

    def _handler(self, name: str):
        if name.startswith(CASE_CHECK_PREFIX):
            return self._geodesic_cases
        if name.startswith("sectional:"):
            return self._sectional
        if name.startswith("ricci:"):
            return self._ricci
        return getattr(self, self._HANDLERS[name])

    def run_check(self, name: str, rng: np.random.Generator) -> Tuple[CheckResult, List[Column]]:
        """Run one check; any exception becomes a failed result carrying the error"""
        tol = self.scenario.tolerance(name)
        self.logger.info(f"Running check {name}")
        try:
            return self._handler(name)(name, tol, rng)
        except Exception as e:
            return self.evaluation.failed(name, tol, e), []

    # -- orchestration --------------------------------------------------------

    def _merge_columns(self, columns: List[Column]) -> None:
        for index, name, sample_indices, values in columns:
            record = self.records[index]
            if sample_indices is None:
                record.trace = replace(record.trace, **{name: np.asarray(values)})
            else:
                record.trace = record.trace.with_residual(name, sample_indices, values)

    async def run(self) -> RunResult:
        start = time.time()
        self.logger.info(f"Step 1: preparing traces for scenario '{self.scenario.name}' (seed {self.seed})")
        await asyncio.to_thread(self.prepare)

        checks = self.scenario.checks
        rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(self.seed).spawn(len(checks))]
        semaphore = asyncio.Semaphore(self.max_workers)

        async def bounded(name, rng):
            async with semaphore:
                return await asyncio.to_thread(self.run_check, name, rng)

        self.logger.info(f"Step 2: running {len(checks)} checks with up to {self.max_workers} workers")
        outcomes = await asyncio.gather(*(bounded(name, rng) for name, rng in zip(checks, rngs)))

        results = []
        for result, columns in outcomes:
            results.append(result)
            self._merge_columns(columns)
        summary = self.evaluation.summarize(results)
        elapsed = time.time() - start
        self.logger.info(f"Scenario '{self.scenario.name}' finished in {elapsed:.1f}s")
        return RunResult(
            scenario=self.scenario.name,
            seed=self.seed,
            source=self.source.name,
            map=self.phi.name,
            clairaut_g=self.clairaut_g.label,
            results=results,
            summary=summary,
            records=self.records,
            calibration=self.calibration,
            elapsed_seconds=elapsed,
        )


async def run_scenario(scenario: Scenario, seed: Optional[int] = None, **kwargs) -> RunResult:
    return await VerificationPipeline(scenario, seed=seed, **kwargs).run()
