"""
Named manifolds, warped-product presets and map presets.

Built-in charts:
    line            (-20, 20)
    circle          (-100, 100), unwrapped angle
    euclidean:<n>   (-100, 100)^n
    polar2          x in (0.05, 100), metric diag(1, x^2)
    sphere2         theta in (0.05, pi - 0.05), metric diag(1, sin^2 theta)
    hyperbolic2     y in (0.01, 100), metric (dx^2 + dy^2) / y^2
    heisenberg3     (-100, 100)^3, metric dx^2 + dy^2 + (dz - x dy)^2
    interval(a,b)   (a, b)
    point           0-dimensional
"""

import math
import re
import logging
import threading
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .expression_parser import coordinate_names, parse
from .manifold_core import ChartManifold
from .riemannian_map import FactorMap, ProductRiemannianMap
from .warped_product import WarpedProduct, build
from . import settings

logger = logging.getLogger(__name__)

EUCLIDEAN_PATTERN = re.compile(r"^euclidean:([1-9]\d*)$")
INTERVAL_PATTERN = re.compile(r"^interval\(\s*([^,]+?)\s*,\s*([^)]+?)\s*\)$")
SPHERE_MARGIN = 0.05


def _identity_metric(dim: int) -> Callable[[np.ndarray], np.ndarray]:
    eye = np.eye(dim)
    return lambda p: eye


def _polar_metric(p):
    return np.diag([1.0, p[0] ** 2])


def _sphere_metric(p):
    return np.diag([1.0, math.sin(p[0]) ** 2])


def _hyperbolic_metric(p):
    return np.eye(2) / p[1] ** 2


def _heisenberg_metric(p):
    x = p[0]
    return np.array([[1.0, 0.0, 0.0], [0.0, 1.0 + x * x, -x], [0.0, -x, 1.0]])


POINT = ChartManifold("point", 0, (), (), lambda p: np.zeros((0, 0)))


def line(fd_step: float = settings.FD_STEP) -> ChartManifold:
    return ChartManifold("line", 1, (-20.0,), (20.0,), _identity_metric(1), fd_step)


def circle(fd_step: float = settings.FD_STEP) -> ChartManifold:
    return ChartManifold("circle", 1, (-100.0,), (100.0,), _identity_metric(1), fd_step)


def euclidean(n: int, fd_step: float = settings.FD_STEP) -> ChartManifold:
    return ChartManifold(f"euclidean:{n}", n, (-100.0,) * n, (100.0,) * n, _identity_metric(n), fd_step)


def interval(a: float, b: float, fd_step: float = settings.FD_STEP) -> ChartManifold:
    return ChartManifold(f"interval({a:g},{b:g})", 1, (float(a),), (float(b),), _identity_metric(1), fd_step)


BUILTIN_MANIFOLDS: Dict[str, Callable[[float], ChartManifold]] = {
    "circle": circle,
    "heisenberg3": lambda h: ChartManifold("heisenberg3", 3, (-100.0,) * 3, (100.0,) * 3, _heisenberg_metric, h),
    "hyperbolic2": lambda h: ChartManifold("hyperbolic2", 2, (-100.0, 0.01), (100.0, 100.0), _hyperbolic_metric, h),
    "line": line,
    "point": lambda h: POINT,
    "polar2": lambda h: ChartManifold("polar2", 2, (0.05, -100.0), (100.0, 100.0), _polar_metric, h),
    "sphere2": lambda h: ChartManifold(
        "sphere2", 2, (SPHERE_MARGIN, -100.0), (math.pi - SPHERE_MARGIN, 100.0), _sphere_metric, h
    ),
}

PARAMETRIC_FORMS = ("euclidean:<n>", "interval(a,b)")


def _bound(text: str) -> float:
    """Interval bounds may be written as expressions such as pi-0.05"""
    return parse(text, []).evaluate([])


def inline_manifold(
    name: str,
    dim: int,
    lower: Sequence[float],
    upper: Sequence[float],
    metric: Sequence[Sequence[str]],
    fd_step: float = settings.FD_STEP,
) -> ChartManifold:
    """Chart manifold whose metric entries are expressions in x1..x<dim>"""
    names = coordinate_names(1, dim)
    if len(metric) != dim or any(len(row) != dim for row in metric):
        raise ValueError(f"Metric of {name} must be a {dim}x{dim} table of expressions")
    entries = [[parse(str(src), names) for src in row] for row in metric]

    def metric_fn(p):
        return np.array([[e.evaluate(p) for e in row] for row in entries])

    return ChartManifold(name, dim, tuple(float(x) for x in lower), tuple(float(x) for x in upper), metric_fn, fd_step)


class ManifoldCatalog:
    """Registry of chart manifolds addressable by name"""

    def __init__(self, fd_step: float = settings.FD_STEP):
        self.logger = logger
        self.fd_step = fd_step
        self._registered: Dict[str, ChartManifold] = {}
        self._lock = threading.Lock()

    def register(self, manifold: ChartManifold) -> None:
        with self._lock:
            self._registered[manifold.name] = manifold
        self.logger.debug(f"Registered manifold {manifold.name}")

    def get(self, name: str) -> ChartManifold:
        key = name.strip()
        with self._lock:
            if key in self._registered:
                return self._registered[key]
        if key in BUILTIN_MANIFOLDS:
            return BUILTIN_MANIFOLDS[key](self.fd_step)
        match = EUCLIDEAN_PATTERN.match(key)
        if match:
            return euclidean(int(match.group(1)), self.fd_step)
        match = INTERVAL_PATTERN.match(key)
        if match:
            try:
                a, b = _bound(match.group(1)), _bound(match.group(2))
            except ValueError as e:
                raise KeyError(f"Invalid interval bounds in '{key}': {e}") from e
            if not a < b:
                raise KeyError(f"Empty interval '{key}'")
            return interval(a, b, self.fd_step)
        raise KeyError(f"Unknown manifold: {key}")

    def names(self) -> List[str]:
        with self._lock:
            registered = list(self._registered)
        return sorted(set(BUILTIN_MANIFOLDS) | set(PARAMETRIC_FORMS) | set(registered))

    # -- presets ------------------------------------------------------------

    def warped_product(self, preset: str) -> WarpedProduct:
        if preset not in WARPED_PRODUCT_PRESETS:
            raise KeyError(f"Unknown warped product preset: {preset}")
        base, fiber, warp = WARPED_PRODUCT_PRESETS[preset]
        return build(self.get(base), self.get(fiber), warp, name=preset, catalog=self)

    def map_preset(self, name: str, source: Optional[WarpedProduct] = None) -> ProductRiemannianMap:
        """
        Build a named map

        Args:
            name: pi1, pi2 or identity (need a source warped product) or one of
                the standalone presets in MAP_PRESETS
            source: source warped product for pi1, pi2 and identity
        """
        if name in PROJECTION_PRESETS:
            if source is None:
                raise KeyError(f"Map '{name}' needs a source warped product")
            return projection_map(name, source)
        if name not in MAP_PRESETS:
            raise KeyError(f"Unknown map preset: {name}")
        return MAP_PRESETS[name](self)


WARPED_PRODUCT_PRESETS: Dict[str, tuple] = {
    "cosh_model": ("line", "euclidean:2", "cosh(x1)"),
    "cosh_surface": ("line", "line", "cosh(x1)"),
    "flat_product": ("line", "line", "1"),
    "h3_model": ("line", "euclidean:2", "exp(x1)"),
    "heisenberg": ("heisenberg3", "point", "1"),
    "round_sphere": ("sphere2", "point", "1"),
    "sphere_model": ("interval(0.05,pi-0.05)", "circle", "sin(x1)"),
}

PROJECTION_PRESETS = ("identity", "pi1", "pi2")


def projection_map(name: str, source: WarpedProduct) -> ProductRiemannianMap:
    """identity, pi1 = identity x collapse, pi2 = collapse x identity"""
    if name == "identity":
        return ProductRiemannianMap(
            source, source, FactorMap.identity(source.base), FactorMap.identity(source.fiber), name="identity"
        )
    if name == "pi1":
        target = build(source.base, POINT, 1.0, name=source.base.name)
        return ProductRiemannianMap(
            source, target, FactorMap.identity(source.base), FactorMap.collapse(source.fiber, POINT), name="pi1"
        )
    if name == "pi2":
        target = build(POINT, source.fiber, 1.0, name=source.fiber.name)
        # pi2 is a Riemannian map only when f is identically 1
        return ProductRiemannianMap(
            source,
            target,
            FactorMap.collapse(source.base, POINT),
            FactorMap.identity(source.fiber),
            name="pi2",
            riemannian=source.warp.label in ("1", "1.0"),
        )
    raise KeyError(f"Unknown projection: {name}")


def _h3_split(catalog: ManifoldCatalog) -> ProductRiemannianMap:
    source = catalog.warped_product("h3_model")
    target = build(catalog.get("line"), catalog.get("line"), "exp(x1)", name="line x[exp(x1)] line")
    return ProductRiemannianMap(
        source,
        target,
        FactorMap.identity(source.base),
        FactorMap.from_expressions(source.fiber, target.fiber, ["x2"]),
        name="h3_split",
    )


def _sphere_latitudes(catalog: ManifoldCatalog) -> ProductRiemannianMap:
    source = catalog.warped_product("round_sphere")
    base = catalog.get("interval(0.05,pi-0.05)")
    target = build(base, POINT, 1.0, name=base.name)
    return ProductRiemannianMap(
        source,
        target,
        FactorMap.from_expressions(source.base, base, ["x1"]),
        FactorMap.collapse(POINT, POINT),
        name="sphere_latitudes",
        clairaut_g="ln(sin(x1))",
    )


def _sphere_embedding(catalog: ManifoldCatalog) -> ProductRiemannianMap:
    source = catalog.warped_product("round_sphere")
    space = catalog.get("euclidean:3")
    target = build(space, POINT, 1.0, name=space.name)
    return ProductRiemannianMap(
        source,
        target,
        FactorMap.from_expressions(
            source.base, space, ["sin(x1)*cos(x2)", "sin(x1)*sin(x2)", "cos(x1)"]
        ),
        FactorMap.collapse(POINT, POINT),
        name="sphere_embedding",
    )


def _heisenberg_submersion(catalog: ManifoldCatalog) -> ProductRiemannianMap:
    source = catalog.warped_product("heisenberg")
    plane = catalog.get("euclidean:2")
    target = build(plane, POINT, 1.0, name=plane.name)
    return ProductRiemannianMap(
        source,
        target,
        FactorMap.from_expressions(source.base, plane, ["x1", "x2"]),
        FactorMap.collapse(POINT, POINT),
        name="heisenberg_submersion",
    )


def _graph_curve(catalog: ManifoldCatalog) -> ProductRiemannianMap:
    source = build(catalog.get("line"), POINT, 1.0, name="line")
    plane = catalog.get("euclidean:2")
    target = build(plane, POINT, 1.0, name=plane.name)
    return ProductRiemannianMap(
        source,
        target,
        FactorMap.from_expressions(source.base, plane, ["x1", "x1^2"]),
        FactorMap.collapse(POINT, POINT),
        name="graph_curve",
        riemannian=False,
    )


MAP_PRESETS: Dict[str, Callable[[ManifoldCatalog], ProductRiemannianMap]] = {
    "graph_curve": _graph_curve,
    "h3_split": _h3_split,
    "heisenberg_submersion": _heisenberg_submersion,
    "sphere_embedding": _sphere_embedding,
    "sphere_latitudes": _sphere_latitudes,
}


def list_catalog(catalog: Optional[ManifoldCatalog] = None) -> str:
    """Alphabetized listing of manifolds, warped-product presets and map presets"""
    catalog = catalog or ManifoldCatalog()
    lines = ["Manifolds:"]
    lines += [f"  {name}" for name in catalog.names()]
    lines.append("Warped products:")
    for name in sorted(WARPED_PRODUCT_PRESETS):
        base, fiber, warp = WARPED_PRODUCT_PRESETS[name]
        lines.append(f"  {name}: {base} x[{warp}] {fiber}")
    lines.append("Maps:")
    lines += [f"  {name} (on any warped product)" for name in PROJECTION_PRESETS]
    lines += [f"  {name}" for name in sorted(MAP_PRESETS)]
    return "\n".join(lines)
