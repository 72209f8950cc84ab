"""
Scenario files: TOML documents validated by pydantic models and resolved
against the manifold catalog.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import toml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .catalog import MAP_PRESETS, WARPED_PRODUCT_PRESETS, ManifoldCatalog, inline_manifold
from .check_registry import CHECKS, NEEDS_GEODESICS, NEEDS_MAP, NEEDS_TRACES, canonical_name
from .curvature_lab import SECTIONAL_ORIENTATIONS
from .errors import ConfigError, WarpLabError
from .expression_parser import parse
from .geodesic_engine import CASES, DEFAULT_DT
from .riemannian_map import ProductRiemannianMap
from .warped_product import WarpedProduct, build
from . import settings

logger = logging.getLogger(__name__)

CASE_CHECK_PREFIX = "geodesic-cases:"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _as_text(value):
    """Numbers given for expression fields (warp = 1) are read as expressions"""
    return str(value) if isinstance(value, (int, float)) and not isinstance(value, bool) else value


def _check_case(value: Optional[str]) -> Optional[str]:
    if value is not None and value not in CASES:
        raise ValueError(f"case must be one of {', '.join(CASES)}")
    return value


class InlineManifoldSpec(_Strict):
    name: str
    dim: int = Field(ge=1)
    lower: List[float]
    upper: List[float]
    metric: List[List[str]]

    @model_validator(mode="after")
    def check_shapes(self):
        if len(self.lower) != self.dim or len(self.upper) != self.dim:
            raise ValueError(f"lower and upper need {self.dim} entries")
        if any(a >= b for a, b in zip(self.lower, self.upper)):
            raise ValueError("every lower bound must be below its upper bound")
        if len(self.metric) != self.dim or any(len(row) != self.dim for row in self.metric):
            raise ValueError(f"metric must be a {self.dim}x{self.dim} table of expressions")
        return self


class SourceSpec(_Strict):
    """A warped-product preset, or base/fiber/warp given directly"""

    warped_product: Optional[str] = None
    base: Optional[str] = None
    fiber: Optional[str] = None
    warp: str = "1"

    warp_text = field_validator("warp", mode="before")(_as_text)

    @model_validator(mode="after")
    def one_form(self):
        direct = self.base is not None or self.fiber is not None
        if self.warped_product is not None and direct:
            raise ValueError("give either warped_product or base/fiber, not both")
        if self.warped_product is None and (self.base is None or self.fiber is None):
            raise ValueError("give warped_product, or both base and fiber")
        return self


class MapSpec(_Strict):
    preset: str = "identity"


class LaunchSpec(_Strict):
    point: List[float]
    velocity: List[float]
    t_end: Optional[float] = Field(default=None, gt=0)
    dt: Optional[float] = Field(default=None, gt=0)
    case: Optional[str] = None
    label: Optional[str] = None

    @field_validator("case")
    @classmethod
    def known_case(cls, value):
        return _check_case(value)


class CurveSpec(_Strict):
    """Prescribed curve, coordinates as expressions in t"""

    coordinates: List[str]
    t_end: Optional[float] = Field(default=None, gt=0)
    dt: Optional[float] = Field(default=None, gt=0)
    case: Optional[str] = None
    label: Optional[str] = None

    @field_validator("coordinates")
    @classmethod
    def parse_coordinates(cls, value):
        for src in value:
            parse(src, ["t"])
        return value

    @field_validator("case")
    @classmethod
    def known_case(cls, value):
        return _check_case(value)


class LaunchFamilySpec(_Strict):
    count: int = Field(default=10, ge=1)
    center: Optional[List[float]] = None
    spread: float = Field(default=0.1, ge=0)
    omega_min: float = 0.3
    omega_max: float = 1.3


class GeodesicsSpec(_Strict):
    t_end: float = Field(default=10.0, gt=0)
    dt: float = Field(default=DEFAULT_DT, gt=0)
    stride: int = Field(default=10, ge=1)
    launches: List[LaunchSpec] = Field(default_factory=list)
    family: Optional[LaunchFamilySpec] = None
    curves: List[CurveSpec] = Field(default_factory=list)


class ClairautSpec(_Strict):
    g: str = "auto"
    samples: int = Field(default=20, ge=1)

    g_text = field_validator("g", mode="before")(_as_text)


class SamplesSpec(_Strict):
    connection: int = Field(default=200, ge=1)
    points: int = Field(default=20, ge=1)
    curvature: int = Field(default=5, ge=1)
    at: Optional[List[List[float]]] = None


class OutputSpec(_Strict):
    dir: Optional[str] = None
    traces: bool = True


class Scenario(_Strict):
    name: str = "scenario"
    seed: Optional[int] = None
    fd_step: float = Field(default=settings.FD_STEP, gt=0)
    checks: List[str] = Field(min_length=1)
    manifolds: List[InlineManifoldSpec] = Field(default_factory=list)
    source: Optional[SourceSpec] = None
    map: MapSpec = Field(default_factory=MapSpec)
    clairaut: ClairautSpec = Field(default_factory=ClairautSpec)
    geodesics: GeodesicsSpec = Field(default_factory=GeodesicsSpec)
    samples: SamplesSpec = Field(default_factory=SamplesSpec)
    curvature_orientation: Dict[str, str] = Field(default_factory=dict)
    tolerances: Dict[str, float] = Field(default_factory=dict)
    output: OutputSpec = Field(default_factory=OutputSpec)

    @field_validator("checks")
    @classmethod
    def known_checks(cls, value):
        unknown = [name for name in value if canonical_name(name) not in CHECKS]
        if unknown:
            raise ValueError(f"unknown checks: {', '.join(unknown)}")
        return list(dict.fromkeys(canonical_name(name) for name in value))

    @field_validator("tolerances")
    @classmethod
    def positive_tolerances(cls, value):
        value = {canonical_name(name): tol for name, tol in value.items()}
        for name, tol in value.items():
            if name not in CHECKS:
                raise ValueError(f"tolerance given for unknown check '{name}'")
            if not tol > 0:
                raise ValueError(f"tolerance of '{name}' must be positive")
        return value

    @field_validator("curvature_orientation")
    @classmethod
    def known_orientations(cls, value):
        for item, orientation in value.items():
            if item not in SECTIONAL_ORIENTATIONS:
                raise ValueError(f"unknown sectional item '{item}'")
            if orientation not in SECTIONAL_ORIENTATIONS[item]:
                choices = ", ".join(SECTIONAL_ORIENTATIONS[item])
                raise ValueError(f"orientation of '{item}' must be one of {choices}")
        return value

    @model_validator(mode="after")
    def source_matches_map(self):
        if self.map.preset in MAP_PRESETS and self.source is not None:
            raise ValueError(f"map preset '{self.map.preset}' fixes its own source; remove the source table")
        if self.map.preset not in MAP_PRESETS and self.source is None:
            raise ValueError(f"map preset '{self.map.preset}' needs a source table")
        return self

    @model_validator(mode="after")
    def inputs_present(self):
        geo = self.geodesics
        has_geodesics = bool(geo.launches) or geo.family is not None
        for name in self.checks:
            needs = CHECKS[name].needs
            if NEEDS_GEODESICS in needs and not has_geodesics:
                raise ValueError(f"check '{name}' needs geodesics.launches or geodesics.family")
            if NEEDS_TRACES in needs and not (has_geodesics or geo.curves):
                raise ValueError(f"check '{name}' needs geodesics or curves")
            if name.startswith(CASE_CHECK_PREFIX):
                case = name[len(CASE_CHECK_PREFIX):]
                if not any(spec.case == case for spec in list(geo.launches) + list(geo.curves)):
                    raise ValueError(f"check '{name}' needs a launch or curve with case = \"{case}\"")
        return self

    def tolerance(self, check: str) -> float:
        check = canonical_name(check)
        return self.tolerances.get(check, CHECKS[check].tolerance)

    @property
    def needs_map(self) -> bool:
        return any(NEEDS_MAP in CHECKS[name].needs for name in self.checks)


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def _location(loc: Sequence[Any]) -> str:
    return ".".join(str(part) for part in loc) if loc else "<root>"


def parse_override(text: str) -> Tuple[List[str], Any]:
    """'a.b.c=value' with value read as TOML, falling back to a bare string"""
    if "=" not in text:
        raise ConfigError(f"override '{text}' is not of the form key=value", location="--set")
    key, raw = text.split("=", 1)
    path = [part.strip() for part in key.split(".")]
    if not all(path):
        raise ConfigError(f"empty key segment in '{key}'", location="--set")
    try:
        value = toml.loads(f"value = {raw.strip()}")["value"]
    except toml.TomlDecodeError:
        value = raw.strip()
    return path, value


def apply_overrides(document: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    for text in overrides:
        path, value = parse_override(text)
        node = document
        for depth, part in enumerate(path[:-1]):
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError("cannot set a key below a non-table value", location=".".join(path[: depth + 1]))
            node = child
        node[path[-1]] = value
        logger.debug(f"Override {'.'.join(path)} = {value!r}")
    return document


def load_document(path) -> Dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"scenario file not found: {path}")
    try:
        return toml.load(path)
    except toml.TomlDecodeError as e:
        raise ConfigError(f"not a valid scenario document: {e}", location=str(path)) from e


def validate(document: Dict[str, Any]) -> Scenario:
    try:
        return Scenario.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        message = first["msg"].removeprefix("Value error, ")
        raise ConfigError(message, location=_location(first["loc"])) from e


def load_scenario(path, overrides: Sequence[str] = ()) -> Scenario:
    document = apply_overrides(load_document(path), overrides)
    scenario = validate(document)
    logger.info(f"Loaded scenario '{scenario.name}' with {len(scenario.checks)} checks")
    return scenario


# ---------------------------------------------------------------------------
# Resolution against the catalog
# ---------------------------------------------------------------------------

def build_catalog(scenario: Scenario) -> ManifoldCatalog:
    catalog = ManifoldCatalog(fd_step=scenario.fd_step)
    for k, spec in enumerate(scenario.manifolds):
        try:
            catalog.register(inline_manifold(spec.name, spec.dim, spec.lower, spec.upper, spec.metric, scenario.fd_step))
        except (WarpLabError, ValueError) as e:
            raise ConfigError(str(e), location=f"manifolds.{k}.metric") from e
    return catalog


def _resolve_source(spec: SourceSpec, catalog: ManifoldCatalog) -> WarpedProduct:
    if spec.warped_product is not None:
        if spec.warped_product not in WARPED_PRODUCT_PRESETS:
            raise ConfigError(f"unknown warped product '{spec.warped_product}'", location="source.warped_product")
        return catalog.warped_product(spec.warped_product)
    factors = {}
    for key in ("base", "fiber"):
        try:
            factors[key] = catalog.get(getattr(spec, key))
        except KeyError as e:
            raise ConfigError(f"unknown manifold '{getattr(spec, key)}'", location=f"source.{key}") from e
    try:
        return build(factors["base"], factors["fiber"], spec.warp, catalog=catalog)
    except WarpLabError as e:
        raise ConfigError(str(e), location="source.warp") from e


def resolve(scenario: Scenario, catalog: ManifoldCatalog) -> Tuple[WarpedProduct, ProductRiemannianMap]:
    """Source warped product and map of a scenario; standalone map presets carry their own source"""
    source = _resolve_source(scenario.source, catalog) if scenario.source is not None else None
    try:
        phi = catalog.map_preset(scenario.map.preset, source)
    except KeyError as e:
        raise ConfigError(f"unknown map preset '{scenario.map.preset}'", location="map.preset") from e
    return phi.source, phi
