"""
Names, descriptions and default tolerances of every verification check a
scenario can request.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

from .curvature_lab import BOUND_ITEMS, ITEM_TOLERANCE, RICCI_ITEMS, SECTIONAL_ITEMS
from .errors import UnknownCheck

logger = logging.getLogger(__name__)

# what a check consumes from a scenario
NEEDS_MAP = "map"
NEEDS_TRACES = "traces"
NEEDS_GEODESICS = "geodesics"


@dataclass(frozen=True)
class CheckSpec:
    name: str
    summary: str
    verifies: str
    tolerance: float
    needs: Tuple[str, ...] = ()
    bound: bool = True


_BASE_CHECKS = (
    CheckSpec(
        "angle-identity",
        "Angle identity along geodesics",
        "g(T(U,U) + A(Y,U), Y) = b cos(omega) sin(omega) d(omega)/dt at interior samples of every "
        "geodesic; the identity behind the Clairaut characterization of product maps.",
        1e-3,
        (NEEDS_MAP, NEEDS_GEODESICS),
    ),
    CheckSpec(
        "clairaut",
        "Clairaut characterization",
        "T(U,U) = -g(U,U) grad g for random unit vertical U, umbilical fibers of the first factor map, "
        "totally geodesic fibers of the second, and drift of e^(g o gamma) sin(omega) over the launched "
        "geodesics.",
        1e-4,
        (NEEDS_MAP, NEEDS_GEODESICS),
    ),
    CheckSpec(
        "connection-laws",
        "Warped-product connection laws",
        "Closed-form Levi-Civita connection of M1 x_f M2 on lifted base and fiber fields (base-base, "
        "base-fiber, fiber-base and fiber-fiber) against the Christoffel symbols of the product metric.",
        1e-4,
    ),
    CheckSpec(
        "geodesic-expansion",
        "Acceleration expansion along curves",
        "D_t gamma' of the product against its factor expansion with the 2 (X1(f)/f) X2 and "
        "-g(X2,X2) grad ln f coupling terms; holds for arbitrary curves.",
        1e-3,
        (NEEDS_TRACES,),
    ),
    CheckSpec(
        "oneill-decomposition",
        "O'Neill connection splittings",
        "nabla_V W, nabla_V X, nabla_X V and nabla_X Y split into T or A plus a projected connection, and "
        "H nabla_V X = A_X V for basic X.",
        1e-4,
        (NEEDS_MAP,),
    ),
    CheckSpec(
        "oracle-symmetries",
        "Riemann tensor symmetries",
        "Antisymmetry in each index pair, pair symmetry and the first Bianchi identity of the "
        "finite-difference Riemann tensor.",
        1e-4,
    ),
    CheckSpec(
        "riemannian-map",
        "Riemannian map isometry",
        "phi_* restricted to the horizontal space is a linear isometry onto its image.",
        1e-4,
        (NEEDS_MAP,),
    ),
    CheckSpec(
        "speed",
        "Geodesic speed conservation",
        "Relative drift of b = g(gamma', gamma') along every launched geodesic.",
        1e-6,
        (NEEDS_GEODESICS,),
    ),
    CheckSpec(
        "tensor-laws",
        "O'Neill tensor algebra",
        "T symmetric on vertical pairs, A antisymmetric on horizontal pairs, both reverse the "
        "distributions, T_E and A_E are skew and T_E = T_VE, A_E = A_HE.",
        1e-4,
        (NEEDS_MAP,),
    ),
)

_CASE_DESCRIPTIONS = {
    "vertical": "T(U,U) = 0 and V D_t U = 0 along a geodesic with horizontal part zero.",
    "horizontal": "A(Y,Y) = 0 and H D_t Y = 0 along a geodesic with vertical part zero.",
    "mixed": "V D_t U + T(U,Y) + A(Y,Y) = 0 and T(U,U) + H D_t Y + A(Y,U) = 0 along a geodesic with "
    "both parts nonzero; A(Y,Y) is reported as a separate column.",
}

_SECTIONAL_DESCRIPTIONS = {
    "base-fibers": "vertical plane of the map against the intrinsic fiber curvature and |grad g|^2",
    "fiber-plane": "fiber factor plane against (sec2 - |grad f|^2) / f^2",
    "base-horizontal": "horizontal plane of the first factor map against target curvature and the "
    "second fundamental form",
    "base-mixed": "vertical U and base-horizontal Y against Hess g, (Y g)^2 and |A_Y U|^2",
    "fiber-horizontal": "horizontal plane of the second factor map, warped by f",
    "fiber-mixed": "-(|A_Y U|^2 + |grad f|^2) / (f^2 |U|^2 |Y|^2) on the second factor",
}

_RICCI_DESCRIPTIONS = {
    "vertical-base": "Ric(U1, V1) for vertical vectors of the first factor map, with (m2/f) Hess f",
    "vertical-fiber": "Ric(U2, V2) for vertical vectors of the second factor map, with "
    "Delta f / f - (m2 - 1) |grad f|^2 / f^2",
    "horizontal-base": "Ric(Y1, Z1) for horizontal vectors of the first factor map",
    "horizontal-fiber": "Ric(Y2, Z2) for horizontal vectors of the second factor map",
}


def _build_registry() -> Dict[str, CheckSpec]:
    registry = {spec.name: spec for spec in _BASE_CHECKS}
    for case, text in _CASE_DESCRIPTIONS.items():
        name = f"geodesic-cases:{case}"
        registry[name] = CheckSpec(name, f"Geodesic conditions, {case} case", text, 1e-3, (NEEDS_MAP, NEEDS_TRACES))
    for item in SECTIONAL_ITEMS:
        name = f"sectional:{item}"
        bound = name in BOUND_ITEMS
        registry[name] = CheckSpec(
            name,
            f"Sectional curvature, {item}",
            f"Oracle sectional curvature of the {_SECTIONAL_DESCRIPTIONS[item]}."
            + ("" if bound else " Reported under every orientation; one stamp per run."),
            ITEM_TOLERANCE,
            (NEEDS_MAP,),
            bound,
        )
    for item in RICCI_ITEMS:
        name = f"ricci:{item}"
        bound = name in BOUND_ITEMS
        registry[name] = CheckSpec(
            name,
            f"Ricci curvature, {item}",
            f"Oracle Ricci curvature against {_RICCI_DESCRIPTIONS[item]}."
            + ("" if bound else " Reported termwise, not bound by the tolerance."),
            ITEM_TOLERANCE,
            (NEEDS_MAP,),
            bound,
        )
    return dict(sorted(registry.items()))


CHECKS: Dict[str, CheckSpec] = _build_registry()


def _build_aliases() -> Dict[str, str]:
    aliases = {
        "eq3": "geodesic-expansion",
        "eqAT": "angle-identity",
        "lemma21": "oneill-decomposition",
        "lemma22": "connection-laws",
        "thm32": "clairaut",
    }
    for case in _CASE_DESCRIPTIONS:
        aliases[f"thm31:{case}"] = f"geodesic-cases:{case}"
    # items are addressed by name or by their 1-based position
    for prefix, family, items in (("thm33", "ricci", RICCI_ITEMS), ("thm34", "sectional", SECTIONAL_ITEMS)):
        for k, item in enumerate(items, start=1):
            aliases[f"{prefix}:{item}"] = f"{family}:{item}"
            aliases[f"{prefix}:{k}"] = f"{family}:{item}"
    return aliases


# short names accepted wherever a check name is
ALIASES: Dict[str, str] = _build_aliases()


def canonical_name(name: str) -> str:
    return ALIASES.get(name, name)


def aliases_of(name: str) -> List[str]:
    return sorted(alias for alias, target in ALIASES.items() if target == name)


def get_check(name: str) -> CheckSpec:
    try:
        return CHECKS[canonical_name(name)]
    except KeyError:
        raise UnknownCheck(name) from None


def list_checks() -> List[str]:
    return list(CHECKS)


def describe_check(name: str) -> str:
    spec = get_check(name)
    lines = [
        f"{spec.name}: {spec.summary}",
        f"  verifies:  {spec.verifies}",
        f"  tolerance: {spec.tolerance:g}" + ("" if spec.bound else " (report only)"),
    ]
    if spec.needs:
        lines.append(f"  needs:     {', '.join(spec.needs)}")
    aliases = aliases_of(spec.name)
    if aliases:
        lines.append(f"  aliases:   {', '.join(aliases)}")
    return "\n".join(lines)
