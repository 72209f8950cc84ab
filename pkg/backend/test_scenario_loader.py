#!/usr/bin/env python3
"""
Tests for scenario documents: overrides, validation and catalog resolution
"""

import pytest

from services.check_registry import CHECKS, describe_check, get_check, list_checks
from services.errors import ConfigError, UnknownCheck
from services.scenario_loader import (
    apply_overrides,
    build_catalog,
    load_scenario,
    parse_override,
    resolve,
    validate,
)

SPHERE_SOURCE = {"warped_product": "sphere_model"}
LAUNCH = {"point": [1.5707963267948966, 0.0], "velocity": [0.0, 1.0]}


def document(**overrides):
    doc = {
        "name": "test",
        "checks": ["speed"],
        "source": dict(SPHERE_SOURCE),
        "map": {"preset": "pi1"},
        "geodesics": {"launches": [dict(LAUNCH)]},
    }
    doc.update(overrides)
    return doc


def config_error(doc) -> ConfigError:
    with pytest.raises(ConfigError) as info:
        validate(doc)
    return info.value


class TestOverrides:
    def test_values_are_read_as_toml(self):
        assert parse_override("geodesics.t_end=2.5") == (["geodesics", "t_end"], 2.5)
        assert parse_override("checks=[\"speed\", \"clairaut\"]") == (["checks"], ["speed", "clairaut"])
        assert parse_override("output.traces=false") == (["output", "traces"], False)

    def test_bare_words_are_strings(self):
        assert parse_override("clairaut.g=auto") == (["clairaut", "g"], "auto")
        assert parse_override("source.warp=cosh(x1)") == (["source", "warp"], "cosh(x1)")

    def test_malformed(self):
        with pytest.raises(ConfigError):
            parse_override("geodesics.t_end")
        with pytest.raises(ConfigError):
            parse_override("geodesics..t_end=1")

    def test_apply_creates_tables(self):
        doc = apply_overrides({"name": "x"}, ["geodesics.family.count=3", "seed=7"])
        assert doc == {"name": "x", "geodesics": {"family": {"count": 3}}, "seed": 7}

    def test_cannot_descend_into_a_value(self):
        with pytest.raises(ConfigError) as info:
            apply_overrides({"name": "x"}, ["name.first=1"])
        assert info.value.location == "name"


class TestValidation:
    def test_defaults(self):
        scenario = validate(document())
        assert scenario.seed is None
        assert scenario.geodesics.dt == 1e-3
        assert scenario.clairaut.g == "auto"
        assert scenario.tolerance("speed") == CHECKS["speed"].tolerance
        assert scenario.needs_map is False

    def test_tolerance_override(self):
        scenario = validate(document(tolerances={"speed": 1e-3}))
        assert scenario.tolerance("speed") == 1e-3

    def test_duplicate_checks_collapse(self):
        assert validate(document(checks=["speed", "speed"])).checks == ["speed"]

    def test_numeric_warp_becomes_expression(self):
        scenario = validate(document(source={"base": "line", "fiber": "line", "warp": 2}))
        assert scenario.source.warp == "2"

    def test_unknown_key(self):
        error = config_error(document(bogus=1))
        assert error.location == "bogus"

    def test_unknown_check(self):
        error = config_error(document(checks=["nope"]))
        assert error.location == "checks"
        assert "nope" in str(error)

    def test_aliases_are_canonicalized(self):
        scenario = validate(document(checks=["thm32", "clairaut", "eq3"], tolerances={"thm32": 1e-3}))
        assert scenario.checks == ["clairaut", "geodesic-expansion"]
        assert scenario.tolerance("clairaut") == 1e-3
        assert scenario.tolerance("eq3") == CHECKS["geodesic-expansion"].tolerance

    def test_empty_checks(self):
        assert config_error(document(checks=[])).location == "checks"

    def test_nested_location(self):
        launch = dict(LAUNCH, case="sideways")
        error = config_error(document(geodesics={"launches": [launch]}))
        assert error.location == "geodesics.launches.0.case"

    def test_bad_curve_expression(self):
        error = config_error(document(geodesics={"curves": [{"coordinates": ["t +", "t"]}]}))
        assert error.location.startswith("geodesics.curves.0")

    def test_projection_needs_source(self):
        doc = document()
        del doc["source"]
        assert config_error(doc).location == "<root>"

    def test_standalone_map_rejects_source(self):
        error = config_error(document(checks=["tensor-laws"], map={"preset": "heisenberg_submersion"}))
        assert "source" in str(error)

    def test_source_forms_are_exclusive(self):
        error = config_error(document(source={"warped_product": "h3_model", "base": "line"}))
        assert error.location == "source"

    def test_geodesic_checks_need_launches(self):
        assert "geodesics" in str(config_error(document(geodesics={})))

    def test_case_checks_need_a_matching_launch(self):
        error = config_error(document(checks=["geodesic-cases:vertical"]))
        assert "case" in str(error)

    def test_non_positive_tolerance(self):
        assert config_error(document(tolerances={"speed": 0.0})).location == "tolerances"

    def test_unknown_orientation(self):
        error = config_error(document(curvature_orientation={"base-mixed": "sideways"}))
        assert error.location == "curvature_orientation"


class TestLoad:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_scenario(tmp_path / "missing.scenario")

    def test_invalid_toml(self, tmp_path):
        path = tmp_path / "broken.scenario"
        path.write_text("name = \n")
        with pytest.raises(ConfigError):
            load_scenario(path)

    def test_bundled_scenarios_load(self, scenario_dir):
        names = sorted(p.stem for p in scenario_dir.glob("*.scenario"))
        assert names == ["cosh_curvature", "h3_curvature", "heisenberg", "negative_control", "sphere_cases", "sphere_clairaut"]
        for path in scenario_dir.glob("*.scenario"):
            assert load_scenario(path).name == path.stem

    def test_overrides_apply_before_validation(self, scenario_dir):
        scenario = load_scenario(scenario_dir / "sphere_clairaut.scenario", ["geodesics.t_end=1.5", "seed=3"])
        assert scenario.geodesics.t_end == 1.5
        assert scenario.seed == 3


class TestResolve:
    def resolved(self, doc):
        scenario = validate(doc)
        return resolve(scenario, build_catalog(scenario))

    def test_preset_and_projection(self):
        source, phi = self.resolved(document())
        assert source.name == "sphere_model"
        assert phi.name == "pi1"

    def test_standalone_map(self):
        source, phi = self.resolved(
            {"checks": ["tensor-laws"], "map": {"preset": "heisenberg_submersion"}}
        )
        assert source.name == "heisenberg"
        assert phi.target.dim == 2

    def test_inline_manifold(self):
        doc = document(
            manifolds=[{"name": "cone", "dim": 1, "lower": [0.1], "upper": [5.0], "metric": [["1"]]}],
            source={"base": "cone", "fiber": "circle", "warp": "x1"},
        )
        doc["geodesics"] = {"launches": [{"point": [1.0, 0.0], "velocity": [0.0, 1.0]}]}
        source, _ = self.resolved(doc)
        assert source.base.name == "cone"
        assert source.warp_at([2.0, 0.0]) == 2.0

    @pytest.mark.parametrize(
        "source, location",
        [
            ({"warped_product": "nowhere"}, "source.warped_product"),
            ({"base": "nowhere", "fiber": "line"}, "source.base"),
            ({"base": "line", "fiber": "nowhere"}, "source.fiber"),
            ({"base": "line", "fiber": "line", "warp": "x1"}, "source.warp"),
        ],
    )
    def test_resolution_errors(self, source, location):
        with pytest.raises(ConfigError) as info:
            self.resolved(document(source=source))
        assert info.value.location == location

    def test_unknown_map_preset(self):
        with pytest.raises(ConfigError) as info:
            self.resolved(document(map={"preset": "nowhere"}))
        assert info.value.location == "map.preset"


class TestCheckRegistry:
    def test_names_are_sorted(self):
        names = list_checks()
        assert names == sorted(names)
        assert "sectional:fiber-plane" in names
        assert "geodesic-cases:mixed" in names

    def test_bound_and_report_only_items(self):
        assert get_check("sectional:fiber-plane").bound
        assert get_check("ricci:vertical-fiber").bound
        assert not get_check("sectional:base-fibers").bound

    def test_describe(self):
        text = describe_check("clairaut")
        assert text.startswith("clairaut: ")
        assert "tolerance: 0.0001" in text
        assert "(report only)" in describe_check("ricci:horizontal-base")

    def test_aliases_resolve(self):
        assert get_check("thm32").name == "clairaut"
        assert get_check("thm31:mixed").name == "geodesic-cases:mixed"
        assert get_check("thm34:2") is get_check("thm34:fiber-plane") is CHECKS["sectional:fiber-plane"]
        assert get_check("thm33:4").name == "ricci:horizontal-fiber"
        assert get_check("lemma22").name == "connection-laws"

    def test_describe_lists_aliases(self):
        text = describe_check("eqAT")
        assert text.startswith("angle-identity: ")
        assert "aliases:   eqAT" in text
        assert "thm34:6" in describe_check("sectional:fiber-mixed")

    def test_isometry_tolerance(self):
        assert get_check("riemannian-map").tolerance == 1e-4
        assert get_check("speed").tolerance == 1e-6

    def test_unknown_check(self):
        with pytest.raises(UnknownCheck) as info:
            get_check("nope")
        assert str(info.value) == "Unknown check: nope"
