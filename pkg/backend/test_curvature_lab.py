#!/usr/bin/env python3
"""
Tests for the finite-difference curvature oracle and the closed-form
sectional and Ricci items
"""

import math

import numpy as np
import pytest

from services.curvature_lab import (
    GAUSS,
    LITERAL,
    ConventionStamp,
    aligned_axes,
    bianchi_and_symmetry_check,
    calibrate_laplacian,
    coordinate_slice,
    ricci,
    ricci_item,
    riemann,
    sectional,
    sectional_item,
    select_orientation,
)
from services.catalog import projection_map
from services.errors import DegeneratePlane
from services.manifold_core import LAPLACIAN_MINUS, LAPLACIAN_PLUS, ScalarField

H3_POINT = [0.5, 0.3, -0.2]
COSH_POINT = [0.4, 0.3, -0.2]


class TestOracle:
    def test_flat_space(self, catalog):
        assert np.allclose(riemann(catalog.get("euclidean:3"), [1.0, 2.0, 3.0]), 0.0, atol=1e-8)

    def test_round_sphere_is_positive(self, catalog):
        sphere = catalog.get("sphere2")
        assert sectional(sphere, [1.0, 0.0], [1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0, abs=1e-5)

    def test_hyperbolic_plane_is_negative(self, catalog):
        plane = catalog.get("hyperbolic2")
        assert sectional(plane, [0.3, 1.2], [1.0, 0.5], [-0.2, 1.0]) == pytest.approx(-1.0, abs=1e-5)

    def test_sectional_ignores_plane_basis(self, h3_model):
        m = h3_model.manifold
        X, Y = np.array([1.0, 0.2, 0.0]), np.array([0.0, 1.0, -1.0])
        assert sectional(m, H3_POINT, X, Y) == pytest.approx(sectional(m, H3_POINT, 2 * X + Y, X - Y), abs=1e-6)
        assert sectional(m, H3_POINT, X, Y) == pytest.approx(-1.0, abs=1e-5)

    def test_degenerate_plane(self, catalog):
        with pytest.raises(DegeneratePlane):
            sectional(catalog.get("sphere2"), [1.0, 0.0], [1.0, 0.0], [2.0, 0.0])

    def test_sphere_ricci(self, catalog):
        assert ricci(catalog.get("sphere2"), [math.pi / 2, 0.0], [1.0, 0.0], [1.0, 0.0]) == pytest.approx(1.0, abs=1e-5)

    @pytest.mark.parametrize("name, point", [("sphere2", [1.0, 0.5]), ("heisenberg3", [0.3, -0.4, 1.0])])
    def test_symmetries(self, catalog, name, point):
        defects = bianchi_and_symmetry_check(catalog.get(name), point)
        assert set(defects) == {"antisymmetry_first_pair", "antisymmetry_second_pair", "pair_symmetry", "first_bianchi"}
        assert max(defects.values()) < 1e-4


class TestSlices:
    def test_coordinate_slice_metric(self, h3_model):
        sub, q = coordinate_slice(h3_model.manifold, H3_POINT, [1, 2])
        assert sub.dim == 2
        assert np.array_equal(q, [0.3, -0.2])
        assert np.allclose(sub.metric_matrix(q), math.exp(1.0) * np.eye(2))

    def test_aligned_axes(self):
        assert aligned_axes(np.eye(3)[:, 1:]) == [1, 2]
        assert aligned_axes(np.array([[1.0], [1.0], [0.0]])) is None
        assert aligned_axes(np.zeros((3, 0))) == []


class TestSectionalItems:
    def test_base_fibers_on_hyperbolic_model(self, h3_pi1):
        report = sectional_item(h3_pi1, "base-fibers", H3_POINT)
        assert report.computable
        assert report.oracle == pytest.approx(-1.0, abs=1e-5)
        assert report.candidates[GAUSS]["closed_form"] == pytest.approx(-1.0, abs=1e-5)
        assert report.candidates[LITERAL]["closed_form"] == pytest.approx(1.0, abs=1e-5)
        assert report.stamp.orientation == GAUSS

    def test_fiber_plane(self, h3_pi1):
        report = sectional_item(h3_pi1, "fiber-plane", H3_POINT)
        assert report.closed_form == pytest.approx(-1.0, abs=1e-5)
        assert report.residual < 1e-3

    def test_base_mixed_on_sphere(self, sphere_pi1):
        report = sectional_item(sphere_pi1, "base-mixed", [1.0, 0.0])
        assert report.oracle == pytest.approx(1.0, abs=1e-5)
        assert report.candidates[LITERAL]["closed_form"] == pytest.approx(-1.0, abs=1e-4)
        assert report.stamp.orientation == GAUSS

    def test_forced_orientation(self, sphere_pi1):
        report = sectional_item(sphere_pi1, "base-mixed", [1.0, 0.0], orientation=LITERAL)
        assert report.stamp.orientation == LITERAL
        assert report.residual == pytest.approx(2.0, abs=1e-4)

    def test_base_horizontal_on_sphere_embedding(self, catalog):
        phi = catalog.map_preset("sphere_embedding")
        report = sectional_item(phi, "base-horizontal", [1.0, 0.3])
        assert report.oracle == pytest.approx(1.0, abs=1e-5)
        assert report.candidates[GAUSS]["closed_form"] == pytest.approx(1.0, abs=1e-4)

    def test_fiber_mixed_on_split_map(self, catalog):
        phi = catalog.map_preset("h3_split")
        report = sectional_item(phi, "fiber-mixed", H3_POINT)
        assert report.closed_form == pytest.approx(-1.0, abs=1e-5)
        assert report.residual < 1e-3

    def test_not_computable_is_reported(self, sphere_pi1):
        report = sectional_item(sphere_pi1, "base-fibers", [1.0, 0.0])
        assert not report.computable
        assert report.residual is None
        assert "dimension" in report.note

    def test_unknown_item(self, sphere_pi1):
        with pytest.raises(KeyError):
            sectional_item(sphere_pi1, "diagonal", [1.0, 0.0])

    def test_select_orientation_across_points(self, sphere_pi1):
        reports = [sectional_item(sphere_pi1, "base-mixed", [theta, 0.0], orientation=LITERAL) for theta in (0.8, 1.4)]
        assert select_orientation(reports, "base-mixed") == GAUSS
        assert all(r.stamp.orientation == GAUSS for r in reports)
        assert all(r.residual < 1e-3 for r in reports)


class TestRicciItems:
    def test_vertical_fiber_with_minus_laplacian(self, h3_pi1):
        report = ricci_item(h3_pi1, "vertical-fiber", H3_POINT, stamp=ConventionStamp(laplacian=LAPLACIAN_MINUS))
        assert report.oracle == pytest.approx(-2.0 * math.exp(1.0), rel=1e-5)
        assert report.residual < 1e-3
        assert report.terms["warp_coefficient"] == pytest.approx(-2.0, abs=1e-5)

    def test_plus_laplacian_misses(self, h3_pi1):
        report = ricci_item(h3_pi1, "vertical-fiber", H3_POINT, stamp=ConventionStamp(laplacian=LAPLACIAN_PLUS))
        assert report.residual == pytest.approx(2.0 * math.exp(1.0), rel=1e-4)

    def test_calibration_selects_minus(self):
        chosen, residuals = calibrate_laplacian()
        assert chosen == LAPLACIAN_MINUS
        assert residuals[LAPLACIAN_MINUS] < 1e-4
        assert residuals[LAPLACIAN_PLUS] == pytest.approx(2.0, abs=1e-4)

    def test_report_dict(self, h3_pi1):
        data = ricci_item(h3_pi1, "vertical-fiber", H3_POINT).to_dict()
        assert data["item"] == "ricci:vertical-fiber"
        assert data["stamp"]["curvature"] == "sphere_positive"
        assert data["status"] == "ok"

    def test_unknown_item(self, h3_pi1):
        with pytest.raises(KeyError):
            ricci_item(h3_pi1, "diagonal", H3_POINT)

    def test_horizontal_base_on_sphere(self, sphere_pi1):
        report = ricci_item(sphere_pi1, "horizontal-base", [1.0, 0.0])
        assert report.computable
        assert report.oracle == pytest.approx(1.0, abs=1e-5)
        assert report.closed_form == pytest.approx(1.0, abs=1e-4)
        assert report.residual < 1e-3

    def test_horizontal_base_on_hyperbolic_model(self, h3_pi1):
        report = ricci_item(h3_pi1, "horizontal-base", H3_POINT)
        assert report.oracle == pytest.approx(-2.0, abs=1e-5)
        assert report.closed_form == pytest.approx(-2.0, abs=1e-4)

    def test_horizontal_base_with_hinted_function(self, catalog):
        phi = catalog.map_preset("sphere_latitudes")
        report = ricci_item(phi, "horizontal-base", [1.0, 0.3])
        assert report.terms["hessian_g"] == pytest.approx(-1.0 / math.sin(1.0) ** 2, rel=1e-4)
        assert report.terms["T_sum"] == pytest.approx(1.0 / math.tan(1.0) ** 2, rel=1e-4)
        assert report.closed_form == pytest.approx(1.0, abs=1e-3)
        assert report.residual < 1e-3

    def test_vertical_base_on_latitudes(self, catalog):
        phi = catalog.map_preset("sphere_latitudes")
        equator = ricci_item(phi, "vertical-base", [math.pi / 2, 0.3])
        assert equator.oracle == pytest.approx(1.0, abs=1e-5)
        assert equator.residual < 1e-3
        # off the equator the closed form drops cot^2
        report = ricci_item(phi, "vertical-base", [1.0, 0.3])
        assert report.oracle == pytest.approx(1.0, abs=1e-5)
        assert report.closed_form == pytest.approx(0.587717, abs=1e-3)
        assert report.residual == pytest.approx(0.412283, abs=1e-3)

    def test_vertical_base_follows_given_function(self, catalog):
        phi = catalog.map_preset("sphere_latitudes")
        report = ricci_item(phi, "vertical-base", [1.0, 0.3], g=ScalarField(lambda q: 0.0, "0"))
        assert report.closed_form == pytest.approx(0.0, abs=1e-4)
        assert report.residual == pytest.approx(1.0, abs=1e-3)

    def test_horizontal_fiber_on_identity(self, h3_model):
        phi = projection_map("identity", h3_model)
        report = ricci_item(phi, "horizontal-fiber", H3_POINT, stamp=ConventionStamp(laplacian=LAPLACIAN_MINUS))
        assert report.oracle == pytest.approx(-2.0 * math.exp(1.0), rel=1e-5)
        assert report.terms["warp_coefficient"] == pytest.approx(-2.0, abs=1e-5)
        assert report.residual < 1e-3


class TestCoshModel:
    """Re-verification of a second warped product under the calibrated Laplacian"""

    @pytest.fixture
    def cosh_model(self, catalog):
        return catalog.warped_product("cosh_model")

    @pytest.fixture
    def minus(self):
        laplacian, _ = calibrate_laplacian()
        return ConventionStamp(laplacian=laplacian)

    def test_vertical_fiber(self, cosh_model, minus):
        report = ricci_item(projection_map("pi1", cosh_model), "vertical-fiber", COSH_POINT, stamp=minus)
        assert report.terms["warp_coefficient"] == pytest.approx(-1.0 - math.tanh(0.4) ** 2, abs=1e-5)
        assert report.residual < 1e-3

    def test_fiber_plane(self, cosh_model, minus):
        report = sectional_item(projection_map("pi1", cosh_model), "fiber-plane", COSH_POINT, stamp=minus)
        assert report.oracle == pytest.approx(-math.tanh(0.4) ** 2, abs=1e-5)
        assert report.residual < 1e-3

    def test_horizontal_base(self, cosh_model, minus):
        report = ricci_item(projection_map("pi1", cosh_model), "horizontal-base", COSH_POINT, stamp=minus)
        assert report.oracle == pytest.approx(-2.0, abs=1e-5)
        assert report.residual < 1e-3

    def test_horizontal_fiber(self, cosh_model, minus):
        report = ricci_item(projection_map("identity", cosh_model), "horizontal-fiber", COSH_POINT, stamp=minus)
        assert report.terms["warp_coefficient"] == pytest.approx(-1.0 - math.tanh(0.4) ** 2, abs=1e-5)
        assert report.residual < 1e-3

    @pytest.mark.parametrize("orientation", [GAUSS, LITERAL])
    def test_fiber_horizontal(self, cosh_model, minus, orientation):
        phi = projection_map("identity", cosh_model)
        report = sectional_item(phi, "fiber-horizontal", COSH_POINT, orientation=orientation, stamp=minus)
        assert report.oracle == pytest.approx(-math.tanh(0.4) ** 2, abs=1e-5)
        assert report.closed_form == pytest.approx(-math.tanh(0.4) ** 2, abs=1e-4)

    @pytest.mark.parametrize("orientation", [GAUSS, LITERAL])
    def test_fiber_horizontal_on_hyperbolic_model(self, h3_model, orientation):
        report = sectional_item(projection_map("identity", h3_model), "fiber-horizontal", H3_POINT, orientation=orientation)
        assert report.closed_form == pytest.approx(-1.0, abs=1e-4)
        assert report.residual < 1e-3
