#!/usr/bin/env python3
"""
Tests for geodesic integration, velocity decomposition and the geodesic
case residuals
"""

import math

import numpy as np
import pytest

from services.errors import CaseMismatch, InvalidLaunch
from services.geodesic_engine import (
    acceleration_expansion_check,
    decompose,
    geodesic_case_residuals,
    integrate,
    interior_indices,
    sample_curve,
)

HALF_PI = math.pi / 2


def latitude_curve(t):
    return np.array([math.pi / 4, t])


class TestIntegrate:
    def test_straight_lines_in_the_plane(self, catalog):
        trace = integrate(catalog.get("euclidean:2"), [1.0, -1.0], [0.5, 2.0], t_end=1.0, dt=0.01)
        assert len(trace) == 101
        assert np.allclose(trace.points[-1], [1.5, 1.0], atol=1e-10)
        assert trace.exit_reason is None

    def test_equator_is_a_geodesic(self, sphere_model):
        trace = integrate(sphere_model.manifold, [HALF_PI, 0.0], [0.0, 1.0], t_end=1.0, dt=0.01)
        assert np.allclose(trace.points[:, 0], HALF_PI, atol=1e-8)
        assert trace.points[-1, 1] == pytest.approx(1.0, abs=1e-8)
        assert trace.speed_drift < 1e-8

    def test_speed_is_conserved_on_hyperbolic_plane(self, catalog):
        trace = integrate(catalog.get("hyperbolic2"), [0.0, 1.0], [1.0, 0.5], t_end=2.0, dt=0.01)
        assert trace.speed_drift < 1e-6

    def test_leaving_the_chart_truncates(self, catalog):
        trace = integrate(catalog.get("line"), [0.0], [1.0], t_end=25.0, dt=0.01)
        assert trace.exit_reason is not None
        assert trace.times[-1] < 20.0
        assert all(catalog.get("line").contains(p) for p in trace.points)

    def test_zero_velocity_rejected(self, catalog):
        with pytest.raises(InvalidLaunch):
            integrate(catalog.get("euclidean:2"), [0.0, 0.0], [0.0, 0.0], t_end=1.0)

    def test_non_positive_step_rejected(self, catalog):
        with pytest.raises(InvalidLaunch):
            integrate(catalog.get("euclidean:2"), [0.0, 0.0], [1.0, 0.0], t_end=1.0, dt=0.0)


class TestAccuracy:
    """The unit-speed geodesic of the upper half-plane through (0, 1) is x = tanh t, y = sech t"""

    def test_fourth_order_convergence(self, catalog):
        plane = catalog.get("hyperbolic2")
        ends = [integrate(plane, [0.0, 1.0], [1.0, 0.0], t_end=2.0, dt=dt).points[-1] for dt in (0.1, 0.05, 0.025)]
        ratio = np.linalg.norm(ends[0] - ends[1]) / np.linalg.norm(ends[1] - ends[2])
        assert 10.0 <= ratio <= 24.0

    def test_stays_on_the_unit_semicircle(self, catalog):
        trace = integrate(catalog.get("hyperbolic2"), [0.0, 1.0], [1.0, 0.0], t_end=4.0, dt=1e-3)
        assert trace.exit_reason is None
        radius = np.sum(trace.points ** 2, axis=1)
        assert np.max(np.abs(radius - 1.0)) < 1e-5
        assert np.allclose(trace.points[-1], [math.tanh(4.0), 1.0 / math.cosh(4.0)], atol=1e-5)

    def test_speed_drift_over_a_family(self, sphere_model):
        for omega in np.linspace(0.1, 1.3, 10):
            velocity = [math.sin(omega), math.cos(omega)]
            trace = integrate(sphere_model.manifold, [HALF_PI, 0.0], velocity, t_end=10.0, dt=1e-3)
            assert trace.exit_reason is None
            assert trace.speed_drift < 1e-6


class TestTraceFrame:
    def test_column_order(self, sphere_pi1):
        trace = decompose(sphere_pi1, integrate(sphere_pi1.M, [1.0, 0.0], [0.3, 1.0], t_end=0.1, dt=0.01))
        trace = trace.with_residual("zeta", [1, 2], [0.1, 0.2]).with_residual("alpha", [3], [0.5])
        frame = trace.to_frame()
        assert list(frame.columns) == [
            "t", "x1", "x2", "v1", "v2", "b", "omega", "clairaut_invariant", "alpha", "zeta",
        ]
        assert math.isnan(frame["zeta"][0])
        assert frame["zeta"][2] == 0.2
        assert frame["clairaut_invariant"].isna().all()

    def test_interior_indices(self, catalog):
        trace = integrate(catalog.get("line"), [0.0], [1.0], t_end=0.1, dt=0.01)
        assert interior_indices(trace, stride=3) == [1, 4, 7]


class TestDecompose:
    def test_equator_is_vertical_for_first_projection(self, sphere_pi1):
        trace = decompose(sphere_pi1, integrate(sphere_pi1.M, [HALF_PI, 0.0], [0.0, 1.0], t_end=0.1, dt=0.01))
        assert np.allclose(trace.omega, HALF_PI)
        assert np.allclose(trace.horizontal, 0.0)

    def test_meridian_is_horizontal(self, sphere_pi1):
        trace = decompose(sphere_pi1, integrate(sphere_pi1.M, [1.0, 0.0], [1.0, 0.0], t_end=0.1, dt=0.01))
        assert np.allclose(trace.omega, 0.0, atol=1e-9)

    def test_parts_sum_to_velocity(self, sphere_pi1):
        trace = decompose(sphere_pi1, integrate(sphere_pi1.M, [1.0, 0.0], [0.4, 0.9], t_end=0.1, dt=0.01))
        assert np.allclose(trace.vertical + trace.horizontal, trace.velocities)


class TestCaseResiduals:
    def test_vertical_case(self, sphere_pi1):
        trace = integrate(sphere_pi1.M, [HALF_PI, 0.0], [0.0, 1.0], t_end=0.5, dt=0.01)
        residuals = geodesic_case_residuals(sphere_pi1, trace, "vertical", stride=5)
        assert set(residuals) == {"T_UU", "vertical_DtU", "index"}
        assert residuals["T_UU"].max() < 1e-6
        assert residuals["vertical_DtU"].max() < 1e-6

    def test_horizontal_case(self, sphere_pi1):
        trace = integrate(sphere_pi1.M, [1.0, 0.0], [1.0, 0.0], t_end=0.5, dt=0.01)
        residuals = geodesic_case_residuals(sphere_pi1, trace, "horizontal", stride=5)
        assert residuals["A_YY"].max() < 1e-6
        assert residuals["horizontal_DtY"].max() < 1e-6

    def test_mixed_case(self, sphere_pi1):
        trace = integrate(sphere_pi1.M, [HALF_PI, 0.0], [math.sqrt(0.5), math.sqrt(0.5)], t_end=1.0, dt=1e-3)
        residuals = geodesic_case_residuals(sphere_pi1, trace, "mixed", stride=50)
        assert residuals["mixed_vertical"].max() < 1e-3
        assert residuals["mixed_horizontal"].max() < 1e-3

    def test_latitude_circle_is_not_geodesic(self, sphere_pi1):
        trace = sample_curve(sphere_pi1.M, latitude_curve, t_end=0.5, dt=0.01)
        residuals = geodesic_case_residuals(sphere_pi1, trace, "vertical", stride=5)
        assert np.allclose(residuals["T_UU"], 0.5, atol=1e-6)

    def test_case_mismatch(self, sphere_pi1):
        trace = integrate(sphere_pi1.M, [1.0, 0.0], [1.0, 0.0], t_end=0.1, dt=0.01)
        with pytest.raises(CaseMismatch):
            geodesic_case_residuals(sphere_pi1, trace, "vertical")

    def test_unknown_case(self, sphere_pi1):
        trace = integrate(sphere_pi1.M, [1.0, 0.0], [1.0, 0.0], t_end=0.1, dt=0.01)
        with pytest.raises(ValueError):
            geodesic_case_residuals(sphere_pi1, trace, "diagonal")


class TestAccelerationExpansion:
    def test_holds_along_a_geodesic(self, sphere_model):
        trace = integrate(sphere_model.manifold, [1.0, 0.0], [0.6, 0.8], t_end=0.5, dt=1e-3)
        check = acceleration_expansion_check(sphere_model, trace, stride=25)
        assert check["residual"].max() < 1e-6
        assert check["brute_norm"].max() < 1e-5

    def test_holds_along_a_non_geodesic_curve(self, sphere_model):
        trace = sample_curve(sphere_model.manifold, latitude_curve, t_end=0.5, dt=0.01)
        check = acceleration_expansion_check(sphere_model, trace, stride=5)
        assert check["residual"].max() < 1e-6
        assert np.allclose(check["brute_norm"], 0.5, atol=1e-6)
