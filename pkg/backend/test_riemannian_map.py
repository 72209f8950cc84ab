#!/usr/bin/env python3
"""
Tests for product maps, vertical/horizontal frames and the O'Neill tensors
"""

import math

import numpy as np
import pytest

from services.catalog import projection_map
from services.errors import NoFibers
from services.riemannian_map import (
    decomposition_check,
    fiber_mean_curvature,
    tensor_A,
    tensor_law_check,
    tensor_T,
    totally_geodesic_residual,
    umbilical_residual,
)


@pytest.fixture
def heisenberg(catalog):
    return catalog.map_preset("heisenberg_submersion")


class TestFrames:
    def test_projection_frame(self, h3_pi1):
        fr = h3_pi1.frame([0.5, 1.0, -1.0])
        assert fr.vertical_dim == 2
        assert fr.horizontal_dim == 1
        g = fr.metric
        assert np.allclose(fr.vertical.T @ g @ fr.vertical, np.eye(2), atol=1e-12)
        assert np.allclose(fr.vertical.T @ g @ fr.horizontal, 0.0, atol=1e-12)

    def test_projectors_are_complementary(self, heisenberg):
        Pv, Ph = heisenberg.projectors([0.3, 0.2, 0.1])
        assert np.allclose(Pv + Ph, np.eye(3))
        assert np.allclose(Pv @ Pv, Pv, atol=1e-12)

    def test_heisenberg_vertical_is_z_axis(self, heisenberg):
        fr = heisenberg.frame([0.3, 0.2, 0.1])
        assert np.allclose(np.abs(fr.vertical[:, 0]), [0.0, 0.0, 1.0], atol=1e-9)
        assert heisenberg.is_surjective_at([0.3, 0.2, 0.1])

    def test_identity_has_no_fibers(self, catalog):
        phi = projection_map("identity", catalog.warped_product("round_sphere"))
        assert phi.frame([1.0, 0.0]).vertical_dim == 0
        with pytest.raises(NoFibers):
            fiber_mean_curvature(phi, [1.0, 0.0])


class TestMapGeometry:
    def test_projection_is_riemannian(self, h3_pi1):
        assert h3_pi1.isometry_residual([0.5, 1.0, -1.0]) < 1e-8

    def test_second_projection_is_not_riemannian_for_nonconstant_warp(self, h3_model):
        pi2 = projection_map("pi2", h3_model)
        assert not pi2.riemannian
        assert pi2.isometry_residual([0.5, 0.0, 0.0]) == pytest.approx(1.0 - math.exp(-1.0), abs=1e-8)

    def test_heisenberg_submersion_is_riemannian(self, heisenberg):
        assert heisenberg.isometry_residual([0.7, -0.4, 1.5]) < 1e-8

    def test_graph_second_fundamental_form(self, catalog):
        phi = catalog.map_preset("graph_curve")
        sff = phi.second_fundamental_form([0.0], [1.0], [1.0])
        assert np.allclose(sff, [0.0, 2.0], atol=1e-5)
        assert phi.isometry_residual([1.0]) == pytest.approx(4.0, abs=1e-6)

    def test_sphere_embedding_second_fundamental_form(self, catalog):
        phi = catalog.map_preset("sphere_embedding")
        sff = phi.second_fundamental_form([math.pi / 2, 0.0], [1.0, 0.0], [1.0, 0.0])
        assert np.allclose(sff, [-1.0, 0.0, 0.0], atol=1e-5)
        assert phi.isometry_residual([1.0, 0.3]) < 1e-8

    def test_horizontal_lift_pushes_forward(self, heisenberg):
        p = [0.3, 0.2, 0.1]
        w = np.array([1.0, -2.0])
        lifted = heisenberg.horizontal_lift(p, w)
        assert np.allclose(np.asarray(heisenberg.pushforward(p, lifted)), w, atol=1e-8)
        Pv, _ = heisenberg.projectors(p)
        assert np.allclose(Pv @ np.asarray(lifted), 0.0, atol=1e-9)


class TestONeillTensors:
    def test_heisenberg_a_tensor(self, heisenberg):
        p = np.array([0.3, 0.2, 0.1])
        X = np.array([1.0, 0.0, 0.0])
        Y = np.array([0.0, 1.0, p[0]])
        a = tensor_A(heisenberg, p, X, Y)
        assert heisenberg.M.norm(p, a) == pytest.approx(0.5, abs=1e-6)
        assert heisenberg.M.norm(p, tensor_A(heisenberg, p, X, X)) < 1e-6

    def test_heisenberg_fibers_are_geodesic(self, heisenberg):
        assert totally_geodesic_residual(heisenberg, [0.3, 0.2, 0.1]) < 1e-6

    def test_warped_fibers_are_umbilical(self, h3_pi1):
        p = [0.2, 0.1, -0.3]
        H = np.asarray(fiber_mean_curvature(h3_pi1, p))
        assert np.allclose(H, [-1.0, 0.0, 0.0], atol=1e-6)
        assert umbilical_residual(h3_pi1, p) < 1e-6
        assert totally_geodesic_residual(h3_pi1, p) == pytest.approx(1.0, abs=1e-6)

    def test_t_vanishes_on_horizontal_arguments(self, h3_pi1):
        p = [0.2, 0.1, -0.3]
        t = np.asarray(tensor_T(h3_pi1, p, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]))
        assert np.allclose(t, 0.0, atol=1e-8)

    def test_decomposition(self, heisenberg, rng):
        report = decomposition_check(heisenberg, [0.3, 0.2, 0.1], rng)
        assert report.residuals["basic_field"] is not None
        assert report.max_residual < 1e-5

    @pytest.mark.parametrize("fixture", ["h3_pi1", "sphere_pi1"])
    def test_tensor_laws(self, request, fixture, rng):
        phi = request.getfixturevalue(fixture)
        points = phi.M.sample_points(3, rng)
        report = tensor_law_check(phi, points, rng)
        assert report.max_residual < 1e-5, report.residuals
