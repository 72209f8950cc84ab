#!/usr/bin/env python3
"""
Tests for chart manifolds and the finite-difference connection calculus
"""

import math

import numpy as np
import pytest

from services.errors import DomainError, OutOfDomain, SingularMetric
from services.manifold_core import (
    LAPLACIAN_MINUS,
    LAPLACIAN_PLUS,
    ChartManifold,
    ScalarField,
    covariant_derivative,
    directional_derivative,
    divergence,
    gradient,
    hessian,
    laplacian,
    lie_bracket,
)


@pytest.fixture
def plane(catalog):
    return catalog.get("euclidean:2")


@pytest.fixture
def polar(catalog):
    return catalog.get("polar2")


@pytest.fixture
def sphere(catalog):
    return catalog.get("sphere2")


class TestChart:
    def test_domain(self, polar):
        assert polar.contains([1.0, 0.0])
        assert not polar.contains([0.01, 0.0])
        with pytest.raises(OutOfDomain):
            polar.require_domain([0.01, 0.0])

    def test_point_shape(self, polar):
        with pytest.raises(ValueError):
            polar.as_point([1.0, 2.0, 3.0])

    def test_empty_box_rejected(self):
        with pytest.raises(ValueError):
            ChartManifold("bad", 1, (1.0,), (0.0,), lambda p: np.eye(1))

    def test_singular_metric(self):
        m = ChartManifold("degenerate", 2, (-5.0, -5.0), (5.0, 5.0), lambda p: np.diag([1.0, p[0]]))
        assert m.eval_metric([1.0, 0.0]).shape == (2, 2)
        with pytest.raises(SingularMetric):
            m.eval_metric([-1.0, 0.0])

    def test_sample_points_stay_inside(self, sphere, rng):
        points = sphere.sample_points(50, rng)
        assert points.shape == (50, 2)
        assert all(sphere.contains(p) for p in points)
        assert np.all(np.abs(points) <= 3.0)


class TestChristoffel:
    def test_polar_symbols(self, polar):
        gamma = polar.christoffel([2.0, 0.3])
        assert gamma[0, 1, 1] == pytest.approx(-2.0, abs=1e-8)
        assert gamma[1, 0, 1] == pytest.approx(0.5, abs=1e-8)
        assert gamma[1, 1, 0] == pytest.approx(0.5, abs=1e-8)
        assert gamma[0, 0, 0] == pytest.approx(0.0, abs=1e-8)

    def test_flat_chart_has_no_symbols(self, plane):
        assert np.allclose(plane.christoffel([1.0, -2.0]), 0.0)

    def test_sphere_symbols(self, sphere):
        theta = 1.1
        gamma = sphere.christoffel([theta, 0.0])
        assert gamma[0, 1, 1] == pytest.approx(-math.sin(theta) * math.cos(theta), abs=1e-8)
        assert gamma[1, 0, 1] == pytest.approx(math.cos(theta) / math.sin(theta), abs=1e-8)


class TestConnection:
    def test_linear_field_in_the_plane(self, plane):
        A = np.array([[1.0, 2.0], [-3.0, 0.5]])
        result = covariant_derivative(plane, [0.3, -1.0], lambda q: A @ q, [1.0, 2.0])
        assert np.allclose(np.asarray(result), A @ np.array([0.3, -1.0]), atol=1e-8)

    def test_radial_field_in_polar_coordinates(self, polar):
        # d_theta is not parallel along itself: nabla_{d_theta} d_theta = -r d_r
        result = covariant_derivative(polar, [0.0, 1.0], [0.0, 1.0], [1.5, 0.2])
        assert np.allclose(np.asarray(result), [-1.5, 0.0], atol=1e-8)

    def test_lie_bracket(self, plane):
        bracket = lie_bracket(plane, [1.0, 0.0], lambda q: np.array([0.0, q[0]]), [0.4, 0.7])
        assert np.allclose(np.asarray(bracket), [0.0, 1.0], atol=1e-8)

    def test_torsion_free(self, polar):
        X = lambda q: np.array([q[1], 1.0])
        Y = lambda q: np.array([1.0, q[0] ** 2])
        p = [1.2, 0.4]
        lhs = np.asarray(covariant_derivative(polar, X, Y, p)) - np.asarray(covariant_derivative(polar, Y, X, p))
        assert np.allclose(lhs, np.asarray(lie_bracket(polar, X, Y, p)), atol=1e-7)

    def test_metric_compatible(self, sphere):
        # X g(Y, Z) = g(nabla_X Y, Z) + g(Y, nabla_X Z)
        Y = lambda q: np.array([math.cos(q[1]), q[0]])
        Z = lambda q: np.array([1.0, math.sin(q[0])])
        x = np.array([0.7, -0.2])
        p = np.array([1.0, 0.5])
        lhs = directional_derivative(sphere, lambda q: sphere.inner(q, Y(q), Z(q)), x, p)
        rhs = sphere.inner(p, covariant_derivative(sphere, x, Y, p), Z(p)) + sphere.inner(
            p, Y(p), covariant_derivative(sphere, x, Z, p)
        )
        assert lhs == pytest.approx(rhs, abs=1e-7)


class TestScalarCalculus:
    def test_gradient_raises_index(self, polar):
        grad = gradient(polar, lambda q: q[1], [2.0, 0.0])
        assert np.allclose(np.asarray(grad), [0.0, 0.25], atol=1e-8)

    def test_hessian_of_product(self, plane):
        assert hessian(plane, lambda q: q[0] * q[1], [1.0, 0.0], [0.0, 1.0], [0.3, 0.3]) == pytest.approx(1.0, abs=1e-6)

    def test_divergence_of_radial_field(self, polar):
        assert divergence(polar, [1.0, 0.0], [2.0, 0.0]) == pytest.approx(0.5, abs=1e-8)

    def test_laplacian_conventions(self, plane):
        h = lambda q: q[0] ** 2 + q[1] ** 2
        assert laplacian(plane, h, [0.5, -0.5], LAPLACIAN_PLUS) == pytest.approx(4.0, abs=1e-5)
        assert laplacian(plane, h, [0.5, -0.5], LAPLACIAN_MINUS) == pytest.approx(-4.0, abs=1e-5)

    def test_laplacian_on_sphere(self, sphere):
        value = laplacian(sphere, lambda q: math.cos(q[0]), [1.0, 0.0])
        assert value == pytest.approx(-2.0 * math.cos(1.0), abs=1e-5)

    def test_unknown_convention(self, plane):
        with pytest.raises(ValueError):
            laplacian(plane, lambda q: q[0], [0.0, 0.0], "sideways")


class TestScalarField:
    def test_log_and_exp(self):
        f = ScalarField(lambda p: 2.0 + p[0], "2 + x1")
        assert f.log()([1.0]) == pytest.approx(math.log(3.0))
        assert f.log().exp()([1.0]) == pytest.approx(3.0)
        assert f.log().label == "ln(2 + x1)"

    def test_log_of_non_positive(self):
        with pytest.raises(DomainError):
            ScalarField(lambda p: -1.0).log()([0.0])

    def test_compose_with_projection(self):
        f = ScalarField(lambda p: p[0] * 10.0)
        pulled = f.compose(lambda p: p[1:])
        assert pulled([1.0, 2.0, 3.0]) == 20.0

    def test_constant(self):
        assert ScalarField.constant(2.5)([9.0]) == 2.5
