import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spherediff.errors import DegenerateMean, DegenerateVector, DimensionMismatch
from spherediff.geometry import (
    Hypercone,
    geodesic_angle,
    in_hypercone,
    project_to_sphere,
    spherical_mean,
    tangent_project,
    uniform_sphere_sample,
    unit_vector,
)


class TestProjectToSphere:
    def test_scaling(self):
        np.testing.assert_allclose(project_to_sphere([2.0, 0.0, 0.0]), [1, 0, 0])

    def test_idempotent_on_unit(self):
        np.testing.assert_allclose(project_to_sphere([1.0, 0.0, 0.0]), [1, 0, 0])

    def test_divide_by_norm(self):
        out = project_to_sphere([1.0, 1.0, 1.0, 1.0])
        np.testing.assert_allclose(out, [0.5, 0.5, 0.5, 0.5])
        assert abs(np.linalg.norm(out) - 1.0) < 1e-9

    def test_near_zero_rejected(self):
        with pytest.raises(DegenerateVector):
            project_to_sphere([0.0, 0.0, 1e-13])

    def test_batch(self):
        out = project_to_sphere(np.array([[3.0, 0.0], [0.0, 0.5]]))
        np.testing.assert_allclose(out, [[1, 0], [0, 1]])

    @given(st.lists(st.floats(-10, 10), min_size=2, max_size=8))
    @settings(max_examples=100, deadline=None)
    def test_unit_norm_property(self, coords):
        v = np.asarray(coords)
        if np.linalg.norm(v) <= 1e-12:
            return
        assert abs(np.linalg.norm(project_to_sphere(v)) - 1.0) <= 1e-9


class TestUnitVector:
    def test_dimension_floor(self):
        with pytest.raises(DimensionMismatch):
            unit_vector([1.0])


class TestGeodesicAngle:
    def test_identity(self):
        assert geodesic_angle([1, 0, 0], [1, 0, 0]) == 0.0

    def test_antipodal(self):
        assert geodesic_angle([1, 0, 0], [-1, 0, 0]) == pytest.approx(np.pi)

    def test_orthogonal(self):
        assert geodesic_angle([1, 0, 0], [0, 0, 1]) == pytest.approx(np.pi / 2)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            geodesic_angle([1, 0, 0], [1, 0])

    def test_clamped_near_identical(self):
        a = unit_vector([0.6, 0.8, 0.0])
        assert np.isfinite(geodesic_angle(a, a * (1 + 1e-16)))

    def test_triangle_inequality_random(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            a, b, c = uniform_sphere_sample(rng, 5, 3)
            assert geodesic_angle(a, c) <= (
                geodesic_angle(a, b) + geodesic_angle(b, c) + 1e-9
            )


class TestTangentProject:
    def test_parallel_killed(self):
        x = unit_vector([0, 1, 0])
        np.testing.assert_allclose(tangent_project(x, 3.0 * x), 0.0, atol=1e-12)

    def test_orthogonal_fixed(self):
        x = unit_vector([0, 1, 0])
        v = np.array([2.0, 0.0, -1.0])
        np.testing.assert_allclose(tangent_project(x, v), v)

    def test_explicit(self):
        out = tangent_project(np.array([1.0, 0, 0]), np.array([1.0, 1.0, 0]))
        np.testing.assert_allclose(out, [0, 1, 0])

    def test_output_orthogonal_and_idempotent(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            x = uniform_sphere_sample(rng, 6)
            v = rng.standard_normal(6)
            p = tangent_project(x, v)
            assert abs(np.dot(p, x)) <= 1e-9
            np.testing.assert_allclose(tangent_project(x, p), p, atol=1e-12)


class TestHypercone:
    def test_membership_at_axis(self):
        cone = Hypercone(np.array([0.0, 0, 1]), 0.0)
        assert in_hypercone(np.array([0.0, 0, 1]), cone)

    def test_full_sphere(self):
        cone = Hypercone(np.array([0.0, 0, 1]), np.pi)
        rng = np.random.default_rng(0)
        assert bool(np.all(in_hypercone(uniform_sphere_sample(rng, 3, 100), cone)))

    def test_outside(self):
        cone = Hypercone(np.array([1.0, 0, 0]), np.pi / 4)
        x = unit_vector([np.cos(np.pi / 3), np.sin(np.pi / 3), 0.0])
        assert not in_hypercone(x, cone)

    def test_monotone_in_theta(self):
        rng = np.random.default_rng(1)
        axis = uniform_sphere_sample(rng, 4)
        xs = uniform_sphere_sample(rng, 4, 200)
        thetas = np.linspace(0.1, np.pi, 8)
        prev = np.zeros(200, dtype=bool)
        for theta in thetas:
            cur = in_hypercone(xs, Hypercone(axis, theta))
            assert bool(np.all(cur | ~prev))
            prev = cur

    def test_invalid_theta(self):
        with pytest.raises(ValueError):
            Hypercone(np.array([1.0, 0, 0]), -0.1)
        with pytest.raises(ValueError):
            Hypercone(np.array([1.0, 0, 0]), np.pi + 0.1)


class TestSphericalMean:
    def test_single_point(self):
        p = unit_vector([0, 0, 1.0])
        np.testing.assert_allclose(spherical_mean([p]), p)

    def test_two_orthogonal(self):
        out = spherical_mean([[1.0, 0, 0], [0, 1.0, 0]])
        np.testing.assert_allclose(out, [1 / np.sqrt(2), 1 / np.sqrt(2), 0])

    def test_cancellation(self):
        with pytest.raises(DegenerateMean):
            spherical_mean([[1.0, 0, 0], [-1.0, 0, 0]])


class TestUniformSample:
    def test_resultant_small(self):
        rng = np.random.default_rng(11)
        draws = uniform_sphere_sample(rng, 3, 100_000)
        assert np.linalg.norm(draws.mean(axis=0)) <= 0.02

    def test_coordinate_means_near_zero(self):
        rng = np.random.default_rng(12)
        draws = uniform_sphere_sample(rng, 3, 100_000)
        assert np.max(np.abs(draws.mean(axis=0))) <= 0.02

    def test_s1_angle_histogram_uniform(self):
        from scipy.stats import chisquare

        rng = np.random.default_rng(13)
        draws = uniform_sphere_sample(rng, 2, 100_000)
        angles = np.arctan2(draws[:, 1], draws[:, 0]) % (2 * np.pi)
        counts, _ = np.histogram(angles, bins=36, range=(0, 2 * np.pi))
        assert chisquare(counts).pvalue > 0.01

    def test_dimension_floor(self):
        with pytest.raises(DimensionMismatch):
            uniform_sphere_sample(np.random.default_rng(0), 1)
