import numpy as np
import pytest

from spherediff.errors import DegenerateCone, EmptyAfterExclusion, UnknownLabel
from spherediff.geometry import geodesic_angle, uniform_sphere_sample
from spherediff.metrics import (
    cosine_stats,
    evaluate_samples,
    fit_class_stats,
    hcr,
    hds,
    subcone_weights,
    uniformity_test,
)
from spherediff.vmf import VmfParams, sample_vmf

E1_3 = np.eye(3)[0]


def _random_rotation(rng, d):
    m = rng.standard_normal((d, d))
    q, r = np.linalg.qr(m)
    return q * np.sign(np.diag(r))


def _cone_dataset(rng, mu, theta_max, angles, label="c0"):
    """Deterministic points at prescribed angles from mu (d = 3)."""
    t = np.array([0.0, 1.0, 0.0])
    pts = [np.cos(a) * mu + np.sin(a) * t for a in angles]
    return np.array(pts), np.array([label] * len(angles))


class TestFitClassStats:
    def test_recovers_mean_direction(self):
        rng = np.random.default_rng(0)
        draws = sample_vmf(rng, VmfParams(E1_3, 10.0), 10_000)
        stats = fit_class_stats(draws, np.array(["a"] * 10_000))
        assert geodesic_angle(stats["a"].mu, E1_3) <= 0.02

    def test_percentile_100_is_max(self):
        rng = np.random.default_rng(1)
        draws = sample_vmf(rng, VmfParams(E1_3, 5.0), 500)
        stats = fit_class_stats(draws, np.array(["a"] * 500), percentile=100.0)
        angles = geodesic_angle(draws, stats["a"].mu)
        assert stats["a"].theta_max == pytest.approx(angles.max())

    def test_identical_points_zero_radius(self):
        pts = np.broadcast_to(E1_3, (10, 3)).copy()
        stats = fit_class_stats(pts, np.array(["a"] * 10))
        assert stats["a"].theta_max == 0.0
        with pytest.raises(DegenerateCone):
            hds(pts, np.array(["a"] * 10), stats)

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            fit_class_stats(E1_3[None, :], np.array(["a"]))

    def test_unknown_label(self):
        rng = np.random.default_rng(2)
        draws = sample_vmf(rng, VmfParams(E1_3, 5.0), 50)
        stats = fit_class_stats(draws, np.array(["a"] * 50))
        with pytest.raises(UnknownLabel):
            stats["b"]

    def test_weights_decreasing(self):
        w = subcone_weights(5)
        np.testing.assert_allclose(w, [1.0, 0.8, 0.6, 0.4, 0.2])
        assert np.all(np.diff(w) < 0)


class TestHcr:
    def _stats(self):
        angles = np.linspace(0.0, 0.5, 50)
        pts, labels = _cone_dataset(None, E1_3, 0.5, angles)
        return fit_class_stats(pts, labels, percentile=100.0)

    def test_all_inside(self):
        stats = self._stats()
        pts, labels = _cone_dataset(None, E1_3, 0.5, np.linspace(0, 0.4, 10))
        assert hcr(pts, labels, stats) == 0.0

    def test_all_outside(self):
        stats = self._stats()
        pts, labels = _cone_dataset(None, E1_3, 0.5, np.linspace(1.0, 1.5, 10))
        assert hcr(pts, labels, stats) == 1.0

    def test_three_of_ten(self):
        stats = self._stats()
        angles = np.array([0.1] * 7 + [1.0] * 3)
        pts, labels = _cone_dataset(None, E1_3, 0.5, angles)
        assert hcr(pts, labels, stats) == pytest.approx(0.3)

    def test_monotone_in_theta_max(self):
        rng = np.random.default_rng(3)
        draws = sample_vmf(rng, VmfParams(E1_3, 5.0), 2000)
        labels = np.array(["a"] * 2000)
        vals = []
        for pct in (50.0, 80.0, 95.0, 100.0):
            stats = fit_class_stats(draws, labels, percentile=pct)
            vals.append(hcr(draws, labels, stats))
        assert np.all(np.diff(vals) <= 0)


class TestHds:
    def _stats(self, n_subcones=5):
        angles = np.linspace(0.0, 0.5, 50)
        pts, labels = _cone_dataset(None, E1_3, 0.5, angles)
        return fit_class_stats(pts, labels, percentile=100.0, n_subcones=n_subcones)

    def test_all_innermost(self):
        stats = self._stats()
        pts, labels = _cone_dataset(None, E1_3, 0.5, np.full(20, 0.05))
        assert hds(pts, labels, stats) == pytest.approx(1.0)

    def test_uniform_over_bins(self):
        stats = self._stats()
        # one sample per bin center
        pts, labels = _cone_dataset(None, E1_3, 0.5, np.array([0.05, 0.15, 0.25, 0.35, 0.45]))
        assert hds(pts, labels, stats) == pytest.approx(0.6)

    def test_single_bin_degenerate(self):
        stats = self._stats(n_subcones=1)
        pts, labels = _cone_dataset(None, E1_3, 0.5, np.linspace(0, 0.45, 9))
        assert hds(pts, labels, stats) == pytest.approx(1.0)

    def test_out_of_cone_excluded(self):
        stats = self._stats()
        angles = np.array([0.05] * 5 + [1.2] * 5)  # half outside
        pts, labels = _cone_dataset(None, E1_3, 0.5, angles)
        assert hds(pts, labels, stats) == pytest.approx(1.0)

    def test_empty_after_exclusion(self):
        stats = self._stats()
        pts, labels = _cone_dataset(None, E1_3, 0.5, np.full(10, 1.2))
        with pytest.raises(EmptyAfterExclusion):
            hds(pts, labels, stats)

    def test_boundary_angle_in_last_bin(self):
        stats = self._stats()
        pts, labels = _cone_dataset(None, E1_3, 0.5, np.array([0.5]))
        assert hds(pts, labels, stats) == pytest.approx(0.2)


class TestInvariances:
    def test_rotation_invariance(self):
        rng = np.random.default_rng(4)
        d = 5
        mu = np.eye(d)[0]
        data = sample_vmf(rng, VmfParams(mu, 8.0), 3000)
        labels = np.array(["a"] * 3000)
        gen = sample_vmf(rng, VmfParams(mu, 4.0), 500)
        glabels = np.array(["a"] * 500)
        stats = fit_class_stats(data, labels)
        base_hcr = hcr(gen, glabels, stats)
        base_hds = hds(gen, glabels, stats)
        rot = _random_rotation(rng, d)
        stats_r = fit_class_stats(data @ rot.T, labels)
        assert hcr(gen @ rot.T, glabels, stats_r) == pytest.approx(base_hcr, abs=1e-3)
        assert hds(gen @ rot.T, glabels, stats_r) == pytest.approx(base_hds, abs=1e-3)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        data = sample_vmf(rng, VmfParams(E1_3, 8.0), 1000)
        labels = np.array(["a"] * 500 + ["b"] * 500)
        data[500:] = sample_vmf(rng, VmfParams(-E1_3, 8.0), 500)
        stats = fit_class_stats(data, labels)
        gen = data[::3]
        glabels = labels[::3]
        perm = rng.permutation(gen.shape[0])
        assert hcr(gen, glabels, stats) == hcr(gen[perm], glabels[perm], stats)
        assert hds(gen, glabels, stats) == hds(gen[perm], glabels[perm], stats)


class TestCosineStats:
    def test_degenerate(self):
        pts = np.broadcast_to(E1_3, (5, 3))
        mean, std = cosine_stats(pts, E1_3)
        assert mean == 1.0 and std == 0.0

    def test_uniform_near_zero(self):
        rng = np.random.default_rng(6)
        pts = uniform_sphere_sample(rng, 3, 100_000)
        mean, _ = cosine_stats(pts, E1_3)
        assert abs(mean) <= 0.01

    def test_vmf_moment(self):
        rng = np.random.default_rng(7)
        pts = sample_vmf(rng, VmfParams(E1_3, 5.0), 200_000)
        mean, _ = cosine_stats(pts, E1_3)
        assert mean == pytest.approx(0.8000908039820194, abs=0.005)


class TestUniformityTest:
    def test_uniform_rarely_rejected(self):
        # calibration: the p-value should exceed 0.01 in ~99% of runs
        hits = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            pts = uniform_sphere_sample(rng, 3, 20_000)
            if uniformity_test(pts).p_value > 0.01:
                hits += 1
        assert hits >= 96

    def test_vmf_strongly_rejected(self):
        rng = np.random.default_rng(8)
        pts = sample_vmf(rng, VmfParams(E1_3, 5.0), 5000)
        assert uniformity_test(pts).p_value < 1e-10

    def test_copies_of_one_point(self):
        pts = np.broadcast_to(E1_3, (100, 3))
        assert uniformity_test(pts).resultant_length == pytest.approx(1.0)

    def test_minimum_size(self):
        with pytest.raises(ValueError):
            uniformity_test(np.broadcast_to(E1_3, (10, 3)))


class TestEvaluateSamples:
    def test_bundle_consistency(self):
        rng = np.random.default_rng(9)
        data = np.concatenate(
            [
                sample_vmf(rng, VmfParams(E1_3, 10.0), 1000),
                sample_vmf(rng, VmfParams(-E1_3, 10.0), 1000),
            ]
        )
        labels = np.array(["a"] * 1000 + ["b"] * 1000)
        stats = fit_class_stats(data, labels)
        rep = evaluate_samples(data, labels, stats)
        assert rep.hcr == pytest.approx(hcr(data, labels, stats))
        assert rep.hds == pytest.approx(hds(data, labels, stats))
        assert set(rep.per_class) == {"a", "b"}
        d = rep.to_dict()
        assert d["n_samples"] == 2000
