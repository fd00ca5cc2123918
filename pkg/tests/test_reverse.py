import numpy as np
import pytest

from spherediff.errors import DegenerateCone
from spherediff.forward import DualState, forward_trajectory
from spherediff.geometry import Hypercone, geodesic_angle, uniform_sphere_sample
from spherediff.reverse import (
    ReverseConfig,
    constant_etas,
    decaying_etas,
    dual_reverse_step,
    elbo_diagnostics,
    reverse_sde_step,
    reverse_step,
    reverse_step_angular,
    sample_class,
    sample_hypercone_constrained,
)
from spherediff.schedules import AdaptiveKappaConfig, make_schedule
from spherediff.scores import AnalyticVmfScore, MixtureSpec
from spherediff.vmf import VmfParams, cap_probability_s2, truncated_log_norm_mc

E1_3 = np.eye(3)[0]


def _zero_score(z, t, y):
    z = np.atleast_2d(z)
    return np.zeros_like(z)


def _single_class_cfg(d, kappa_class, num_steps=100, eta=0.05, adaptive=None, kappa_const=None):
    mu = np.eye(d)[0]
    model = AnalyticVmfScore(MixtureSpec.equal_weights([VmfParams(mu, kappa_class)]))
    return ReverseConfig(
        dim=d,
        schedule=make_schedule(num_steps),
        score_model=model,
        etas=constant_etas(num_steps, eta),
        class_cones={0: Hypercone(mu, np.pi / 6)},
        adaptive=adaptive,
        kappa_const=kappa_const,
    ), mu


class TestReverseStep:
    def test_zero_score_huge_kappa_stays(self):
        cfg, _ = _single_class_cfg(3, 5.0, kappa_const=1e4)
        cfg.score_model = _zero_score
        rng = np.random.default_rng(0)
        z = uniform_sphere_sample(rng, 3)
        out = reverse_step(z, 50, 0, cfg, rng)
        assert geodesic_angle(out, z) <= 0.05

    def test_at_mode_spread_matches_cap_oracle(self):
        # with the state at the class mean the tangent drift vanishes and
        # the step is a pure vMF(mu, kappa) draw; at kappa = 100 the cap
        # oracle puts P(angle <= 0.1) at about 0.39
        cfg, mu = _single_class_cfg(3, 20.0, kappa_const=100.0)
        rng = np.random.default_rng(1)
        z = np.broadcast_to(mu, (40_000, 3)).copy()
        out = reverse_step(z, 50, 0, cfg, rng)
        frac = np.mean(geodesic_angle(out, mu) <= 0.1)
        expected = cap_probability_s2(100.0, 0.1)
        assert expected == pytest.approx(0.3934, abs=1e-3)
        assert frac == pytest.approx(expected, abs=0.01)

    def test_decaying_etas_positive(self):
        etas = decaying_etas(10, 0.05)
        assert etas.shape == (10,)
        assert np.all(etas > 0) and etas[-1] == pytest.approx(0.05)


class TestSampleClass:
    def test_t1_returns_uniform(self):
        # with a single step the t > 1 guard skips all denoising
        cfg, _ = _single_class_cfg(8, 20.0, num_steps=2)
        from spherediff.schedules import AngularSchedule, ScheduleShape

        cfg.schedule = AngularSchedule(
            np.array([np.pi / 2 - 1e-6]), ScheduleShape.LINEAR
        )
        cfg.etas = constant_etas(1, 0.05)
        rng = np.random.default_rng(2)
        out = np.stack([sample_class(0, cfg, rng) for _ in range(5000)])
        assert np.linalg.norm(out.mean(axis=0)) <= 3 / np.sqrt(5000)

    def test_determinism(self):
        cfg, _ = _single_class_cfg(8, 20.0, num_steps=30)
        a = sample_class(0, cfg, np.random.default_rng(42), n=16)
        b = sample_class(0, cfg, np.random.default_rng(42), n=16)
        np.testing.assert_array_equal(a, b)

    def test_four_class_nearest_mean(self):
        from spherediff.data import place_class_means

        rng = np.random.default_rng(3)
        d, k = 16, 4
        means = place_class_means(rng, d, k, np.pi / 3)
        model = AnalyticVmfScore(
            MixtureSpec.equal_weights([VmfParams(means[i], 20.0) for i in range(k)])
        )
        cfg = ReverseConfig(
            dim=d,
            schedule=make_schedule(60),
            score_model=model,
            etas=constant_etas(60, 0.05),
        )
        hits = []
        for i in range(k):
            out = sample_class(i, cfg, rng, n=500)
            hits.append(np.mean(np.argmax(out @ means.T, axis=1) == i))
        assert np.mean(hits) >= 0.90


class TestAngularVariant:
    def test_theta_limits_select_mean(self):
        cfg, mu = _single_class_cfg(3, 20.0, kappa_const=1e4)
        rng = np.random.default_rng(4)
        z = uniform_sphere_sample(rng, 3)
        # near-terminal step: mean is essentially the current state
        out = reverse_step_angular(z, 1, 0, cfg, rng)
        assert geodesic_angle(out, z) <= 0.08
        # first step: mean is the normalized score direction, i.e. mu
        out = reverse_step_angular(z, cfg.schedule.num_steps, 0, cfg, rng)
        assert geodesic_angle(out, mu) <= 0.08

    def test_zero_score_fallback(self):
        cfg, _ = _single_class_cfg(3, 20.0, kappa_const=1e4)
        cfg.score_model = _zero_score
        rng = np.random.default_rng(5)
        z = uniform_sphere_sample(rng, 3)
        out = reverse_step_angular(z, 50, 0, cfg, rng)
        assert geodesic_angle(out, z) <= 0.05


class TestConvergenceRuns:
    """Shared d=16 mixture run exercised by all sampler variants.

    The sigmoid concentration gate is what locks chains into the cone;
    the plain cot schedule alone leaves the terminal vMF noise too wide
    at this dimension (kappa_2 ~ 32 puts ~15% inside pi/6).
    """

    @classmethod
    def setup_class(cls):
        from spherediff.data import place_class_means

        rng = np.random.default_rng(6)
        cls.d, cls.k = 16, 4
        cls.means = place_class_means(rng, cls.d, cls.k, np.pi / 3)
        model = AnalyticVmfScore(
            MixtureSpec.equal_weights(
                [VmfParams(cls.means[i], 20.0) for i in range(cls.k)]
            )
        )
        cls.cones = {i: Hypercone(cls.means[i], np.pi / 6) for i in range(cls.k)}
        cls.cfg = ReverseConfig(
            dim=cls.d,
            schedule=make_schedule(100),
            score_model=model,
            etas=constant_etas(100, 0.05),
            class_cones=cls.cones,
            adaptive=AdaptiveKappaConfig(1000.0, 3.0),
        )
        cls.rng = np.random.default_rng(7)

    def test_score_variant_in_cone(self):
        fr = [
            np.mean(
                geodesic_angle(
                    sample_class(i, self.cfg, self.rng, n=600), self.means[i]
                )
                <= np.pi / 6
            )
            for i in range(self.k)
        ]
        assert np.mean(fr) >= 0.95

    def test_angular_variant_in_cone(self):
        fr = [
            np.mean(
                geodesic_angle(
                    sample_class(i, self.cfg, self.rng, n=600, variant="angular"),
                    self.means[i],
                )
                <= np.pi / 6
            )
            for i in range(self.k)
        ]
        assert np.mean(fr) >= 0.93

    def test_mean_angle_non_increasing_late(self):
        # testable form of the cone-concentration claim: the MC-mean
        # angle to the class mean does not increase over the last half
        # of the chain (one MC sigma of slack)
        i = 0
        n = 2000
        z = uniform_sphere_sample(self.rng, self.d, n)
        angles = []
        for t in range(100, 1, -1):
            z = reverse_step(z, t, i, self.cfg, self.rng)
            if t <= 51:
                angles.append(geodesic_angle(z, self.means[i]).mean())
        diffs = np.diff(angles)
        slack = np.pi / np.sqrt(12 * n)
        assert np.all(diffs <= slack)


class TestHyperconeConstrained:
    def test_every_sample_inside(self):
        cfg, mu = _single_class_cfg(
            8, 20.0, num_steps=60, adaptive=AdaptiveKappaConfig(60.0, 4.0)
        )
        cone = Hypercone(mu, np.pi / 8)
        rng = np.random.default_rng(8)
        out = sample_hypercone_constrained(0, cfg, {0: cone}, rng, n=3000)
        assert np.all(geodesic_angle(out, mu) <= np.pi / 8 + 1e-9)

    def test_shrinking_cone_reduces_spread(self):
        cfg, mu = _single_class_cfg(
            8, 20.0, num_steps=60, adaptive=AdaptiveKappaConfig(60.0, 4.0)
        )
        rng = np.random.default_rng(9)
        spreads = []
        for theta in (np.pi / 4, np.pi / 8):
            out = sample_hypercone_constrained(
                0, cfg, {0: Hypercone(mu, theta)}, rng, n=3000
            )
            spreads.append(geodesic_angle(out, mu).std())
        assert spreads[1] < spreads[0]

    def test_full_sphere_no_adaptive_matches_sample_class(self):
        # with the whole sphere as support and the gate disabled the
        # constrained sampler must reduce to the plain chain
        cfg, mu = _single_class_cfg(8, 20.0, num_steps=60)
        cone = Hypercone(mu, np.pi)
        a = sample_hypercone_constrained(
            0, cfg, {0: cone}, np.random.default_rng(10), n=4000
        )
        b = sample_class(0, cfg, np.random.default_rng(11), n=4000)
        ca, cb = np.mean(a @ mu), np.mean(b @ mu)
        sa = np.std(a @ mu) / np.sqrt(4000)
        sb = np.std(b @ mu) / np.sqrt(4000)
        assert abs(ca - cb) <= 4 * np.hypot(sa, sb)

    def test_determinism(self):
        cfg, mu = _single_class_cfg(
            8, 20.0, num_steps=40, adaptive=AdaptiveKappaConfig(60.0, 4.0)
        )
        cone = {0: Hypercone(mu, np.pi / 6)}
        a = sample_hypercone_constrained(0, cfg, cone, np.random.default_rng(12), n=32)
        b = sample_hypercone_constrained(0, cfg, cone, np.random.default_rng(12), n=32)
        np.testing.assert_array_equal(a, b)

    def test_zero_radius_cone_rejected(self):
        cfg, mu = _single_class_cfg(8, 20.0, num_steps=40)
        with pytest.raises(DegenerateCone):
            sample_hypercone_constrained(
                0, cfg, {0: Hypercone(mu, 0.0)}, np.random.default_rng(13)
            )


class TestReverseSde:
    def test_zero_score_zero_sigma_identity(self):
        rng = np.random.default_rng(14)
        z = uniform_sphere_sample(rng, 5)
        out = reverse_sde_step(z, 1, 0.0, 0.01, _zero_score, rng)
        np.testing.assert_allclose(out, z, atol=1e-12)

    def test_langevin_converges_to_target(self):
        mu = E1_3
        model = AnalyticVmfScore(MixtureSpec.equal_weights([VmfParams(mu, 40.0)]))
        rng = np.random.default_rng(15)
        z = uniform_sphere_sample(rng, 3, 4000)
        for _ in range(500):
            z = reverse_sde_step(z, 0, 1.0, 2e-3, model, rng, y=0)
        assert np.mean(z @ mu) >= 0.95

    def test_step_halving_stable(self):
        mu = E1_3
        model = AnalyticVmfScore(MixtureSpec.equal_weights([VmfParams(mu, 40.0)]))

        def run(steps, dt, seed):
            rng = np.random.default_rng(seed)
            z = uniform_sphere_sample(rng, 3, 4000)
            for _ in range(steps):
                z = reverse_sde_step(z, 0, 1.0, dt, model, rng, y=0)
            return np.mean(z @ mu)

        assert abs(run(500, 2e-3, 16) - run(1000, 1e-3, 16)) <= 0.02


class TestDualReverse:
    def test_perfect_targets_one_step(self):
        rng = np.random.default_rng(17)
        state = DualState(3.7, np.array([0.0, 1.0, 0.0]))

        def predictors(alpha, direction):
            return np.full_like(alpha, 2.0), np.broadcast_to(E1_3, direction.shape)

        out = dual_reverse_step(state, 1, predictors, 0.0, np.inf, rng)
        assert out.alpha == pytest.approx(2.0)
        np.testing.assert_allclose(out.direction, E1_3)

    def test_bridge_recovers_alpha(self):
        from spherediff.forward import dual_forward_step

        rng = np.random.default_rng(18)
        n, steps, sigma = 10_000, 50, 0.1
        state = DualState(np.full(n, 2.0), np.broadcast_to(E1_3, (n, 3)).copy())
        for _ in range(steps):
            state = dual_forward_step(state, sigma, 5.0, rng)
        model = AnalyticVmfScore(MixtureSpec.equal_weights([VmfParams(E1_3, 20.0)]))
        for t in range(steps, 0, -1):
            def predictors(alpha, direction, t=t):
                mu_alpha = alpha - (alpha - 2.0) / t
                s = model(direction, t, 0)
                m = direction + 0.1 * s
                return mu_alpha, m / np.linalg.norm(m, axis=-1, keepdims=True)

            sig_t = sigma * np.sqrt((t - 1) / t)
            state = dual_reverse_step(state, t, predictors, sig_t, 50.0, rng)
        assert np.mean(state.alpha) == pytest.approx(2.0, rel=0.02)

    def test_direction_in_cone_rate_matches_pure_sphere(self):
        rng = np.random.default_rng(19)
        n, steps = 4000, 50
        model = AnalyticVmfScore(MixtureSpec.equal_weights([VmfParams(E1_3, 20.0)]))
        state = DualState(
            np.full(n, 2.0), uniform_sphere_sample(rng, 3, n)
        )
        zs = state.direction.copy()
        for t in range(steps, 0, -1):
            def predictors(alpha, direction, t=t):
                s = model(direction, t, 0)
                m = direction + 0.1 * s
                return alpha, m / np.linalg.norm(m, axis=-1, keepdims=True)

            state = dual_reverse_step(state, t, predictors, 0.0, 50.0, rng)
            s = model(zs, t, 0)
            m = zs + 0.1 * s
            m /= np.linalg.norm(m, axis=-1, keepdims=True)
            from spherediff.vmf import sample_vmf_batch

            zs = sample_vmf_batch(rng, m, 50.0)
        cone = np.pi / 6
        rate_dual = np.mean(geodesic_angle(state.direction, E1_3) <= cone)
        rate_sphere = np.mean(geodesic_angle(zs, E1_3) <= cone)
        assert rate_dual == pytest.approx(rate_sphere, abs=0.02)


class TestElboDiagnostics:
    def _forward(self, num_steps=12, d=3, seed=20):
        rng = np.random.default_rng(seed)
        sched = make_schedule(num_steps)
        z0 = np.eye(d)[0]
        traj = forward_trajectory(z0, sched, "vmf", rng)
        kappas = 1.0 / np.tan(sched.thetas)
        return traj.states, kappas

    def test_matched_reverse_gives_zero_kls(self):
        states, kappas = self._forward()
        num_steps = len(kappas)
        # reverse transition t + 1 must equal the forward law of z_t
        reverse_means = [states[0]] + [states[t - 1] for t in range(1, num_steps)]
        reverse_kappas = np.concatenate([[kappas[0]], kappas[:-1]])
        out = elbo_diagnostics(states, kappas, reverse_means, reverse_kappas)
        # interior terms vanish identically; the terminal term compares
        # against uniform and is tiny because kappa_T is nearly zero
        assert np.allclose(out["kl_terms"][:-1], 0.0, atol=1e-10)
        assert out["kl_terms"][-1] <= 1e-9

    def test_nonnegative_and_finite_random(self):
        states, kappas = self._forward(seed=21)
        rng = np.random.default_rng(22)
        num_steps = len(kappas)
        reverse_means = [uniform_sphere_sample(rng, 3) for _ in range(num_steps)]
        reverse_kappas = rng.uniform(0.5, 10.0, size=num_steps)
        out = elbo_diagnostics(states, kappas, reverse_means, reverse_kappas)
        assert all(k >= -1e-12 for k in out["kl_terms"])
        assert np.isfinite(out["total"]) or out["reconstruction"] == np.inf

    def test_truncated_reconstruction_matches_direct_mc(self):
        states, kappas = self._forward(num_steps=2, d=3, seed=23)
        cone = Hypercone(states[0], np.pi / 3)
        mean1 = states[0]
        out = elbo_diagnostics(
            states,
            kappas,
            [mean1, states[0]],
            np.array([5.0, kappas[0]]),
            recon_cone=cone,
            rng=np.random.default_rng(24),
            mc_n=400_000,
        )
        p = VmfParams(mean1, 5.0)
        log_z = truncated_log_norm_mc(
            np.random.default_rng(25), p, cone, n=400_000
        )
        direct = -(5.0 * float(states[0] @ mean1) - log_z)
        assert out["reconstruction"] == pytest.approx(direct, rel=0.02)
