"""Reverse (denoising) samplers and diagnostics.

The main loop follows the score-guided scheme: drift along the score,
project back to the sphere, then draw vMF noise whose concentration
grows as t decreases. Variants: an angular-interpolation update, a
hypercone-constrained sampler with state-dependent concentration and
truncated draws, a tangent reverse SDE, and a dual magnitude/direction
reverse. All chains are batched and deterministic given the generator.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateCone, DegenerateVector
from .forward import DualState, ALPHA_FLOOR
from .geometry import (
    geodesic_angle,
    in_hypercone,
    tangent_project,
    uniform_sphere_sample,
)
from .schedules import adaptive_kappa, kappa_at
from .vmf import (
    VmfParams,
    log_density,
    sample_truncated_vmf_axial,
    sample_vmf_batch,
    truncated_log_norm_mc,
    vmf_kl,
)

_NORM_EPS = 1e-12
_PLAIN_PATIENCE = 25  # rejection rounds before re-centering a truncated draw


def constant_etas(num_steps, eta=0.05):
    return np.full(num_steps, float(eta))


def decaying_etas(num_steps, eta=0.05):
    """eta_t = eta * t / T, honoring the eta_t -> 0 limit near t = 0."""
    return eta * np.arange(1, num_steps + 1) / num_steps


@dataclass
class ReverseConfig:
    """Everything a reverse chain needs.

    score_model is called as model(z, t, y) and must return the ambient
    score; class_cones maps labels to their hypercones (used by the
    adaptive concentration and the constrained sampler); kappa_const
    replaces the scheduled cot(theta_t) to ablate scheduling.
    """

    dim: int
    schedule: object
    score_model: object
    etas: np.ndarray = None
    class_cones: dict = field(default_factory=dict)
    adaptive: object = None
    kappa_const: float = None

    def __post_init__(self):
        if self.etas is None:
            self.etas = constant_etas(self.schedule.num_steps)
        self.etas = np.asarray(self.etas, dtype=float)
        if self.etas.shape != (self.schedule.num_steps,):
            raise ValueError("need one step size per schedule step")
        if np.any(self.etas <= 0):
            raise ValueError("step sizes must be positive")

    def eta_at(self, t):
        return float(self.etas[t - 1])


def _base_kappa(cfg, t):
    if cfg.kappa_const is not None:
        return float(cfg.kappa_const)
    return kappa_at(cfg.schedule, t)


def _step_kappas(cfg, t, z, y):
    """Scheduled concentration, overridden by the adaptive gate inside
    the class cone when both the gate and a cone are configured."""
    base = _base_kappa(cfg, t)
    if cfg.adaptive is None or y not in cfg.class_cones:
        return base
    cone = cfg.class_cones[y]
    ang = geodesic_angle(z, cone.axis)
    return np.maximum(base, adaptive_kappa(ang, cone.theta, cfg.adaptive))


def _drift_project(z, drift, rng):
    """z + drift, renormalized; rows that cancel restart from uniform."""
    m = z + drift
    norms = np.linalg.norm(m, axis=-1)
    bad = norms <= _NORM_EPS
    if np.any(bad):
        m[bad] = uniform_sphere_sample(rng, z.shape[-1], int(bad.sum()))
        norms = np.linalg.norm(m, axis=-1)
    return m / norms[..., None]


def reverse_step(z_t, t, y, cfg, rng):
    """One denoising step: z + eta * score, project, then vMF noise."""
    z = np.asarray(z_t, dtype=float)
    single = z.ndim == 1
    zs = z[None, :] if single else z
    s = np.atleast_2d(cfg.score_model(zs, t, y))
    drift = cfg.eta_at(t) * s
    if single and np.linalg.norm(zs + drift) <= _NORM_EPS:
        raise DegenerateVector("score update cancelled the state")
    kappas = _step_kappas(cfg, t, zs, y)
    m = _drift_project(zs, drift, rng)
    out = sample_vmf_batch(rng, m, kappas)
    return out[0] if single else out


def reverse_step_angular(z_t, t, y, cfg, rng):
    """Angular variant: interpolate toward the normalized score.

    The mean is project(cos(theta_t) z + sin(theta_t) score_hat); a zero
    score falls back to the drift-free mean z itself.
    """
    z = np.asarray(z_t, dtype=float)
    single = z.ndim == 1
    zs = z[None, :] if single else z
    s = np.atleast_2d(cfg.score_model(zs, t, y))
    norms = np.linalg.norm(s, axis=-1, keepdims=True)
    zero = norms[..., 0] <= _NORM_EPS
    s_hat = np.where(zero[..., None], 0.0, s / np.where(norms <= _NORM_EPS, 1.0, norms))
    theta = cfg.schedule.theta_at(t)
    mean = np.cos(theta) * zs + np.sin(theta) * s_hat
    mean[zero] = zs[zero]
    kappas = _step_kappas(cfg, t, zs, y)
    m = _drift_project(np.zeros_like(mean), mean, rng)
    out = sample_vmf_batch(rng, m, kappas)
    return out[0] if single else out


def _run_chain(y, cfg, rng, n, step):
    z = uniform_sphere_sample(rng, cfg.dim, n)
    for t in range(cfg.schedule.num_steps, 1, -1):  # no draw at t = 1
        z = step(z, t, y, cfg, rng)
    return z


def sample_class(y, cfg, rng, n=None, variant="score"):
    """Run the reverse chain t = T..1 from uniform noise; returns z_1.

    With T = 1 no denoising step executes and the uniform draw is
    returned as-is, mirroring the t > 1 guard of the sampling loop.
    """
    step = reverse_step if variant == "score" else reverse_step_angular
    out = _run_chain(y, cfg, rng, 1 if n is None else n, step)
    return out[0] if n is None else out


def sample_hypercone_constrained(y, cfg, class_stats, rng, n=None):
    """Class-guided sampling with truncated draws inside the class cone.

    Each step forms the cone around the empirical class direction, sets
    the concentration by the sigmoid gate on the angular gap, gates the
    score drift on current cone membership, and draws from the truncated
    vMF. Draws that stall under plain rejection are re-centered on the
    cone axis (the documented fallback for a cone nearly disjoint from
    the base mass). Every draw, and hence the terminal sample for any
    T >= 2, lies inside the cone.
    """
    cone = class_stats.cone(y) if hasattr(class_stats, "cone") else class_stats[y]
    if cone.theta <= 0:
        raise DegenerateCone("class cone has zero angular radius")
    num = 1 if n is None else n
    z = uniform_sphere_sample(rng, cfg.dim, num)
    cos_t = np.cos(cone.theta)
    for t in range(cfg.schedule.num_steps, 1, -1):
        ang = geodesic_angle(z, cone.axis)
        if cfg.adaptive is not None:
            kappas = adaptive_kappa(ang, cone.theta, cfg.adaptive)
        else:
            kappas = np.full(num, _base_kappa(cfg, t))
        kappas = np.atleast_1d(np.asarray(kappas, dtype=float))
        s = np.atleast_2d(cfg.score_model(z, t, y))
        gate = (ang <= cone.theta).astype(float)[:, None]
        u = _drift_project(z, cfg.eta_at(t) * gate * s, rng)
        z = _truncated_batch(rng, u, kappas, cone)
        assert np.all(z @ cone.axis >= cos_t - 1e-12)
    return z[0] if n is None else z


def _truncated_batch(rng, mus, kappas, cone, patience=_PLAIN_PATIENCE):
    """Truncated vMF draws with per-row means and concentrations.

    Plain rejection first; rows still empty after ``patience`` rounds are
    drawn from the axis-centered truncated law instead.
    """
    n, d = mus.shape
    cos_t = np.cos(cone.theta)
    out = np.empty((n, d))
    todo = np.arange(n)
    for _ in range(patience):
        draws = sample_vmf_batch(rng, mus[todo], kappas[todo])
        ok = draws @ cone.axis >= cos_t
        out[todo[ok]] = draws[ok]
        todo = todo[~ok]
        if todo.size == 0:
            return out
    out[todo] = sample_truncated_vmf_axial(rng, kappas[todo], cone)
    return out


def reverse_sde_step(z, t, sigma_t, dt, score_model, rng, y=None):
    """Euler-Maruyama step of the reverse-time tangent SDE.

    Drift sigma^2 * tangent score, diffusion sqrt(2 sigma^2 dt) in the
    tangent space, then renormalization.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    zs = z[None, :] if single else z
    s = np.atleast_2d(score_model(zs, t, y))
    drift = sigma_t**2 * tangent_project(zs, s) * dt
    noise = np.sqrt(2.0 * sigma_t**2 * dt) * rng.standard_normal(zs.shape)
    out = _drift_project(zs, drift + tangent_project(zs, noise), rng)
    return out[0] if single else out


def dual_reverse_step(state, t, predictors, sigma_tilde, kappa_tilde, rng):
    """One reverse step of the magnitude/direction factorization.

    ``predictors(alpha, direction)`` returns the Gaussian mean for the
    previous magnitude and the vMF mean direction; sigma_tilde = 0 and
    kappa_tilde = inf make the step deterministic at those targets.
    """
    alpha = np.atleast_1d(np.asarray(state.alpha, dtype=float))
    single = np.asarray(state.alpha).ndim == 0
    direction = np.atleast_2d(state.direction)
    mu_alpha, m_dir = predictors(alpha, direction)
    mu_alpha = np.atleast_1d(np.asarray(mu_alpha, dtype=float))
    m_dir = np.atleast_2d(np.asarray(m_dir, dtype=float))
    new_alpha = mu_alpha + sigma_tilde * rng.standard_normal(alpha.shape)
    new_alpha = np.maximum(new_alpha, ALPHA_FLOOR)
    if np.isinf(kappa_tilde):
        new_dir = m_dir / np.linalg.norm(m_dir, axis=-1, keepdims=True)
    else:
        new_dir = sample_vmf_batch(rng, m_dir, kappa_tilde)
    if single:
        return DualState(new_alpha[0], new_dir[0])
    return DualState(new_alpha, new_dir)


def elbo_diagnostics(
    states,
    forward_kappas,
    reverse_means,
    reverse_kappas,
    recon_cone=None,
    rng=None,
    mc_n=100_000,
):
    """Per-step KL terms of the variational bound plus the reconstruction.

    states is a single trajectory z_0..z_T. The forward transition t is
    vMF(z_{t-1}, forward_kappas[t-1]); the reverse transition t produces
    z_{t-1} from z_t as vMF(reverse_means[t-1], reverse_kappas[t-1]).
    Interior terms compare the two laws of z_t (the reverse one comes
    from transition t+1); the terminal term compares against the uniform
    prior. The reconstruction is -log of the transition-1 density at
    z_0, truncated to recon_cone when given, with the truncation
    constant estimated by Monte Carlo.
    """
    states = np.asarray(states, dtype=float)
    num_steps = states.shape[0] - 1
    forward_kappas = np.asarray(forward_kappas, dtype=float)
    reverse_kappas = np.asarray(reverse_kappas, dtype=float)
    if len(reverse_means) != num_steps or reverse_kappas.size != num_steps:
        raise ValueError("need one reverse transition per step")
    if forward_kappas.size != num_steps:
        raise ValueError("need one forward concentration per step")
    d = states.shape[1]
    kl_terms = []
    for t in range(1, num_steps):
        q_t = VmfParams(states[t - 1], forward_kappas[t - 1])
        p_t = VmfParams(reverse_means[t], reverse_kappas[t])
        kl_terms.append(vmf_kl(q_t, p_t))
    # terminal step against the uniform prior (kappa = 0)
    q_T = VmfParams(states[num_steps - 1], forward_kappas[num_steps - 1])
    axis = np.zeros(d)
    axis[0] = 1.0
    kl_terms.append(vmf_kl(q_T, VmfParams(axis, 0.0)))

    recon_params = VmfParams(reverse_means[0], reverse_kappas[0])
    if recon_cone is None:
        recon = -float(log_density(states[0], recon_params))
    else:
        if rng is None:
            rng = np.random.default_rng(0)
        if not in_hypercone(states[0], recon_cone):
            recon = np.inf
        else:
            log_z = truncated_log_norm_mc(rng, recon_params, recon_cone, mc_n)
            recon = -(recon_params.kappa * float(states[0] @ recon_params.mu) - log_z)
    return {
        "kl_terms": kl_terms,
        "reconstruction": float(recon),
        "total": float(np.sum(kl_terms) + recon),
    }
