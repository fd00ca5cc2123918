"""Forward (noising) processes.

Angular interpolation with projection, the equivalent vMF stepping, a
dual magnitude/direction walk, tangent Brownian motion, and the ambient
variance-preserving Gaussian corruption used as a comparison baseline.
Every spherical step returns unit-norm states.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import (
    geodesic_angle,
    project_to_sphere,
    tangent_project,
    uniform_sphere_sample,
)
from .vmf import sample_vmf_batch


@dataclass(frozen=True)
class Trajectory:
    """States z_0..z_T, one per row; batched trajectories stack a leading
    chain axis so states[t] is (n, d)."""

    states: np.ndarray
    schedule: object

    @property
    def num_steps(self):
        return self.states.shape[0] - 1


@dataclass(frozen=True)
class DualState:
    """Magnitude-direction factorization x = alpha * direction."""

    alpha: np.ndarray
    direction: np.ndarray

    def reconstruct(self):
        alpha = np.asarray(self.alpha, dtype=float)
        return alpha[..., None] * self.direction


ALPHA_FLOOR = 1e-6


def forward_step_angular(z, theta_t, rng):
    """z' = project(cos(theta) z + sin(theta) v), v uniform on the sphere.

    Accepts a single state or an (n, d) batch.
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    zs = z[None, :] if single else z
    v = uniform_sphere_sample(rng, zs.shape[-1], zs.shape[0])
    out = project_to_sphere(np.cos(theta_t) * zs + np.sin(theta_t) * v)
    return out[0] if single else out


def forward_step_vmf(z, kappa_t, rng):
    """One vMF(z, kappa_t) draw; kappa_t = 0 falls back to uniform."""
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    zs = z[None, :] if single else z
    if kappa_t == 0.0:
        out = uniform_sphere_sample(rng, zs.shape[-1], zs.shape[0])
    else:
        out = sample_vmf_batch(rng, zs, kappa_t)
    return out[0] if single else out


def forward_trajectory(z0, schedule, mode, rng):
    """Iterate the chosen step over the schedule; returns z_0..z_T.

    mode is "angular" (interpolate then project, the default pipeline)
    or "vmf" (sample vMF(z_{t-1}, cot theta_t) directly).
    """
    if mode not in ("angular", "vmf"):
        raise ValueError(f"unknown forward mode {mode!r}")
    z0 = np.asarray(z0, dtype=float)
    single = z0.ndim == 1
    zs = z0[None, :] if single else z0
    states = np.empty((schedule.num_steps + 1,) + zs.shape)
    states[0] = zs
    for t in range(1, schedule.num_steps + 1):
        theta = schedule.theta_at(t)
        if mode == "angular":
            states[t] = forward_step_angular(states[t - 1], theta, rng)
        else:
            states[t] = forward_step_vmf(states[t - 1], 1.0 / np.tan(theta), rng)
    if single:
        states = states[:, 0, :]
    return Trajectory(states, schedule)


def dual_forward_step(state, sigma, kappa_t, rng):
    """Independent updates: alpha += sigma * N(0,1), direction ~ vMF.

    The magnitude is clamped to stay positive; a Gaussian walk can cross
    zero, which has no meaning as a norm.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    alpha = np.atleast_1d(np.asarray(state.alpha, dtype=float))
    single = np.asarray(state.alpha).ndim == 0
    new_alpha = alpha + sigma * rng.standard_normal(alpha.shape)
    new_alpha = np.maximum(new_alpha, ALPHA_FLOOR)
    new_dir = forward_step_vmf(state.direction, kappa_t, rng)
    return DualState(new_alpha[0] if single else new_alpha, new_dir)


def brownian_forward_step(z, sigma_t, dt, rng):
    """Euler-Maruyama step of dz = sqrt(2 sigma^2) P_z dw on the sphere."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    zs = z[None, :] if single else z
    noise = rng.standard_normal(zs.shape) * np.sqrt(2.0 * sigma_t**2 * dt)
    out = project_to_sphere(zs + tangent_project(zs, noise))
    return out[0] if single else out


def gaussian_vp_forward(x, alphabar_t, rng):
    """Variance-preserving corruption sqrt(ab) x + sqrt(1 - ab) eps."""
    if not 0.0 < alphabar_t <= 1.0:
        raise ValueError("alphabar must lie in (0, 1]")
    x = np.asarray(x, dtype=float)
    eps = rng.standard_normal(x.shape)
    return np.sqrt(alphabar_t) * x + np.sqrt(1.0 - alphabar_t) * eps


def gaussian_distortion_stats(points, sigma, rng, pairs=2000):
    """How ambient Gaussian noise x + sigma*z treats spherical structure.

    Reports the distribution of noised norms, the concentration of
    ||z||/sqrt(d) around 1, and the mean absolute change of pairwise
    angles before vs after noising.
    """
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = pts.shape
    noise = rng.standard_normal((n, d))
    noised = pts + sigma * noise
    norms = np.linalg.norm(noised, axis=1)
    z_scaled = np.linalg.norm(noise, axis=1) / np.sqrt(d)

    idx_a = rng.integers(0, n, size=pairs)
    idx_b = rng.integers(0, n, size=pairs)
    keep = idx_a != idx_b
    idx_a, idx_b = idx_a[keep], idx_b[keep]
    before = geodesic_angle(pts[idx_a], pts[idx_b])
    after = geodesic_angle(
        project_to_sphere(noised[idx_a]), project_to_sphere(noised[idx_b])
    )
    return {
        "sigma": float(sigma),
        "d": int(d),
        "noised_norm_mean": float(norms.mean()),
        "noised_norm_std": float(norms.std()),
        "z_over_sqrt_d_mean": float(z_scaled.mean()),
        "z_over_sqrt_d_std": float(z_scaled.std()),
        "mean_abs_angle_change": float(np.mean(np.abs(after - before))),
        "mean_pairwise_angle_after": float(after.mean()),
        "n_pairs": int(idx_a.size),
    }
