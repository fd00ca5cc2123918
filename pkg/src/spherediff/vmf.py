"""The von Mises-Fisher family on S^{d-1}.

Densities, moments and the KL divergence are evaluated in log space so
that large concentrations (kappa up to ~1e4) and high dimensions
(d up to ~512) never overflow. Two independent samplers are provided:
Wood's (1994) rejection scheme for any dimension, and an inverse-CDF
sampler for d = 3 that serves as a cross-check oracle. Truncated
sampling restricts draws to a hypercone.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, gammaln, ive, logsumexp

from .errors import (
    DegenerateCone,
    DimensionMismatch,
    EmptyMixture,
    RejectionBudgetExceeded,
)
from .geometry import (
    Hypercone,
    geodesic_angle,
    in_hypercone,
    tangent_project,
    uniform_sphere_sample,
    unit_vector,
)

REJECTION_BUDGET = 1000  # proposals per draw before giving up

_SERIES_TERMS = 80


@dataclass(frozen=True)
class VmfParams:
    """Mean direction and concentration; kappa = 0 is uniform."""

    mu: np.ndarray
    kappa: float

    def __post_init__(self):
        object.__setattr__(self, "mu", unit_vector(self.mu))
        if self.kappa < 0:
            raise ValueError(f"concentration must be >= 0, got {self.kappa}")

    @property
    def dim(self):
        return self.mu.shape[-1]


def log_surface_area(d):
    """log of the surface area of S^{d-1}: 2 pi^{d/2} / Gamma(d/2)."""
    return np.log(2.0) + 0.5 * d * np.log(np.pi) - gammaln(0.5 * d)


def log_bessel_i(nu, x):
    """log I_nu(x) for nu >= 0, x >= 0, stable across regimes.

    Uses the exponentially scaled Bessel function where it does not
    underflow and falls back to the log-space power series
    I_nu(x) = sum_m (x/2)^{2m+nu} / (m! Gamma(m+nu+1)) otherwise
    (x small relative to nu, where the series converges fast).
    """
    x = float(x)
    if x < 0:
        raise ValueError("Bessel argument must be >= 0")
    if x == 0.0:
        return 0.0 if nu == 0 else -np.inf
    scaled = ive(nu, x)
    if scaled > 0:
        return float(np.log(scaled) + x)
    m = np.arange(_SERIES_TERMS)
    terms = (2 * m + nu) * np.log(0.5 * x) - gammaln(m + 1) - gammaln(m + nu + 1)
    return float(logsumexp(terms))


def log_norm_const(d, kappa):
    """log C_d(kappa) of the density C_d(kappa) exp(kappa mu.x).

    C_d(kappa) = kappa^{d/2-1} / ((2 pi)^{d/2} I_{d/2-1}(kappa)); the
    kappa -> 0 limit is 1 / area(S^{d-1}).
    """
    if d < 2:
        raise DimensionMismatch("sphere points need dimension >= 2")
    if kappa < 0:
        raise ValueError("concentration must be >= 0")
    if kappa == 0.0:
        return -log_surface_area(d)
    nu = 0.5 * d - 1.0
    return nu * np.log(kappa) - 0.5 * d * np.log(2 * np.pi) - log_bessel_i(nu, kappa)


def log_density(x, params):
    """log f(x; mu, kappa) = log C_d(kappa) + kappa mu.x; batched over x."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.dim:
        raise DimensionMismatch(
            f"dimension mismatch: {x.shape[-1]} vs {params.dim}"
        )
    return log_norm_const(params.dim, params.kappa) + params.kappa * (x @ params.mu)


def ambient_score(params):
    """Ambient-space gradient of the log density: the constant kappa*mu."""
    return params.kappa * params.mu


def score(x, params):
    """Tangent-projected score (I - x x^T) kappa mu at x; batched over x."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.dim:
        raise DimensionMismatch(
            f"dimension mismatch: {x.shape[-1]} vs {params.dim}"
        )
    return tangent_project(x, np.broadcast_to(ambient_score(params), x.shape))


def mixture_score(x, components, weights, tangent=True):
    """Score of a vMF mixture, sum_c r_c(x) kappa_c mu_c.

    Responsibilities r_c are computed in log space. With ``tangent``
    the result is projected onto the tangent space at x.
    """
    if len(components) == 0:
        raise EmptyMixture("mixture needs at least one component")
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("weights must be nonnegative and sum to 1")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = x[None, :] if single else x
    logp = np.stack(
        [np.log(w) + log_density(xs, c) for c, w in zip(components, weights)],
        axis=-1,
    )
    resp = np.exp(logp - logsumexp(logp, axis=-1, keepdims=True))
    grads = np.stack([ambient_score(c) for c in components], axis=0)
    out = resp @ grads
    if tangent:
        out = tangent_project(xs, out)
    return out[0] if single else out


def bessel_ratio(d, kappa):
    """A_d(kappa) = I_{d/2}(kappa) / I_{d/2-1}(kappa), in [0, 1).

    The mean resultant length of a vMF draw. Scaled Bessel functions are
    used where they stay in range; otherwise the ratio is evaluated by
    the backward recurrence r_nu = 1 / (2(nu+1)/x + r_{nu+1}), which is
    stable when x is small relative to nu.
    """
    if kappa < 0:
        raise ValueError("concentration must be >= 0")
    if kappa == 0.0:
        return 0.0
    nu = 0.5 * d - 1.0
    lo, hi = ive(nu, kappa), ive(nu + 1.0, kappa)
    if lo > 0 and hi > 0:
        return float(hi / lo)
    depth = int(max(nu + 20, kappa + 20))
    r = kappa / (2.0 * (nu + depth + 1.0))
    for k in range(depth, 0, -1):
        r = 1.0 / (2.0 * (nu + k) / kappa + r)
    return float(1.0 / (2.0 * (nu + 1.0) / kappa + r))


def kappa_from_resultant(d, rbar):
    """Invert A_d(kappa) = rbar by bisection (rbar in [0, 1))."""
    if not 0.0 <= rbar < 1.0:
        raise ValueError("resultant length must lie in [0, 1)")
    if rbar == 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while bessel_ratio(d, hi) < rbar:
        hi *= 2.0
        if hi > 1e9:
            raise ValueError("resultant length too close to 1")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if bessel_ratio(d, mid) < rbar:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def fit_vmf(points):
    """Moment fit: spherical mean plus kappa from the resultant length."""
    pts = np.asarray(points, dtype=float)
    resultant = pts.mean(axis=0)
    rbar = float(np.linalg.norm(resultant))
    mu = unit_vector(resultant)
    return VmfParams(mu, kappa_from_resultant(pts.shape[1], min(rbar, 1.0 - 1e-12)))


def _tangent_directions(rng, mu, n):
    """n unit vectors uniform on the great subsphere orthogonal to mu."""
    mu = np.atleast_2d(mu)
    g = rng.standard_normal((n, mu.shape[-1]))
    g -= np.sum(g * mu, axis=-1, keepdims=True) * mu
    norms = np.linalg.norm(g, axis=-1)
    while np.any(norms <= 1e-12):  # probability-zero guard
        bad = norms <= 1e-12
        g[bad] = rng.standard_normal((int(bad.sum()), mu.shape[-1]))
        g[bad] -= np.sum(g[bad] * np.broadcast_to(mu, g.shape)[bad], axis=-1, keepdims=True) * np.broadcast_to(mu, g.shape)[bad]
        norms = np.linalg.norm(g, axis=-1)
    return g / norms[:, None]


def _wood_cosines(rng, d, kappa, n, budget=REJECTION_BUDGET):
    """Cosines to the mean via Wood's rejection scheme; kappa may be (n,)."""
    kappa = np.broadcast_to(np.asarray(kappa, dtype=float), (n,))
    dim = d - 1.0
    b = dim / (np.sqrt(4.0 * kappa**2 + dim * dim) + 2.0 * kappa)
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + dim * np.log1p(-x0 * x0)
    out = np.empty(n)
    todo = np.arange(n)
    for _ in range(budget):
        m = todo.size
        z = rng.beta(0.5 * dim, 0.5 * dim, size=m)
        w = (1.0 - (1.0 + b[todo]) * z) / (1.0 - (1.0 - b[todo]) * z)
        logu = np.log(rng.uniform(size=m))
        ok = kappa[todo] * w + dim * np.log1p(-x0[todo] * w) - c[todo] >= logu
        out[todo[ok]] = w[ok]
        todo = todo[~ok]
        if todo.size == 0:
            return out
    raise RejectionBudgetExceeded(
        f"Wood sampler stalled after {budget} proposals per draw"
    )


def sample_vmf_batch(rng, mus, kappas, budget=REJECTION_BUDGET):
    """One draw per row of mus; kappas is a scalar or per-row array."""
    mus = np.atleast_2d(np.asarray(mus, dtype=float))
    n, d = mus.shape
    w = _wood_cosines(rng, d, kappas, n, budget=budget)
    t = _tangent_directions(rng, mus, n)
    return w[:, None] * mus + np.sqrt(np.clip(1.0 - w * w, 0.0, None))[:, None] * t


def sample_vmf(rng, params, n, budget=REJECTION_BUDGET):
    """n i.i.d. draws from vMF(mu, kappa) as an (n, d) array."""
    if n < 1:
        raise ValueError("need n >= 1")
    mus = np.broadcast_to(params.mu, (n, params.dim))
    return sample_vmf_batch(rng, mus, params.kappa, budget=budget)


def sample_vmf_s2(rng, params, n):
    """Exact inverse-CDF sampler for d = 3, kappa > 0 (cross-check oracle).

    The cosine to the mean has CDF proportional to e^{kappa w}, inverted
    as w = 1 + log(u + (1-u) e^{-2 kappa}) / kappa.
    """
    if params.dim != 3:
        raise DimensionMismatch("inverse-CDF sampler is specific to d = 3")
    if params.kappa <= 0:
        raise ValueError("inverse-CDF sampler needs kappa > 0")
    u = rng.uniform(size=n)
    w = 1.0 + np.log(u + (1.0 - u) * np.exp(-2.0 * params.kappa)) / params.kappa
    w = np.clip(w, -1.0, 1.0)
    t = _tangent_directions(rng, params.mu, n)
    return w[:, None] * params.mu + np.sqrt(np.clip(1.0 - w * w, 0.0, None))[:, None] * t


def cap_probability_s2(kappa, theta):
    """Exact vMF cap mass P(mu.x >= cos theta) for d = 3, kappa > 0."""
    if kappa <= 0:
        raise ValueError("closed form needs kappa > 0")
    theta = np.asarray(theta, dtype=float)
    num = -np.expm1(-kappa * (1.0 - np.cos(theta)))
    den = -np.expm1(-2.0 * kappa)
    return num / den


@dataclass(frozen=True)
class TruncatedVmf:
    """A vMF restricted and renormalized to a hypercone support."""

    base: VmfParams
    support: Hypercone

    def __post_init__(self):
        if self.support.theta <= 0:
            raise DegenerateCone("truncation support must have positive measure")
        if self.base.dim != self.support.axis.shape[-1]:
            raise DimensionMismatch("base and support dimensions differ")


def sample_truncated_vmf(rng, tvmf, n, budget=REJECTION_BUDGET):
    """Rejection sampling from the base vMF, keeping draws inside the cone.

    Raises RejectionBudgetExceeded when the cone holds too little of the
    base mass; callers may re-center the base mean on the cone axis (see
    sample_truncated_vmf_axial) and retry.
    """
    cos_t = np.cos(tvmf.support.theta)
    axis = tvmf.support.axis
    mus = np.broadcast_to(tvmf.base.mu, (n, tvmf.base.dim))
    out = np.empty((n, tvmf.base.dim))
    todo = np.arange(n)
    for _ in range(budget):
        draws = sample_vmf_batch(rng, mus[: todo.size], tvmf.base.kappa)
        ok = draws @ axis >= cos_t
        out[todo[ok]] = draws[ok]
        todo = todo[~ok]
        if todo.size == 0:
            return out
    raise RejectionBudgetExceeded(
        f"truncated sampler stalled after {budget} proposals per draw; "
        "the support cone holds too little of the base vMF mass"
    )


def _truncated_cosines_tilted(rng, d, kappas, w0, budget):
    """Cosines on [w0, 1] with density ~ e^{kappa w} (1-w^2)^{(d-3)/2}.

    Proposes from the exponential tilt (exact inverse CDF) and accepts on
    the polynomial factor. Only for d >= 3, where that factor is bounded.
    kappas is a per-draw array.
    """
    n = kappas.size
    shape = 0.5 * (d - 3.0)
    log_smax = shape * np.log1p(-w0 * w0) if w0 > 0 else 0.0
    out = np.empty(n)
    todo = np.arange(n)
    for _ in range(budget):
        m = todo.size
        k = kappas[todo]
        u = rng.uniform(size=m)
        lo = np.exp(-k * (1.0 - w0))
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(
                k > 1e-12,
                1.0 + np.log(lo + u * (1.0 - lo)) / np.where(k > 1e-12, k, 1.0),
                w0 + u * (1.0 - w0),
            )
        w = np.clip(w, -1.0, 1.0)
        with np.errstate(divide="ignore"):
            logacc = shape * np.log1p(-w * w) - log_smax
        ok = np.log(rng.uniform(size=m)) <= logacc
        out[todo[ok]] = w[ok]
        todo = todo[~ok]
        if todo.size == 0:
            return out
    raise RejectionBudgetExceeded("axial truncated sampler stalled")


def _truncated_cosines_angle_s1(rng, kappas, theta, budget):
    """d = 2 variant: uniform-angle proposal on [-theta, theta]."""
    n = kappas.size
    out = np.empty(n)
    todo = np.arange(n)
    for _ in range(budget):
        m = todo.size
        a = rng.uniform(-theta, theta, size=m)
        ok = np.log(rng.uniform(size=m)) <= kappas[todo] * (np.cos(a) - 1.0)
        out[todo[ok]] = np.cos(a[ok])
        todo = todo[~ok]
        if todo.size == 0:
            return out
    raise RejectionBudgetExceeded("axial truncated sampler stalled")


def sample_truncated_vmf_axial(rng, kappa, cone, n=None, budget=REJECTION_BUDGET):
    """Exact draws from a vMF centered on the cone axis, truncated to it.

    Efficient at every concentration: concentrated bases go through
    plain rejection (most of their mass is already inside the cone),
    diffuse ones through a tilted proposal on the cosine. ``kappa`` may
    be a scalar (with n draws) or a per-draw array.
    """
    d = cone.axis.shape[-1]
    if cone.theta <= 0:
        raise DegenerateCone("truncation support must have positive measure")
    kappas = np.asarray(kappa, dtype=float)
    if kappas.ndim == 0:
        if n is None:
            raise ValueError("n is required with a scalar kappa")
        kappas = np.full(n, float(kappas))
    n = kappas.size
    w0 = float(np.cos(cone.theta))
    w = np.empty(n)
    # cap mass under the Gamma approximation of 1 - cos; decides the regime
    conc = gammainc(0.5 * (d - 1.0), np.maximum(kappas, 1e-300) * (1.0 - w0))
    plain = conc >= 0.3
    if np.any(plain):
        idx = np.flatnonzero(plain)
        mus = np.broadcast_to(cone.axis, (idx.size, d))
        got = np.empty(idx.size)
        todo = np.arange(idx.size)
        for _ in range(budget):
            draws = sample_vmf_batch(rng, mus[: todo.size], kappas[idx[todo]])
            ok = draws @ cone.axis >= w0
            got[todo[ok]] = draws[ok] @ cone.axis
            todo = todo[~ok]
            if todo.size == 0:
                break
        else:
            raise RejectionBudgetExceeded("axial truncated sampler stalled")
        w[idx] = got
    if np.any(~plain):
        idx = np.flatnonzero(~plain)
        if d == 2:
            w[idx] = _truncated_cosines_angle_s1(rng, kappas[idx], cone.theta, budget)
        else:
            w[idx] = _truncated_cosines_tilted(rng, d, kappas[idx], w0, budget)
    t = _tangent_directions(rng, cone.axis, n)
    return w[:, None] * cone.axis + np.sqrt(np.clip(1.0 - w * w, 0.0, None))[:, None] * t


def truncated_log_norm_mc(rng, params, cone, n=100_000):
    """Monte-Carlo estimate of log Z(kappa, C) = log int_C e^{kappa mu.z} dz."""
    z = uniform_sphere_sample(rng, params.dim, n)
    inside = in_hypercone(z, cone)
    if not np.any(inside):
        return -np.inf
    vals = params.kappa * (z[inside] @ params.mu)
    return float(
        logsumexp(vals) - np.log(n) + log_surface_area(params.dim)
    )


def vmf_kl(p, q):
    """Closed-form KL(p || q) between two vMF laws on the same sphere.

    KL = log C_d(k_p) - log C_d(k_q) + (k_p - k_q mu_q.mu_p) A_d(k_p).
    """
    if p.dim != q.dim:
        raise DimensionMismatch("KL needs distributions on the same sphere")
    d = p.dim
    dot = float(np.clip(p.mu @ q.mu, -1.0, 1.0))
    return (
        log_norm_const(d, p.kappa)
        - log_norm_const(d, q.kappa)
        + (p.kappa - q.kappa * dot) * bessel_ratio(d, p.kappa)
    )


def coverage_lower_bound(kappa, theta):
    """The exponential cone-coverage bound 1 - exp(-kappa (1 - cos theta)).

    Dimension-free by construction; it is a true lower bound on the cap
    mass for d = 3 but not in general (see separation_report for the
    companion empirical checker).
    """
    if kappa < 0:
        raise ValueError("concentration must be >= 0")
    val = -np.expm1(-kappa * (1.0 - np.cos(theta)))
    return float(np.clip(val, 0.0, 1.0))


def min_kappa_for_coverage(theta, epsilon):
    """Concentration making the coverage bound equal 1 - epsilon."""
    if theta <= 0:
        raise DegenerateCone("required concentration diverges as theta -> 0")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if theta > np.pi:
        raise ValueError("theta must lie in (0, pi]")
    return float(np.log(1.0 / epsilon) / (1.0 - np.cos(theta)))


def separation_error_bound(kappa, theta):
    """The exponential misclassification bound exp(-kappa (1 - cos theta))."""
    if kappa < 0:
        raise ValueError("concentration must be >= 0")
    if not 0.0 < theta <= np.pi:
        raise ValueError("theta must lie in (0, pi]")
    return float(np.exp(-kappa * (1.0 - np.cos(theta))))


def separation_report(rng, kappa, theta, d=3, n=100_000):
    """Bound vs. empirical misclassification for two classes theta apart.

    Draws from vMF(mu1, kappa) and reports side by side: the exponential
    bound, the mass beyond the half-angle theta/2 (the event the bound
    is derived from), and the fraction of draws nearer mu2 than mu1.
    The bound's validity is reported, never assumed.
    """
    mu1 = np.zeros(d)
    mu1[0] = 1.0
    mu2 = np.zeros(d)
    mu2[0], mu2[1] = np.cos(theta), np.sin(theta)
    draws = sample_vmf(rng, VmfParams(mu1, kappa), n)
    ang1 = geodesic_angle(draws, mu1)
    beyond_half = float(np.mean(ang1 > 0.5 * theta))
    nearer_other = float(np.mean(draws @ mu2 > draws @ mu1))
    return {
        "kappa": float(kappa),
        "theta": float(theta),
        "d": int(d),
        "bound": separation_error_bound(kappa, theta),
        "empirical_beyond_half_angle": beyond_half,
        "empirical_nearest_other": nearer_other,
        "n": int(n),
    }
