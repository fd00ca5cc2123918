"""Primitives for points, angles, projections, and cones on S^{d-1}.

All operations accept a single vector or an (..., d) batch and are pure;
samplers take an explicit numpy Generator.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMean, DegenerateVector, DimensionMismatch

NORM_EPS = 1e-12
MEAN_EPS = 1e-9


def project_to_sphere(v):
    """Normalize onto the unit sphere; idempotent on unit vectors."""
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm <= NORM_EPS):
        raise DegenerateVector("cannot project a near-zero vector onto the sphere")
    return v / norm


def unit_vector(coords):
    """Validated construction of a point on S^{d-1} (d >= 2)."""
    coords = np.asarray(coords, dtype=float)
    if coords.shape[-1] < 2:
        raise DimensionMismatch("sphere points need dimension >= 2")
    return project_to_sphere(coords)


def _check_same_dim(a, b):
    if a.shape[-1] != b.shape[-1]:
        raise DimensionMismatch(
            f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}"
        )


def geodesic_angle(a, b):
    """Angle arccos(a.b) in [0, pi].

    The dot product is clamped to [-1, 1] so that rounding on
    near-identical vectors cannot push arccos out of domain.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_same_dim(a, b)
    dot = np.clip(np.sum(a * b, axis=-1), -1.0, 1.0)
    return np.arccos(dot)


def tangent_project(x, v):
    """Project ambient v onto the tangent space at x: (I - x x^T) v."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_same_dim(x, v)
    return v - np.sum(x * v, axis=-1, keepdims=True) * x


@dataclass(frozen=True)
class Hypercone:
    """Closed cone {z : angle(z, axis) <= theta}, theta in [0, pi]."""

    axis: np.ndarray
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "axis", unit_vector(self.axis))
        if not 0.0 <= self.theta <= np.pi:
            raise ValueError(f"cone angle must lie in [0, pi], got {self.theta}")


def in_hypercone(x, cone):
    """Closed-boundary membership test, angle(x, axis) <= theta."""
    x = np.asarray(x, dtype=float)
    _check_same_dim(x, cone.axis)
    dot = np.clip(np.sum(x * cone.axis, axis=-1), -1.0, 1.0)
    return dot >= np.cos(cone.theta)


def spherical_mean(points):
    """Normalized arithmetic mean (extrinsic mean, the vMF MLE direction)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("need a nonempty (n, d) array of points")
    mean = pts.mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm <= MEAN_EPS:
        raise DegenerateMean("points cancel; no usable mean direction")
    return mean / norm


def uniform_sphere_sample(rng, d, n=None):
    """Uniform draw(s) on S^{d-1} via normalized Gaussians."""
    if d < 2:
        raise DimensionMismatch("sphere points need dimension >= 2")
    size = (1 if n is None else n, d)
    g = rng.standard_normal(size)
    norms = np.linalg.norm(g, axis=-1)
    while np.any(norms <= NORM_EPS):  # probability-zero guard
        bad = norms <= NORM_EPS
        g[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(g, axis=-1)
    out = g / norms[:, None]
    return out[0] if n is None else out
