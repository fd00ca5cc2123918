"""Evaluation metrics for generated directions.

Class statistics come from the data itself: the extrinsic mean gives
the cone axis and a percentile of the angles gives the cone radius.
The coverage ratio counts samples outside their class cone (lower is
better); the difficulty skew weights the in-cone samples by how close
to the axis they land (high values mean easy, near-mean samples).
"""

from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from .errors import DegenerateCone, EmptyAfterExclusion, UnknownLabel
from .geometry import Hypercone, geodesic_angle, spherical_mean


@dataclass(frozen=True)
class ClassConeStats:
    """Axis, radius and sub-cone layout for one class."""

    mu: np.ndarray
    theta_max: float
    edges: np.ndarray  # M + 1 boundaries, 0 .. theta_max
    weights: np.ndarray  # M decreasing sub-cone weights, innermost = 1
    n_fit: int

    def cone(self):
        return Hypercone(self.mu, self.theta_max)


@dataclass(frozen=True)
class ClassStats:
    classes: dict
    percentile: float
    n_subcones: int

    def labels(self):
        return list(self.classes)

    def __getitem__(self, label):
        try:
            return self.classes[label]
        except KeyError:
            raise UnknownLabel(f"no fitted statistics for label {label!r}") from None

    def cone(self, label):
        return self[label].cone()


def subcone_weights(n_subcones):
    """Linearly decreasing weights (M - m + 1) / M, m = 1..M."""
    m = np.arange(1, n_subcones + 1)
    return (n_subcones - m + 1) / n_subcones


def fit_class_stats(vectors, labels, percentile=95.0, n_subcones=5):
    """Per-class axis, percentile radius, and equal-width sub-cones."""
    vectors = np.asarray(vectors, dtype=float)
    labels = np.asarray(labels)
    classes = {}
    for label in np.unique(labels):
        pts = vectors[labels == label]
        if pts.shape[0] < 2:
            raise ValueError(f"class {label!r} needs at least 2 samples")
        mu = spherical_mean(pts)
        angles = geodesic_angle(pts, mu)
        theta_max = float(np.percentile(angles, percentile))
        edges = np.linspace(0.0, theta_max, n_subcones + 1)
        classes[label] = ClassConeStats(
            mu=mu,
            theta_max=theta_max,
            edges=edges,
            weights=subcone_weights(n_subcones),
            n_fit=int(pts.shape[0]),
        )
    return ClassStats(classes=classes, percentile=float(percentile), n_subcones=int(n_subcones))


def _angles_by_class(vectors, labels, stats):
    vectors = np.asarray(vectors, dtype=float)
    labels = np.asarray(labels)
    out = {}
    for label in np.unique(labels):
        cls = stats[label]
        out[label] = geodesic_angle(vectors[labels == label], cls.mu)
    return out


def hcr_per_class(vectors, labels, stats):
    """Fraction of each class's samples outside its cone."""
    return {
        label: float(np.mean(angles > stats[label].theta_max))
        for label, angles in _angles_by_class(vectors, labels, stats).items()
    }


def hcr(vectors, labels, stats):
    """Out-of-cone rate averaged over classes with equal class weight."""
    per_class = hcr_per_class(vectors, labels, stats)
    return float(np.mean(list(per_class.values())))


def _bin_fractions(angles, cls):
    """Fractions per sub-cone among in-cone samples; None when empty."""
    if cls.theta_max <= 0:
        raise DegenerateCone("class cone has zero angular radius")
    inside = angles[angles <= cls.theta_max]
    if inside.size == 0:
        return None
    idx = np.clip(np.searchsorted(cls.edges, inside, side="left"), 1, cls.weights.size)
    counts = np.bincount(idx - 1, minlength=cls.weights.size)
    return counts / inside.size


def hds_per_class(vectors, labels, stats):
    """Weighted sub-cone occupancy per class; out-of-cone samples are
    excluded here (they are the coverage ratio's business)."""
    out = {}
    for label, angles in _angles_by_class(vectors, labels, stats).items():
        fractions = _bin_fractions(angles, stats[label])
        out[label] = (
            None if fractions is None else float(fractions @ stats[label].weights)
        )
    return out


def hds(vectors, labels, stats):
    """Difficulty skew averaged over classes with in-cone mass."""
    per_class = hds_per_class(vectors, labels, stats)
    values = [v for v in per_class.values() if v is not None]
    if not values:
        raise EmptyAfterExclusion("no sample fell inside any class cone")
    return float(np.mean(values))


def cosine_stats(samples, mean_dir):
    """Mean and standard deviation of dot products to a direction."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("need at least one sample")
    dots = samples @ np.asarray(mean_dir, dtype=float)
    return float(dots.mean()), float(dots.std())


UniformityResult = namedtuple(
    "UniformityResult", ["resultant_length", "statistic", "p_value"]
)


def uniformity_test(samples):
    """Rayleigh test of uniformity: statistic d n Rbar^2, chi^2_d tail."""
    samples = np.asarray(samples, dtype=float)
    n, d = samples.shape
    if n < 30:
        raise ValueError("Rayleigh test needs at least 30 samples")
    rbar = float(np.linalg.norm(samples.mean(axis=0)))
    stat = d * n * rbar * rbar
    return UniformityResult(rbar, stat, float(chi2.sf(stat, d)))


@dataclass(frozen=True)
class MetricReport:
    """Bundle of headline metrics plus per-class breakdowns."""

    hcr: float
    hds: float
    cosine_mean: float
    cosine_std: float
    n_samples: int
    per_class: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "hcr": self.hcr,
            "hds": self.hds,
            "cosine_mean": self.cosine_mean,
            "cosine_std": self.cosine_std,
            "n_samples": self.n_samples,
            "per_class": {str(k): v for k, v in sorted(self.per_class.items())},
        }


def evaluate_samples(vectors, labels, stats):
    """Full metric bundle for labeled generated samples."""
    vectors = np.asarray(vectors, dtype=float)
    labels = np.asarray(labels)
    hcr_pc = hcr_per_class(vectors, labels, stats)
    hds_pc = hds_per_class(vectors, labels, stats)
    hds_values = [v for v in hds_pc.values() if v is not None]
    if not hds_values:
        raise EmptyAfterExclusion("no sample fell inside any class cone")
    cos_all = []
    per_class = {}
    for label in np.unique(labels):
        cls = stats[label]
        mask = labels == label
        mean, std = cosine_stats(vectors[mask], cls.mu)
        cos_all.append(vectors[mask] @ cls.mu)
        per_class[label] = {
            "hcr": hcr_pc[label],
            "hds": hds_pc[label],
            "cosine_mean": mean,
            "cosine_std": std,
            "n": int(mask.sum()),
            "theta_max": cls.theta_max,
        }
    cos_all = np.concatenate(cos_all)
    return MetricReport(
        hcr=float(np.mean(list(hcr_pc.values()))),
        hds=float(np.mean(hds_values)),
        cosine_mean=float(cos_all.mean()),
        cosine_std=float(cos_all.std()),
        n_samples=int(vectors.shape[0]),
        per_class=per_class,
    )
