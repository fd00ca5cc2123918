"""Synthetic datasets and CSV ingestion.

Synthetic classes are vMF draws around class means placed by greedy
farthest-point selection under an angular margin. The CSV format is
``label,x0,...,x{d-1}`` with a header row.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import MeanPlacementFailed, NonUnitVector, ParseError
from .geometry import geodesic_angle, uniform_sphere_sample
from .vmf import VmfParams, sample_vmf


@dataclass(frozen=True)
class EmbeddingDataset:
    labels: np.ndarray  # (n,) strings
    vectors: np.ndarray  # (n, d) unit rows
    source: str = "synthetic"
    normalized: bool = True

    @property
    def dim(self):
        return int(self.vectors.shape[1])

    def __len__(self):
        return int(self.vectors.shape[0])


def place_class_means(rng, d, n_classes, margin, pool=4096):
    """Greedy farthest-point placement with a pairwise angular margin.

    Deterministic given the generator; raises MeanPlacementFailed when
    the margin cannot be met for (n_classes, d).
    """
    candidates = uniform_sphere_sample(rng, d, pool)
    chosen = [candidates[0]]
    for _ in range(n_classes - 1):
        dots = np.stack([candidates @ c for c in chosen], axis=1)
        min_angle = np.arccos(np.clip(dots, -1.0, 1.0)).min(axis=1)
        best = int(np.argmax(min_angle))
        if min_angle[best] < margin:
            raise MeanPlacementFailed(
                f"cannot place {n_classes} means with margin {margin:.3f} in d={d}"
            )
        chosen.append(candidates[best])
    return np.stack(chosen)


def generate_synthetic(rng, d, n_classes, n_per_class, kappa_class, margin=np.pi / 4):
    """n_per_class vMF draws around each placed class mean."""
    means = place_class_means(rng, d, n_classes, margin)
    vectors = []
    labels = []
    for k in range(n_classes):
        vectors.append(sample_vmf(rng, VmfParams(means[k], kappa_class), n_per_class))
        labels.extend([f"class{k}"] * n_per_class)
    return (
        EmbeddingDataset(np.array(labels), np.concatenate(vectors)),
        means,
    )


def ingest_csv(path, normalize=False, tol=1e-6):
    """Load ``label,x0,...`` rows; renormalize or reject non-unit rows."""
    labels = []
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        if not header or header[0] != "label":
            raise ParseError("header must start with 'label'", line=1)
        width = len(header) - 1
        if width < 2:
            raise ParseError("need at least two coordinate columns", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width + 1:
                raise ParseError(
                    f"expected {width + 1} fields, got {len(row)}", line=lineno
                )
            try:
                vec = np.array([float(v) for v in row[1:]])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            labels.append(row[0])
            rows.append(vec)
    if not rows:
        raise ParseError("no data rows", line=2)
    vectors = np.stack(rows)
    norms = np.linalg.norm(vectors, axis=1)
    if normalize:
        if np.any(norms <= 1e-12):
            idx = int(np.argmax(norms <= 1e-12))
            raise NonUnitVector("zero row cannot be normalized", row=idx)
        vectors = vectors / norms[:, None]
    else:
        bad = np.abs(norms - 1.0) > tol
        if np.any(bad):
            idx = int(np.argmax(bad))
            raise NonUnitVector(
                f"row norm {norms[idx]:.6f} differs from 1 by more than {tol}",
                row=idx,
            )
    return EmbeddingDataset(
        np.array(labels), vectors, source=str(path), normalized=True
    )


def write_csv(dataset, path):
    """Inverse of ingest_csv."""
    d = dataset.dim
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"x{i}" for i in range(d)])
        for label, vec in zip(dataset.labels, dataset.vectors):
            writer.writerow([label] + [repr(float(v)) for v in vec])


def class_angular_margin(means):
    """Smallest pairwise angle among class means."""
    worst = np.pi
    for i in range(means.shape[0]):
        for j in range(i + 1, means.shape[0]):
            worst = min(worst, float(geodesic_angle(means[i], means[j])))
    return worst
