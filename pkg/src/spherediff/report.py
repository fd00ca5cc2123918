"""Result emission: deterministic JSON, per-sample CSV, histogram files.

report.json is byte-identical across reruns of the same (config, seed);
wall-clock metadata goes to a separate run_meta.json so it never
touches the deterministic artifact.
"""

import csv
import json
import time
from pathlib import Path

import numpy as np

REPORT_VERSION = 1


def report_dict(config_echo, metrics, bounds):
    """Assemble the versioned report structure.

    metrics maps pipeline name ("vmf", "gaussian") to MetricReport (or
    an already-plain dict); bounds is a list of bound/empirical rows.
    """
    plain = {}
    for name, rep in metrics.items():
        plain[name] = rep.to_dict() if hasattr(rep, "to_dict") else rep
    return {
        "version": REPORT_VERSION,
        "config_echo": config_echo,
        "metrics": plain,
        "bounds": bounds,
    }


def write_report_json(report, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_samples_csv(path, labels, vectors, stats):
    """One row per generated sample: label, angle to class mean, and
    cone membership, enough to recompute every metric."""
    from .geometry import geodesic_angle

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "angle_to_mean", "in_cone"])
        for label, vec in zip(labels, vectors):
            cls = stats[label]
            angle = float(geodesic_angle(vec, cls.mu))
            writer.writerow([label, repr(angle), int(angle <= cls.theta_max)])


def write_histogram(path, values, bins=40, value_range=(0.0, np.pi)):
    """Gnuplot-friendly whitespace table: bin center, count."""
    counts, edges = np.histogram(values, bins=bins, range=value_range)
    centers = 0.5 * (edges[:-1] + edges[1:])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# bin_center count\n")
        for c, n in zip(centers, counts):
            fh.write(f"{c:.8f} {int(n)}\n")
    return counts


def emit_report(report, out_dir, samples=None, histograms=None):
    """Write report.json plus optional per-sample and histogram files.

    samples: dict name -> (labels, vectors, stats)
    histograms: dict name -> angle array
    Returns the list of written paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "report.json"
    write_report_json(report, path)
    written.append(path)

    for name, (labels, vectors, stats) in (samples or {}).items():
        path = out / f"samples_{name}.csv"
        write_samples_csv(path, labels, vectors, stats)
        written.append(path)

    for name, values in (histograms or {}).items():
        path = out / f"hist_{name}.dat"
        write_histogram(path, values)
        written.append(path)

    meta = out / "run_meta.json"
    with open(meta, "w", encoding="utf-8") as fh:
        json.dump({"written_unix_time": time.time()}, fh)
        fh.write("\n")
    written.append(meta)
    return written
