"""Experiment orchestration.

Builds synthetic benchmarks, runs the spherical pipeline and the
ambient variance-preserving Gaussian baseline over the same class
statistics, computes metrics for both, and emits deterministic
artifacts. Sampling parallelizes across classes with pre-split seed
streams, so results do not depend on the worker count.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .config import config_echo, validate_config
from .data import generate_synthetic
from .geometry import project_to_sphere
from .metrics import evaluate_samples, fit_class_stats
from .report import emit_report, report_dict
from .reverse import (
    ReverseConfig,
    constant_etas,
    decaying_etas,
    sample_class,
    sample_hypercone_constrained,
)
from .schedules import AdaptiveKappaConfig, make_schedule
from .scores import AnalyticVmfScore, MixtureSpec, MlpScoreNet, train_score
from .vmf import (
    VmfParams,
    cap_probability_s2,
    coverage_lower_bound,
    fit_vmf,
    sample_vmf,
    separation_report,
)

COVERAGE_KAPPAS = (1.0, 5.0, 10.0, 20.0)
COVERAGE_THETAS = (np.pi / 6, np.pi / 4, np.pi / 3, np.pi / 2)
COVERAGE_DIMS = (3, 16)


def _pool_map(fn, args_list, threads):
    if threads <= 1 or len(args_list) <= 1:
        return [fn(*args) for args in args_list]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda args: fn(*args), args_list))


def build_reverse_config(cfg, schedule, score_model, class_cones):
    etas = (
        constant_etas(schedule.num_steps, cfg.eta_value)
        if cfg.eta_policy == "constant"
        else decaying_etas(schedule.num_steps, cfg.eta_value)
    )
    adaptive = (
        AdaptiveKappaConfig(cfg.adaptive_kappa_max, cfg.adaptive_beta)
        if cfg.adaptive_enabled
        else None
    )
    return ReverseConfig(
        dim=cfg.dimension,
        schedule=schedule,
        score_model=score_model,
        etas=etas,
        class_cones=class_cones,
        adaptive=adaptive,
    )


def fit_score_model(dataset, label_order):
    """Analytic mixture score from per-class moment fits."""
    comps = []
    for label in label_order:
        pts = dataset.vectors[dataset.labels == label]
        comps.append(fit_vmf(pts))
    return AnalyticVmfScore(MixtureSpec.equal_weights(comps))


def train_score_model(cfg, dataset, label_order, schedule, rng):
    """Small trained score net as the pipeline's score model."""
    label_idx = {label: k for k, label in enumerate(label_order)}
    y = np.array([label_idx[label] for label in dataset.labels])
    net = MlpScoreNet(
        cfg.dimension,
        schedule.num_steps,
        len(label_order),
        hidden=(cfg.train_hidden, cfg.train_hidden),
        seed=cfg.seed,
    )
    net, curve = train_score(
        net,
        dataset.vectors,
        y,
        schedule,
        loss_kind=cfg.train_loss,
        epochs=cfg.train_epochs,
        rng=rng,
        batch_size=cfg.train_batch,
        lr=cfg.train_lr,
        momentum=cfg.train_momentum,
    )
    return net, curve


def sample_spherical_pipeline(cfg, rev_cfg, stats, label_order, seed_seq):
    """n_gen_per_class reverse-chain samples per class."""
    cones = {k: stats.cone(label) for k, label in enumerate(label_order)}
    streams = seed_seq.spawn(len(label_order))

    def one_class(k, child):
        rng = np.random.default_rng(child)
        if cfg.sampler_variant == "hypercone":
            vecs = sample_hypercone_constrained(
                k, rev_cfg, cones, rng, n=cfg.n_gen_per_class
            )
        else:
            variant = "score" if cfg.sampler_variant == "score" else "angular"
            vecs = sample_class(k, rev_cfg, rng, n=cfg.n_gen_per_class, variant=variant)
        return vecs

    results = _pool_map(
        one_class, [(k, streams[k]) for k in range(len(label_order))], cfg.threads
    )
    vectors = np.concatenate(results)
    labels = np.repeat(label_order, cfg.n_gen_per_class)
    return vectors, labels


def gaussian_vp_reverse(rng, ambient_mean, ambient_var, alphabars, n):
    """Ancestral variance-preserving chain with the exact score of the
    diffused isotropic Gaussian fit; returns ambient terminal points."""
    d = ambient_mean.size
    x = rng.standard_normal((n, d))
    num_steps = len(alphabars)
    for t in range(num_steps, 0, -1):
        ab_t = alphabars[t - 1]
        ab_prev = alphabars[t - 2] if t >= 2 else 1.0
        alpha_t = ab_t / ab_prev
        var_t = ab_t * ambient_var + (1.0 - ab_t)
        score = (np.sqrt(ab_t) * ambient_mean - x) / var_t
        mean = (x + (1.0 - alpha_t) * score) / np.sqrt(alpha_t)
        if t > 1:
            sigma = np.sqrt((1.0 - alpha_t) * (1.0 - ab_prev) / (1.0 - ab_t))
            x = mean + sigma * rng.standard_normal((n, d))
        else:
            x = mean
    return x


def sample_gaussian_pipeline(cfg, dataset, schedule, label_order, seed_seq):
    """Per-class VP baseline on the same angular schedule (alphabar =
    cos^2 theta), projected back to the sphere for evaluation."""
    alphabars = np.cos(schedule.thetas) ** 2
    streams = seed_seq.spawn(len(label_order))

    def one_class(k, child):
        rng = np.random.default_rng(child)
        pts = dataset.vectors[dataset.labels == label_order[k]]
        mean = pts.mean(axis=0)
        var = float(np.mean(np.sum((pts - mean) ** 2, axis=1)) / cfg.dimension)
        raw = gaussian_vp_reverse(rng, mean, var, alphabars, cfg.n_gen_per_class)
        return project_to_sphere(raw)

    results = _pool_map(
        one_class, [(k, streams[k]) for k in range(len(label_order))], cfg.threads
    )
    vectors = np.concatenate(results)
    labels = np.repeat(label_order, cfg.n_gen_per_class)
    return vectors, labels


def coverage_grid(rng, n=20_000, dims=COVERAGE_DIMS):
    """Empirical cone coverage against the exponential bound."""
    rows = []
    for d in dims:
        mu = np.zeros(d)
        mu[0] = 1.0
        for kappa in COVERAGE_KAPPAS:
            draws = sample_vmf(rng, VmfParams(mu, kappa), n)
            cosines = draws @ mu
            for theta in COVERAGE_THETAS:
                emp = float(np.mean(cosines >= np.cos(theta)))
                sigma = float(np.sqrt(max(emp * (1 - emp), 1e-12) / n))
                bound = coverage_lower_bound(kappa, theta)
                row = {
                    "kind": "coverage",
                    "d": int(d),
                    "kappa": float(kappa),
                    "theta": float(theta),
                    "bound": bound,
                    "empirical": emp,
                    "mc_sigma": sigma,
                    "holds": bool(emp >= bound - 3 * sigma),
                }
                if d == 3:
                    row["exact"] = float(cap_probability_s2(kappa, theta))
                rows.append(row)
    return rows


def separation_grid(rng, n=20_000):
    rows = []
    for kappa in COVERAGE_KAPPAS:
        for theta in (np.pi / 6, np.pi / 3, np.pi / 2):
            rep = separation_report(rng, kappa, theta, d=3, n=n)
            rep["kind"] = "separation"
            rows.append(rep)
    return rows


def run_experiment(cfg, out_dir=None, with_bounds=True):
    """Full pipeline: data, stats, both samplers, metrics, artifacts.

    Returns (report, extras) where extras carries the raw sample arrays
    for further analysis. Deterministic in (config, seed).
    """
    validate_config(cfg)
    ss = np.random.SeedSequence(cfg.seed)
    data_ss, vmf_ss, gauss_ss, bounds_ss, train_ss = ss.spawn(5)

    data_rng = np.random.default_rng(data_ss)
    dataset, _means = generate_synthetic(
        data_rng,
        cfg.dimension,
        cfg.classes,
        cfg.n_train_per_class,
        cfg.kappa_class,
        margin=cfg.margin,
    )
    label_order = sorted(set(dataset.labels))
    stats = fit_class_stats(
        dataset.vectors,
        dataset.labels,
        percentile=cfg.metrics_percentile,
        n_subcones=cfg.metrics_subcones,
    )

    schedule = make_schedule(cfg.schedule_steps, cfg.schedule_shape)
    if cfg.train_enabled:
        score_model, _curve = train_score_model(
            cfg, dataset, label_order, schedule, np.random.default_rng(train_ss)
        )
    else:
        score_model = fit_score_model(dataset, label_order)
    cones = {k: stats.cone(label) for k, label in enumerate(label_order)}
    rev_cfg = build_reverse_config(cfg, schedule, score_model, cones)

    vmf_vectors, vmf_labels = sample_spherical_pipeline(
        cfg, rev_cfg, stats, label_order, vmf_ss
    )
    metrics = {"vmf": evaluate_samples(vmf_vectors, vmf_labels, stats)}
    samples = {"vmf": (vmf_labels, vmf_vectors, stats)}
    histograms = {
        "vmf_angle": _angles_to_mean(vmf_vectors, vmf_labels, stats),
    }

    if cfg.baseline_enabled:
        gauss_vectors, gauss_labels = sample_gaussian_pipeline(
            cfg, dataset, schedule, label_order, gauss_ss
        )
        metrics["gaussian"] = evaluate_samples(gauss_vectors, gauss_labels, stats)
        samples["gaussian"] = (gauss_labels, gauss_vectors, stats)
        histograms["gaussian_angle"] = _angles_to_mean(
            gauss_vectors, gauss_labels, stats
        )

    bounds = []
    if with_bounds:
        bounds_rng = np.random.default_rng(bounds_ss)
        bounds = coverage_grid(bounds_rng, dims=(3,))

    report = report_dict(config_echo(cfg), metrics, bounds)
    paths = []
    if out_dir is not None:
        paths = emit_report(report, out_dir, samples=samples, histograms=histograms)
    extras = {
        "dataset": dataset,
        "stats": stats,
        "samples": samples,
        "paths": paths,
    }
    return report, extras


def _angles_to_mean(vectors, labels, stats):
    from .geometry import geodesic_angle

    out = np.empty(vectors.shape[0])
    labels = np.asarray(labels)
    for label in np.unique(labels):
        mask = labels == label
        out[mask] = geodesic_angle(vectors[mask], stats[label].mu)
    return out


def ablate_schedule(cfg, constants=(2.0, 10.0, 50.0), out_dir=None):
    """Scheduled vs constant concentration, trained end to end.

    Each mode trains its own score net under the corresponding
    corruption (constant kappa sees a single corruption level) and then
    samples with the matching reverse concentration; metrics are
    computed against the shared class statistics.
    """
    validate_config(cfg)
    ss = np.random.SeedSequence(cfg.seed)
    data_ss, train_ss, sample_ss = ss.spawn(3)
    dataset, _ = generate_synthetic(
        np.random.default_rng(data_ss),
        cfg.dimension,
        cfg.classes,
        cfg.n_train_per_class,
        cfg.kappa_class,
        margin=cfg.margin,
    )
    label_order = sorted(set(dataset.labels))
    label_idx = {label: k for k, label in enumerate(label_order)}
    y_all = np.array([label_idx[label] for label in dataset.labels])
    stats = fit_class_stats(
        dataset.vectors,
        dataset.labels,
        percentile=cfg.metrics_percentile,
        n_subcones=cfg.metrics_subcones,
    )
    schedule = make_schedule(cfg.schedule_steps, cfg.schedule_shape)

    modes = [("scheduled", None)] + [(f"constant_{c:g}", float(c)) for c in constants]
    train_streams = train_ss.spawn(len(modes))
    sample_streams = sample_ss.spawn(len(modes))
    rows = []
    for i, (name, kappa_const) in enumerate(modes):
        train_rng = np.random.default_rng(train_streams[i])
        net = MlpScoreNet(
            cfg.dimension,
            schedule.num_steps,
            cfg.classes,
            hidden=(cfg.train_hidden, cfg.train_hidden),
            seed=cfg.seed,
        )
        net, _curve = train_score(
            net,
            dataset.vectors,
            y_all,
            schedule,
            loss_kind=cfg.train_loss,
            epochs=cfg.train_epochs,
            rng=train_rng,
            batch_size=cfg.train_batch,
            lr=cfg.train_lr,
            momentum=cfg.train_momentum,
            kappa_const=kappa_const,
        )
        rev_cfg = ReverseConfig(
            dim=cfg.dimension,
            schedule=schedule,
            score_model=net,
            etas=constant_etas(schedule.num_steps, cfg.eta_value),
            kappa_const=kappa_const,
        )
        streams = sample_streams[i].spawn(len(label_order))
        vecs = []
        for k in range(len(label_order)):
            rng = np.random.default_rng(streams[k])
            vecs.append(sample_class(k, rev_cfg, rng, n=cfg.n_gen_per_class))
        vectors = np.concatenate(vecs)
        labels = np.repeat(label_order, cfg.n_gen_per_class)
        rep = evaluate_samples(vectors, labels, stats)
        rows.append(
            {
                "mode": name,
                "kappa_const": kappa_const,
                "hcr": rep.hcr,
                "hds": rep.hds,
                "cosine_mean": rep.cosine_mean,
                "cosine_std": rep.cosine_std,
                "n": rep.n_samples,
            }
        )
    result = {"modes": rows, "config_echo": config_echo(cfg)}
    if out_dir is not None:
        from .report import write_report_json
        from pathlib import Path

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_report_json(result, out / "ablation.json")
    return result
