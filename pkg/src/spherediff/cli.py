"""Command-line interface.

Subcommands cover the pieces (sample-vmf, forward, reverse, train,
metrics, verify-bounds) and the full pipeline (run, ablate-schedule).
Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

import json
import sys
from pathlib import Path

import click
import numpy as np

from .config import ExperimentConfig, parse_config, validate_config
from .data import EmbeddingDataset, ingest_csv, write_csv
from .errors import SphereDiffError
from .metrics import evaluate_samples, fit_class_stats, uniformity_test
from .report import emit_report, report_dict, write_report_json
from .runner import (
    ablate_schedule,
    coverage_grid,
    run_experiment,
    separation_grid,
    train_score_model,
)
from .schedules import make_schedule
from .vmf import VmfParams, bessel_ratio, sample_vmf


def _fail(exc):
    click.echo(f"error: {exc}", err=True)
    sys.exit(getattr(exc, "exit_code", 1))


def _load_config(config_path, seed, out, threads):
    try:
        cfg = parse_config(config_path) if config_path else ExperimentConfig()
        if seed is not None:
            cfg.seed = seed
        if out is not None:
            cfg.out_dir = out
        if threads is not None:
            cfg.threads = threads
        validate_config(cfg)
        return cfg
    except FileNotFoundError as exc:
        _fail_config(f"config file not found: {exc.filename}")
    except SphereDiffError as exc:
        _fail(exc)


def _fail_config(message):
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


def _common(fn):
    fn = click.option("--threads", type=int, default=None, help="Worker threads.")(fn)
    fn = click.option("--out", type=click.Path(), default=None, help="Output directory.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Override the config seed.")(fn)
    fn = click.option(
        "--config", "config_path", type=click.Path(), default=None, help="Config file."
    )(fn)
    return fn


@click.group()
def main():
    """Hyperspherical diffusion experiments."""


@main.command("sample-vmf")
@click.option("--dim", type=int, default=3, show_default=True)
@click.option("--kappa", type=float, default=5.0, show_default=True)
@click.option("--n", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="CSV output path.")
def sample_vmf_cmd(dim, kappa, n, seed, out):
    """Draw vMF samples around e1 and report moment diagnostics."""
    try:
        rng = np.random.default_rng(seed)
        mu = np.zeros(dim)
        mu[0] = 1.0
        draws = sample_vmf(rng, VmfParams(mu, kappa), n)
        rbar = float(np.linalg.norm(draws.mean(axis=0)))
        click.echo(
            json.dumps(
                {
                    "n": n,
                    "dim": dim,
                    "kappa": kappa,
                    "resultant_length": rbar,
                    "expected_resultant": bessel_ratio(dim, kappa),
                    "mean_cosine": float(np.mean(draws @ mu)),
                },
                sort_keys=True,
            )
        )
        if out:
            write_csv(
                EmbeddingDataset(np.array(["vmf"] * n), draws, source="sample-vmf"),
                out,
            )
    except SphereDiffError as exc:
        _fail(exc)


@main.command("forward")
@_common
def forward_cmd(config_path, seed, out, threads):
    """Corrupt synthetic data over the schedule; report terminal uniformity."""
    cfg = _load_config(config_path, seed, out, threads)
    try:
        from .data import generate_synthetic
        from .forward import forward_trajectory

        ss = np.random.SeedSequence(cfg.seed)
        data_ss, fwd_ss = ss.spawn(2)
        dataset, _ = generate_synthetic(
            np.random.default_rng(data_ss),
            cfg.dimension,
            cfg.classes,
            cfg.n_train_per_class,
            cfg.kappa_class,
            margin=cfg.margin,
        )
        schedule = make_schedule(cfg.schedule_steps, cfg.schedule_shape)
        traj = forward_trajectory(
            dataset.vectors, schedule, "angular", np.random.default_rng(fwd_ss)
        )
        result = uniformity_test(traj.states[-1])
        click.echo(
            json.dumps(
                {
                    "n": len(dataset),
                    "steps": schedule.num_steps,
                    "terminal_resultant_length": result.resultant_length,
                    "rayleigh_statistic": result.statistic,
                    "rayleigh_p_value": result.p_value,
                },
                sort_keys=True,
            )
        )
    except SphereDiffError as exc:
        _fail(exc)


@main.command("reverse")
@_common
def reverse_cmd(config_path, seed, out, threads):
    """Generate class-conditional samples with the configured variant."""
    cfg = _load_config(config_path, seed, out, threads)
    cfg.baseline_enabled = False
    try:
        report, extras = run_experiment(cfg, out_dir=None, with_bounds=False)
        labels, vectors, _stats = extras["samples"]["vmf"]
        if out:
            write_csv(
                EmbeddingDataset(np.asarray(labels), vectors, source="reverse"),
                Path(out) / "generated.csv" if Path(out).is_dir() else out,
            )
        click.echo(json.dumps(report["metrics"]["vmf"], sort_keys=True))
    except SphereDiffError as exc:
        _fail(exc)


@main.command("train")
@_common
def train_cmd(config_path, seed, out, threads):
    """Train the score net on synthetic data and save the weights."""
    cfg = _load_config(config_path, seed, out, threads)
    try:
        from .data import generate_synthetic

        ss = np.random.SeedSequence(cfg.seed)
        data_ss, train_ss = ss.spawn(2)
        dataset, _ = generate_synthetic(
            np.random.default_rng(data_ss),
            cfg.dimension,
            cfg.classes,
            cfg.n_train_per_class,
            cfg.kappa_class,
            margin=cfg.margin,
        )
        schedule = make_schedule(cfg.schedule_steps, cfg.schedule_shape)
        label_order = sorted(set(dataset.labels))
        net, curve = train_score_model(
            cfg, dataset, label_order, schedule, np.random.default_rng(train_ss)
        )
        out_dir = Path(cfg.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        weights = out_dir / "score_net.bin"
        net.save(weights)
        with open(out_dir / "loss_curve.csv", "w", encoding="utf-8") as fh:
            fh.write("epoch,loss\n")
            for i, loss in enumerate(curve):
                fh.write(f"{i},{loss!r}\n")
        click.echo(
            json.dumps(
                {
                    "weights": str(weights),
                    "epochs": len(curve),
                    "final_loss": curve[-1] if curve else None,
                },
                sort_keys=True,
            )
        )
    except SphereDiffError as exc:
        _fail(exc)


@main.command("metrics")
@click.option("--data", "data_path", type=click.Path(), required=True)
@click.option("--generated", "gen_path", type=click.Path(), required=True)
@click.option("--percentile", type=float, default=95.0, show_default=True)
@click.option("--subcones", type=int, default=5, show_default=True)
@click.option("--normalize/--no-normalize", default=False, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def metrics_cmd(data_path, gen_path, percentile, subcones, normalize, out):
    """Fit class cones on --data and score --generated against them."""
    try:
        ref = ingest_csv(data_path, normalize=normalize)
        gen = ingest_csv(gen_path, normalize=normalize)
        stats = fit_class_stats(
            ref.vectors, ref.labels, percentile=percentile, n_subcones=subcones
        )
        rep = evaluate_samples(gen.vectors, gen.labels, stats)
        click.echo(json.dumps(rep.to_dict(), sort_keys=True, indent=2))
        if out:
            write_report_json(
                report_dict({"percentile": percentile}, {"generated": rep}, []), out
            )
    except FileNotFoundError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)
    except SphereDiffError as exc:
        _fail(exc)


@main.command("verify-bounds")
@click.option("--n", type=int, default=100_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def verify_bounds_cmd(n, seed, out):
    """Coverage and separation grids: bound vs empirical, cell by cell."""
    try:
        ss = np.random.SeedSequence(seed)
        cov_ss, sep_ss = ss.spawn(2)
        rows = coverage_grid(np.random.default_rng(cov_ss), n=n)
        rows += separation_grid(np.random.default_rng(sep_ss), n=n)
        for row in rows:
            click.echo(json.dumps(row, sort_keys=True))
        if out:
            write_report_json(report_dict({"n": n, "seed": seed}, {}, rows), out)
        failures = [r for r in rows if r["kind"] == "coverage" and not r["holds"]]
        click.echo(
            f"# coverage cells: {sum(r['kind'] == 'coverage' for r in rows)}, "
            f"bound violated in {len(failures)}",
            err=True,
        )
    except SphereDiffError as exc:
        _fail(exc)


@main.command("run")
@_common
@click.option("--baseline", type=click.Choice(["on", "off"]), default=None)
def run_cmd(config_path, seed, out, threads, baseline):
    """Full pipeline: data, both samplers, metrics, report artifacts."""
    cfg = _load_config(config_path, seed, out, threads)
    if baseline is not None:
        cfg.baseline_enabled = baseline == "on"
    try:
        report, _extras = run_experiment(cfg, out_dir=cfg.out_dir)
        click.echo(json.dumps(report["metrics"], sort_keys=True, indent=2))
        click.echo(f"# artifacts in {cfg.out_dir}", err=True)
    except SphereDiffError as exc:
        _fail(exc)


@main.command("ablate-schedule")
@_common
@click.option(
    "--constants",
    default="2,10,50",
    show_default=True,
    help="Comma-separated constant concentrations to compare.",
)
def ablate_cmd(config_path, seed, out, threads, constants):
    """Scheduled vs constant concentration (trained end to end)."""
    cfg = _load_config(config_path, seed, out, threads)
    try:
        values = tuple(float(v) for v in constants.split(",") if v.strip())
    except ValueError:
        _fail_config(f"bad --constants value: {constants!r}")
    try:
        result = ablate_schedule(cfg, constants=values, out_dir=cfg.out_dir)
        click.echo(json.dumps(result["modes"], sort_keys=True, indent=2))
    except SphereDiffError as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
