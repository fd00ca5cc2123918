"""Experiment configuration.

Configs are flat ``key = value`` text files with dotted section keys and
``#`` comments; every field has a default, the seed included, so an
empty config is runnable. Parse errors carry line numbers.
"""

from dataclasses import dataclass, field, fields

from .errors import ConfigError


@dataclass
class ExperimentConfig:
    dimension: int = 8
    classes: int = 4
    kappa_class: float = 20.0
    margin: float = 1.0471975511965976  # pi / 3
    n_train_per_class: int = 4000
    n_gen_per_class: int = 500

    schedule_steps: int = 100
    schedule_shape: str = "linear"

    sampler_variant: str = "hypercone"  # score | angular | hypercone
    eta_policy: str = "constant"  # constant | decaying
    eta_value: float = 0.05

    adaptive_enabled: bool = True
    adaptive_kappa_max: float = 60.0
    adaptive_beta: float = 4.0

    metrics_percentile: float = 95.0
    metrics_subcones: int = 5

    baseline_enabled: bool = True

    train_enabled: bool = False
    train_epochs: int = 60
    train_batch: int = 128
    train_lr: float = 1e-3
    train_momentum: float = 0.9
    train_loss: str = "mse"
    train_hidden: int = 64

    seed: int = 0
    threads: int = 1
    out_dir: str = "results"


_KEY_MAP = {
    "dimension": "dimension",
    "classes": "classes",
    "kappa.class": "kappa_class",
    "margin": "margin",
    "data.train_per_class": "n_train_per_class",
    "data.gen_per_class": "n_gen_per_class",
    "schedule.steps": "schedule_steps",
    "schedule.shape": "schedule_shape",
    "sampler.variant": "sampler_variant",
    "eta.policy": "eta_policy",
    "eta.value": "eta_value",
    "adaptive.enabled": "adaptive_enabled",
    "adaptive.kappa_max": "adaptive_kappa_max",
    "adaptive.beta": "adaptive_beta",
    "metrics.percentile": "metrics_percentile",
    "metrics.subcones": "metrics_subcones",
    "baseline.enabled": "baseline_enabled",
    "train.enabled": "train_enabled",
    "train.epochs": "train_epochs",
    "train.batch": "train_batch",
    "train.lr": "train_lr",
    "train.momentum": "train_momentum",
    "train.loss": "train_loss",
    "train.hidden": "train_hidden",
    "seed": "seed",
    "threads": "threads",
    "out": "out_dir",
}

_VALID = {
    "schedule_shape": {"linear", "cosine"},
    "sampler_variant": {"score", "angular", "hypercone"},
    "eta_policy": {"constant", "decaying"},
    "train_loss": {"mse", "cosine", "geodesic"},
}


def _coerce(name, text, line):
    ftype = {f.name: f.type for f in fields(ExperimentConfig)}[name]
    try:
        if ftype == "bool" or ftype is bool:
            low = text.lower()
            if low in ("true", "on", "yes", "1"):
                return True
            if low in ("false", "off", "no", "0"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if ftype == "int" or ftype is int:
            return int(text)
        if ftype == "float" or ftype is float:
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"line {line}: {exc}") from None


def parse_config(path):
    """Read a key = value config file into an ExperimentConfig."""
    cfg = ExperimentConfig()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = (part.strip() for part in text.split("=", 1))
            if key not in _KEY_MAP:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            name = _KEY_MAP[key]
            setattr(cfg, name, _coerce(name, value, lineno))
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    for name, allowed in _VALID.items():
        if getattr(cfg, name) not in allowed:
            raise ConfigError(
                f"{name} must be one of {sorted(allowed)}, got {getattr(cfg, name)!r}"
            )
    if cfg.dimension < 2:
        raise ConfigError("dimension must be >= 2")
    if cfg.classes < 1:
        raise ConfigError("need at least one class")
    if cfg.schedule_steps < 2:
        raise ConfigError("schedule needs at least 2 steps")
    if not 0 < cfg.metrics_percentile <= 100:
        raise ConfigError("percentile must lie in (0, 100]")
    if cfg.metrics_subcones < 1:
        raise ConfigError("need at least one sub-cone")
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    return cfg


def config_echo(cfg):
    """The config as a flat dict with file keys, for report embedding."""
    return {key: getattr(cfg, name) for key, name in sorted(_KEY_MAP.items())}
