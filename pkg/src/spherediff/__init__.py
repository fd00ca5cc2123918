"""Hyperspherical diffusion with von Mises-Fisher noise.

Forward angular noising, score-guided reverse sampling into class
hypercones, closed-form bounds with empirical checkers, and
cone-based evaluation metrics, all on S^{d-1}.
"""

from .errors import (
    ConfigError,
    DataError,
    DegenerateCone,
    DegenerateMean,
    DegenerateVector,
    DimensionMismatch,
    EmptyAfterExclusion,
    EmptyMixture,
    InvalidLength,
    MeanPlacementFailed,
    NonFiniteLoss,
    NonUnitVector,
    NumericError,
    ParseError,
    RejectionBudgetExceeded,
    SphereDiffError,
    UnknownLabel,
    ZeroVector,
)
from .geometry import (
    Hypercone,
    geodesic_angle,
    in_hypercone,
    project_to_sphere,
    spherical_mean,
    tangent_project,
    uniform_sphere_sample,
    unit_vector,
)
from .schedules import (
    AdaptiveKappaConfig,
    AngularSchedule,
    ScheduleShape,
    adaptive_kappa,
    kappa_at,
    make_schedule,
)
from .vmf import (
    TruncatedVmf,
    VmfParams,
    bessel_ratio,
    cap_probability_s2,
    coverage_lower_bound,
    fit_vmf,
    kappa_from_resultant,
    log_bessel_i,
    log_density,
    log_norm_const,
    min_kappa_for_coverage,
    mixture_score,
    sample_truncated_vmf,
    sample_truncated_vmf_axial,
    sample_vmf,
    sample_vmf_batch,
    sample_vmf_s2,
    score,
    separation_error_bound,
    separation_report,
    truncated_log_norm_mc,
    vmf_kl,
)
from .forward import (
    DualState,
    Trajectory,
    brownian_forward_step,
    dual_forward_step,
    forward_step_angular,
    forward_step_vmf,
    forward_trajectory,
    gaussian_distortion_stats,
    gaussian_vp_forward,
)
from .scores import (
    AnalyticVmfScore,
    MixtureSpec,
    MlpScoreNet,
    gradient_check,
    loss_cosine,
    loss_geodesic,
    loss_mse,
    train_score,
)
from .reverse import (
    ReverseConfig,
    constant_etas,
    decaying_etas,
    dual_reverse_step,
    elbo_diagnostics,
    reverse_sde_step,
    reverse_step,
    reverse_step_angular,
    sample_class,
    sample_hypercone_constrained,
)
from .metrics import (
    ClassStats,
    MetricReport,
    cosine_stats,
    evaluate_samples,
    fit_class_stats,
    hcr,
    hds,
    uniformity_test,
)
from .data import EmbeddingDataset, generate_synthetic, ingest_csv, write_csv
from .config import ExperimentConfig, parse_config
from .runner import ablate_schedule, run_experiment

__version__ = "0.1.0"
