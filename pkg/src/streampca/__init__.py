"""Streaming PCA for stationary time series.

The package estimates the top-r eigenspace of the stationary covariance of
a dependent data stream with a downsampled stochastic subspace iteration,
and ships the generators, estimators and diagnostics needed to check the
iteration's predicted behavior (exponential traverse rates, Ornstein-
Uhlenbeck fluctuations near stationary points, stage-time formulas) at
desk scale.
"""

from .linalg import (
    SpectralTruth,
    lyapunov_stationary,
    orthonormalize,
    singular_values,
    sym_eig,
)
from .timeseries import (
    CopulaModel,
    GvarModel,
    StreamHandle,
    VarModel,
    copula_step,
    derive_stream_seed,
    gvar_step,
    model_from_config,
    parse_matrix_expr,
    random_orthogonal,
    rotated_var_model,
    var_step,
    warm_up,
)
from .estimator import (
    BiasReport,
    DownsamplePlan,
    bias_probe,
    block_estimate,
    var_conditional_bias,
    var_kappa_rho,
)
from .solver import (
    Frame,
    RunConfig,
    TrajectoryRecord,
    eta_at,
    gha_step,
    init_at_stationary_point,
    init_random,
    oja_step,
    paper_annealing_table,
    run,
)
from .diagnostics import (
    AngleSet,
    EnsembleReport,
    OUReference,
    StageTimePrediction,
    ZetaCoordinates,
    ensemble_stats,
    estimate_zeta_drift,
    gamma_tail,
    gamma_tilde,
    inverse_normal_cdf,
    ode_rates,
    ode_reference,
    ou_moments,
    principal_angles,
    stage_label,
    stage_times,
    zeta_transform,
)
from .experiments import (
    run_bias_probe,
    run_block_sweep,
    run_experiment,
    run_ou_ensemble,
    run_realdata,
    run_trajectory,
    truth_for_model,
)

__version__ = "0.1.0"
