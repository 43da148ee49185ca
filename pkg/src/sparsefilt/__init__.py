"""Sparse system identification with proportionate NLMS filters and
l1 zero attractors (ZA-PNLMS, RZA-PNLMS), their steady-state mean theory
and a Monte-Carlo harness."""

from .filters import (
    Algorithm,
    FilterConfig,
    FilterRun,
    FilterState,
    nlms_step,
    pnlms_step,
    run_filter,
    rzapnlms_step,
    simulate,
    step,
    zapnlms_step,
)
from .gain import GainParams, compute_gain, compute_gamma, gain_inv_sqrt, gain_sqrt
from .harness import (
    AlgorithmResult,
    ExperimentConfig,
    ExperimentResult,
    InputModel,
    emse_curve,
    export_result,
    extract_bias,
    import_result,
    msd_curve,
    run_experiment,
)
from .signals import (
    SignalBuffer,
    SparseSystem,
    gen_ar1,
    gen_sparse_system,
    gen_white_gaussian,
    paper_system,
    smoke_system,
    system_output,
)
from .theory import (
    CovarianceModel,
    Stability,
    SteadyStateReport,
    angular_discretize_sample,
    check_mu_stability,
    estimate_B,
    predict_bias,
    predict_mean_general,
    predict_steady_gain,
    projection_residual,
    transform_step_check,
)

__version__ = "0.1.0"
