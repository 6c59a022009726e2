"""Detection of abrupt variance shifts in time series (SRSD and ICSS)."""

from ._version import __version__
from .errors import (
    ConvergenceError,
    DegenerateSampleError,
    DetectorStateError,
    InputError,
    NumericalError,
    ParameterError,
    VarshiftError,
)
from .icss import CriticalValueTable, centered_cusum, critical_value, icss, max_statistic, simulate_null
from .kernels import (
    GaussianStream,
    f_quantile,
    f_tail_probability,
    huber_weight,
    mad_about_zero,
    regularized_incomplete_beta,
    two_pass_robust_variance,
    two_tailed_f_pvalue,
    variance_ratio_pvalue,
    weighted_variance,
)
from .montecarlo import ExperimentReport, ScenarioSpec, generate_replicate, reproduce_paper_suite, run_experiment
from .preprocess import (
    StepwiseMean,
    TimeSeries,
    ar1_coefficient,
    first_differences,
    lowess_detrend,
    monthly_anomalies,
    prewhiten,
    remove_stepwise_mean,
    running_std,
)
from .srsd import ChangePoint, DetectionResult, DetectorConfig, Direction, SRSDMonitor, critical_variances, detect

__all__ = [
    "__version__",
    "ChangePoint",
    "ConvergenceError",
    "CriticalValueTable",
    "DegenerateSampleError",
    "DetectionResult",
    "DetectorConfig",
    "DetectorStateError",
    "Direction",
    "ExperimentReport",
    "GaussianStream",
    "InputError",
    "NumericalError",
    "ParameterError",
    "SRSDMonitor",
    "ScenarioSpec",
    "StepwiseMean",
    "TimeSeries",
    "VarshiftError",
    "ar1_coefficient",
    "centered_cusum",
    "critical_value",
    "critical_variances",
    "detect",
    "f_quantile",
    "f_tail_probability",
    "first_differences",
    "generate_replicate",
    "huber_weight",
    "icss",
    "lowess_detrend",
    "mad_about_zero",
    "max_statistic",
    "monthly_anomalies",
    "prewhiten",
    "regularized_incomplete_beta",
    "remove_stepwise_mean",
    "reproduce_paper_suite",
    "run_experiment",
    "running_std",
    "simulate_null",
    "two_pass_robust_variance",
    "two_tailed_f_pvalue",
    "variance_ratio_pvalue",
    "weighted_variance",
]
