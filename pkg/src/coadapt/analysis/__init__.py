"""Co-adaptation diagnostics, linear-TD stability and the implicit regularizer."""

from coadapt.analysis.lyapunov import (
    LyapunovSolution,
    lyapunov_iterate,
    lyapunov_sigma,
    support_spectral_radius,
)
from coadapt.analysis.metrics import (
    full_gradient_implicit_reg,
    implicit_reg_value,
    label_noise_matrices,
    mean_cosine,
    mean_feature_dot,
    srank,
)
from coadapt.analysis.stability import (
    BORDERLINE,
    NON_CONVERGENT,
    STABLE,
    FeaturePair,
    SimulationResult,
    StabilityReport,
    classify,
    coadaptation_trace_test,
    simulate_linear_td,
    simulate_linear_td_batch,
    stability_spectrum,
    td_matrix,
)
from coadapt.analysis.trace import TRACE_COLUMNS, CheckpointRecord, MetricTrace

__all__ = [
    "BORDERLINE",
    "NON_CONVERGENT",
    "STABLE",
    "TRACE_COLUMNS",
    "CheckpointRecord",
    "FeaturePair",
    "LyapunovSolution",
    "MetricTrace",
    "SimulationResult",
    "StabilityReport",
    "classify",
    "coadaptation_trace_test",
    "full_gradient_implicit_reg",
    "implicit_reg_value",
    "label_noise_matrices",
    "lyapunov_iterate",
    "lyapunov_sigma",
    "mean_cosine",
    "mean_feature_dot",
    "simulate_linear_td",
    "simulate_linear_td_batch",
    "srank",
    "stability_spectrum",
    "support_spectral_radius",
    "td_matrix",
]
