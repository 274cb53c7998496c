"""Determinantal formulas, scaling limits, and simulation for the
continuous-time TASEP."""

from tasepdet.airy_scaling import (
    ScaledPoint,
    ScanRow,
    SnapReport,
    airy,
    airy_contour_identity,
    airy_log,
    convergence_scan,
    heat_propagator,
    kernel_f1,
    rescaled_kernel,
    scan_csv,
    smoothed_identity_check,
)
from tasepdet.fredholm import (
    DetResult,
    KernelMatrix,
    ThresholdSpec,
    TruncationPolicy,
    TruncationRow,
    assemble_continuum,
    assemble_discrete,
    f1_marginal,
    joint_distribution_continuum,
    joint_distribution_discrete,
    truncation_report,
)
from tasepdet.kernels import (
    CharlierTable,
    LatticePoint,
    PhiFamily,
    PsiFamily,
    build_phi_general,
    charlier,
    kernel_flat,
    kernel_general,
    phi_flat,
    phi_transfer,
    phi_via_charlier,
    psi_flat,
    psi_general,
    s_inverse,
    s_matrix,
)
from tasepdet.schuetz_core import (
    ContourError,
    ContourSpec,
    CrossCheckError,
    DomainComparison,
    FnValue,
    NumericsError,
    ParticleConfig,
    WindowError,
    antisymmetric_domain_check,
    brute_force_correlation,
    decomposition_sum,
    eval_F,
    transition_probability,
)
from tasepdet.tasep_sim import (
    EstimateWithError,
    FlatWindow,
    SimConfig,
    TrajectoryRecord,
    current,
    empirical_joint,
    estimates_csv,
    events_jsonl,
    flat_half_width,
    rescaled_samples,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "CharlierTable",
    "ContourError",
    "ContourSpec",
    "CrossCheckError",
    "DetResult",
    "DomainComparison",
    "EstimateWithError",
    "FlatWindow",
    "FnValue",
    "KernelMatrix",
    "LatticePoint",
    "NumericsError",
    "ParticleConfig",
    "PhiFamily",
    "PsiFamily",
    "ScaledPoint",
    "ScanRow",
    "SimConfig",
    "SnapReport",
    "ThresholdSpec",
    "TrajectoryRecord",
    "TruncationPolicy",
    "TruncationRow",
    "WindowError",
    "airy",
    "airy_contour_identity",
    "airy_log",
    "antisymmetric_domain_check",
    "assemble_continuum",
    "assemble_discrete",
    "brute_force_correlation",
    "build_phi_general",
    "charlier",
    "convergence_scan",
    "current",
    "decomposition_sum",
    "empirical_joint",
    "estimates_csv",
    "eval_F",
    "events_jsonl",
    "f1_marginal",
    "flat_half_width",
    "heat_propagator",
    "joint_distribution_continuum",
    "joint_distribution_discrete",
    "kernel_f1",
    "kernel_flat",
    "kernel_general",
    "phi_flat",
    "phi_transfer",
    "phi_via_charlier",
    "psi_flat",
    "psi_general",
    "rescaled_kernel",
    "rescaled_samples",
    "s_inverse",
    "s_matrix",
    "scan_csv",
    "simulate",
    "smoothed_identity_check",
    "transition_probability",
    "truncation_report",
    "__version__",
]
