"""Diffeomorphic landmark matching by ensemble Kalman inversion.

A template landmark configuration is carried onto a target by the geodesic
flow of a Gaussian reproducing-kernel Hamiltonian; the initial momentum that
encodes the flow is learned derivative-free by an iterative ensemble Kalman
filter.  The package provides the kernel and shooting primitives, the filter,
seeded synthetic problems, a scikit-learn style estimator, and a batch
experiment harness with CSV/JSON/SVG outputs.
"""

from .enkf import (
    MatchConfig,
    MatchResult,
    MisfitTrace,
    anomalies,
    enkf_match,
    ensemble_forward,
    ensemble_mean,
    kalman_apply,
)
from .estimator import LandmarkMatcher
from .experiments import (
    ExperimentPlan,
    RunRecord,
    derive_seed,
    emit_outputs,
    run_regularisation_study,
    run_robustness_study,
    run_single_study,
    run_study,
)
from .kernels import kernel_cross, kernel_gradient, kernel_matrix, kernel_value
from .outputs import (
    read_landmarks,
    read_misfit_trace,
    write_geodesic_path,
    write_landmarks,
    write_misfit_trace,
)
from .shooting import (
    BlowUpError,
    GeodesicPath,
    forward,
    hamiltonian_rhs,
    path_energy,
    shoot,
    transport,
    velocity,
)
from .synthetic import (
    GENERATOR_SPEC,
    SynthSpec,
    circle_template,
    make_initial_ensemble,
    make_target,
    standard_normal,
    substream,
)

__version__ = "0.1.0"

__all__ = [
    "BlowUpError",
    "ExperimentPlan",
    "GENERATOR_SPEC",
    "GeodesicPath",
    "LandmarkMatcher",
    "MatchConfig",
    "MatchResult",
    "MisfitTrace",
    "RunRecord",
    "SynthSpec",
    "anomalies",
    "circle_template",
    "derive_seed",
    "emit_outputs",
    "enkf_match",
    "ensemble_forward",
    "ensemble_mean",
    "forward",
    "hamiltonian_rhs",
    "kalman_apply",
    "kernel_cross",
    "kernel_gradient",
    "kernel_matrix",
    "kernel_value",
    "make_initial_ensemble",
    "make_target",
    "path_energy",
    "read_landmarks",
    "read_misfit_trace",
    "run_regularisation_study",
    "run_robustness_study",
    "run_single_study",
    "run_study",
    "shoot",
    "standard_normal",
    "substream",
    "transport",
    "velocity",
    "write_geodesic_path",
    "write_landmarks",
    "write_misfit_trace",
]
