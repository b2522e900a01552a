"""Resilient CACC platoon tuning against denial-of-service packet drops.

Gain-locus enumeration for pole-placement performance, LMI-based
string-stability certificates under bounded consecutive packet drops,
a two-stage tuner maximizing the tolerated drop count, and a hybrid
platoon simulator for validating the certified behavior.
"""

from .errors import (ConditionError, DomainError, InconclusiveError,
                     ParameterError, PlatoonError, ScenarioError,
                     UndefinedRatioError)
from .lmi import (StabilityCertificate, VerificationReport, assemble_M,
                  endpoint_matrices, interior_blend, verify_certificate)
from .locus import (c1_bounds, c1_kd, c2_bounds, c2_kd, enumerate_locus)
from .model import (ClosedLoopMatrices, Gains, PerformanceSpec, PlatoonParams,
                    build_closed_loop, build_error_matrix, check_performance,
                    eigenvalues_3x3)
from .scenario import (Scenario, SimOptions, gains_from_args, load_scenario,
                       parse_delta_grid, parse_segments)
from .sim import (AttackSchedule, LeaderProfile, LyapunovReport, PlatoonState,
                  ReferenceTrace, SimTrace, equilibrium_state,
                  final_abs_errors, l2_ratio, lyapunov_along_trace,
                  max_overshoots, simulate, simulate_continuous_reference,
                  spacing_errors, worst_case_schedule)
from .tuner import (LocusRow, TuningConfig, TuningReport, default_delta_grid,
                    estimate_mansd, tune)

__all__ = [
    "AttackSchedule", "ClosedLoopMatrices", "ConditionError", "DomainError",
    "Gains", "InconclusiveError", "LeaderProfile", "LocusRow",
    "LyapunovReport", "ParameterError", "PerformanceSpec", "PlatoonError",
    "PlatoonParams", "PlatoonState", "ReferenceTrace", "Scenario",
    "ScenarioError", "SimOptions", "SimTrace", "StabilityCertificate",
    "TuningConfig", "TuningReport", "UndefinedRatioError",
    "VerificationReport", "assemble_M", "build_closed_loop",
    "build_error_matrix", "c1_bounds", "c1_kd", "c2_bounds", "c2_kd",
    "check_performance", "default_delta_grid", "eigenvalues_3x3",
    "endpoint_matrices", "enumerate_locus", "equilibrium_state",
    "estimate_mansd", "final_abs_errors", "gains_from_args", "interior_blend",
    "l2_ratio", "load_scenario",
    "lyapunov_along_trace", "max_overshoots", "parse_delta_grid",
    "parse_segments", "simulate",
    "simulate_continuous_reference", "spacing_errors", "tune",
    "verify_certificate", "worst_case_schedule",
]

__version__ = "0.1.0"
