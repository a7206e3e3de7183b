"""Dual-engine simulator for a strongly driven, damped micromaser cavity field.

The analytic engine works in the characteristic-function picture, where the
driven cavity dynamics is exactly solvable; the number-basis engine
integrates the same generator on a truncated Fock space.  Everything the
package reports can be produced by both engines, and `sdm validate` (or
validation.validate) measures their agreement.
"""

import os as _os

# honor SDM_THREADS before numpy first loads its BLAS backend; effective
# only when this package is imported before numpy, as the CLI always is
_threads = _os.environ.get("SDM_THREADS")
if _threads is not None and _threads.isdigit() and int(_threads) > 0:
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
        "VECLIB_MAXIMUM_THREADS",
    ):
        _os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"

from .errors import (
    DegenerateOutcome,
    DegenerateParams,
    DomainError,
    NegativityWarning,
    NonRealError,
    OverflowGuard,
    StepFailure,
    TruncationError,
)
from .grids import GridSpec, PhaseSpaceGrid, parse_grid_spec, read_grid_csv, write_grid_csv
from .phase_space import (
    CoherentOpSum,
    PhasePoint,
    SDMParams,
    charfn_click_conjugation,
    charfn_opsum,
    coherent_overlap,
    displace_opsum,
    gain_coords,
    wigner_from_charfn,
)
from .coherent import (
    AtomicState2x2,
    DetectionRecord,
    atom_pass_detected,
    atom_pass_unobserved,
    atomic_reduced_state,
    detection_records,
    ensemble_average,
    mean_photon,
    multi_atom_unobserved,
    opsum_coeff_delta,
    sequential_click_probability,
    wigner_closed_form,
    wigner_opsum,
)
from .propagator import (
    EvolvedChi,
    FieldStats,
    InitialMoments,
    OpSumChi,
    SteadyChi,
    TransientMoments,
    chi_ss,
    chi_t,
    cin,
    log_chi_ss,
    mandel_q_formula,
    moment_probe,
    steady_stats,
    transient_moments,
)
from .clicks import (
    ClickedChi,
    CorrelationCurve,
    click_probability,
    conditional_click_chi,
    conditional_click_chi_factored,
    conditional_chi_deviation,
    correlation_curve,
    steady_visibility,
    two_click_correlation,
)
from .fock import (
    FockDensityMatrix,
    PhaseDistribution,
    coherent_fock,
    default_dim,
    displacement_matrix,
    evolve_fock,
    lindblad_rhs,
    opsum_to_fock,
    oracle_charfn,
    oracle_click,
    oracle_moments,
    oracle_stats,
    oracle_wigner,
    pegg_barnett,
    steady_fock,
    thermal_fock,
    unobserved_pass_fock,
    vacuum_fock,
)
from .validation import CheckResult, ValidationReport, validate

__all__ = [
    "__version__",
    # errors
    "DegenerateOutcome", "DegenerateParams", "DomainError", "NegativityWarning",
    "NonRealError", "OverflowGuard", "StepFailure", "TruncationError",
    # grids
    "GridSpec", "PhaseSpaceGrid", "parse_grid_spec", "read_grid_csv",
    "write_grid_csv",
    # phase space
    "CoherentOpSum", "PhasePoint", "SDMParams", "charfn_click_conjugation",
    "charfn_opsum", "coherent_overlap", "displace_opsum", "gain_coords",
    "wigner_from_charfn",
    # coherent transits
    "AtomicState2x2", "DetectionRecord", "atom_pass_detected",
    "atom_pass_unobserved", "atomic_reduced_state", "detection_records",
    "ensemble_average", "mean_photon", "multi_atom_unobserved",
    "opsum_coeff_delta", "sequential_click_probability", "wigner_closed_form",
    "wigner_opsum",
    # damped propagation
    "EvolvedChi", "FieldStats", "InitialMoments", "OpSumChi", "SteadyChi",
    "TransientMoments", "chi_ss", "chi_t", "cin", "log_chi_ss",
    "mandel_q_formula", "moment_probe", "steady_stats", "transient_moments",
    # clicks
    "ClickedChi", "CorrelationCurve", "click_probability",
    "conditional_click_chi", "conditional_click_chi_factored",
    "conditional_chi_deviation", "correlation_curve", "steady_visibility",
    "two_click_correlation",
    # number-basis engine
    "FockDensityMatrix", "PhaseDistribution", "coherent_fock", "default_dim",
    "displacement_matrix", "evolve_fock", "lindblad_rhs", "opsum_to_fock",
    "oracle_charfn", "oracle_click", "oracle_moments", "oracle_stats",
    "oracle_wigner", "pegg_barnett", "steady_fock", "thermal_fock",
    "unobserved_pass_fock", "vacuum_fock",
    # validation
    "CheckResult", "ValidationReport", "validate",
]
