"""gibbslab -- a numerical laboratory for locally filtered Gibbs samplers.

The package builds two families of Lindblad generators over small exactly
diagonalisable models: the classical detailed-balance construction (jump
operators resolved per Bohr frequency, weights satisfying the KMS
condition) and a frequency-filtered variant whose jump operators are
Gaussian-smeared combinations of Bohr components.  The filtered family
stays stationary on the Gibbs density through a balanced weight choice
plus a compensating coherent term, and collapses back to the classical
construction as the filter width grows.

Layering (each module depends only on the ones above it):

    operator_core -- dense linear-algebra primitives and conventions
    bohr          -- Bohr spectrum, frequency-resolved decomposition
    weights       -- weight functions, Gaussian filter, quadrature
    oft           -- filtered jump operators and overlap tables
    generators    -- Lindblad assembly, stationarity and consistency reports
    evolution     -- semigroup propagation and channel health checks
    models        -- benchmark Hamiltonians with jump families
    cli           -- experiment configs, reports, and file formats
"""

from .errors import GibbsLabError, ValidationError
from .operator_core import (
    EigenSystem,
    anticommutator,
    commutator,
    dagger,
    devectorize,
    eig_hermitian,
    is_hermitian,
    matrix_function,
    schatten_norm,
    superop_conjugation,
    superop_left,
    superop_right,
    trace_distance,
    vectorize,
)
from .bohr import (
    BohrDecomposition,
    BohrSpectrum,
    adjoint_pairing_residual,
    bohr_spectrum,
    decompose,
)
from .weights import (
    COHERENT_L1_LIMIT,
    DEFAULT_RULE,
    FILTER_SQUARED_MASS,
    MAX_SPECTRAL_WIDTH,
    ORACLE_RULE,
    PHI_LIBRARY,
    GaussianFilter,
    QuadratureRule,
    WeightFunction,
    balanced_gamma,
    coherent_pair_coefficient,
    coherent_time_kernel,
    coherent_time_kernel_l1,
    delocalised_limit_gamma,
    kms_defect,
    kms_gamma,
    resolve_phi,
    smoothed_weight,
    unshifted_gamma,
)
from .oft import (
    OftEvaluation,
    OverlapTable,
    delocalisation_profile,
    oft_eval,
    oft_eval_time_quadrature,
    overlap_table,
)
from .generators import (
    GeneratorBundle,
    StationarityReport,
    coherent_calibration_report,
    coherent_matrix_bohr,
    coherent_matrix_time_quadrature,
    davies_generator,
    davies_limit_report,
    drift_dissipativity_defect,
    dual_path_residual,
    effective_drift_abscissa,
    generator_action,
    gibbs_action_identity_defect,
    hermiticity_preservation_defect,
    localised_generator,
    stationarity_report,
    trace_functional_defect,
)
from .evolution import (
    Trajectory,
    choi_matrix,
    choi_min_eigenvalue,
    choi_report,
    choi_trace_preservation_defect,
    contraction_report,
    evolve,
    random_density_matrix,
    semigroup_defect,
    snapshot_diagnostics,
)
from .models import (
    Model,
    WELL_SEPARATED_SPECTRUM_6,
    benchmark_models,
    gibbs_state,
    model_from_config,
    named_potential,
    oscillator_model,
    qubit_model,
    random_model,
    schrodinger_line_model,
    torus_model,
)

__version__ = "0.1.0"

__all__ = [
    "GibbsLabError",
    "ValidationError",
    "EigenSystem",
    "anticommutator",
    "commutator",
    "dagger",
    "devectorize",
    "eig_hermitian",
    "is_hermitian",
    "matrix_function",
    "schatten_norm",
    "superop_conjugation",
    "superop_left",
    "superop_right",
    "trace_distance",
    "vectorize",
    "BohrDecomposition",
    "BohrSpectrum",
    "adjoint_pairing_residual",
    "bohr_spectrum",
    "decompose",
    "COHERENT_L1_LIMIT",
    "DEFAULT_RULE",
    "FILTER_SQUARED_MASS",
    "MAX_SPECTRAL_WIDTH",
    "ORACLE_RULE",
    "PHI_LIBRARY",
    "GaussianFilter",
    "QuadratureRule",
    "WeightFunction",
    "balanced_gamma",
    "coherent_pair_coefficient",
    "coherent_time_kernel",
    "coherent_time_kernel_l1",
    "delocalised_limit_gamma",
    "kms_defect",
    "kms_gamma",
    "resolve_phi",
    "smoothed_weight",
    "unshifted_gamma",
    "OftEvaluation",
    "OverlapTable",
    "delocalisation_profile",
    "oft_eval",
    "oft_eval_time_quadrature",
    "overlap_table",
    "GeneratorBundle",
    "StationarityReport",
    "coherent_calibration_report",
    "coherent_matrix_bohr",
    "coherent_matrix_time_quadrature",
    "davies_generator",
    "davies_limit_report",
    "drift_dissipativity_defect",
    "dual_path_residual",
    "effective_drift_abscissa",
    "generator_action",
    "gibbs_action_identity_defect",
    "hermiticity_preservation_defect",
    "localised_generator",
    "stationarity_report",
    "trace_functional_defect",
    "Trajectory",
    "choi_matrix",
    "choi_min_eigenvalue",
    "choi_report",
    "choi_trace_preservation_defect",
    "contraction_report",
    "evolve",
    "random_density_matrix",
    "semigroup_defect",
    "snapshot_diagnostics",
    "Model",
    "WELL_SEPARATED_SPECTRUM_6",
    "benchmark_models",
    "gibbs_state",
    "model_from_config",
    "named_potential",
    "oscillator_model",
    "qubit_model",
    "random_model",
    "schrodinger_line_model",
    "torus_model",
    "__version__",
]
