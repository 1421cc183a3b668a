"""Causal cyclic graph estimation from unknown shift interventions."""

from .errors import (
    BackShiftError,
    ContractViolation,
    EstimateUnavailable,
    GenerationFailed,
    Infeasible,
    InsufficientData,
    IoError,
    ModelAssumptionsViolated,
    NeedMultipleEnvironments,
    NumericalBreakdown,
    ParseError,
    ShapeError,
    StabilityFailed,
    TooLargeForExact,
)
from .feasibility import (
    cycle_product,
    cycle_product_exact,
    cycle_product_feasible,
    lap_solve,
    permute_and_scale,
)
from .io import emit_results, ingest_csv
from .jointdiag import DiagonalizerOptions, joint_diagonalize, offdiag_loss
from .pipeline import (
    EstimateConfig,
    check_identifiability,
    diagnose,
    estimate,
    estimate_from_deltas,
    intervention_variances,
    threshold_edges,
)
from .scatter import MultiEnvDataset, build_scatter_set, covariance, gram, window_group
from .simulator import (
    GroundTruthModel,
    InterventionSpec,
    generate_network,
    reference_network,
    score,
    simulate,
)
from .stability import StabilityConfig, stability_select

__version__ = "0.1.0"
