"""Verification lab for the couplings between the Ising model, random
currents, FK percolation, the pinned Gaussian free field, and random-walk
loop soups on finite weighted graphs."""

from .battery import standard_battery
from .errors import (
    CapacityError,
    DegenerateStateError,
    EnvelopeViolationError,
    InvariantViolationError,
    MissingPinningError,
    NotASuperpositionError,
    RunawayError,
    TruncationError,
    UnsupportedMethodError,
    ValidationError,
)
from .exact import (
    FiniteDistribution,
    ModelKind,
    Space,
    SpaceKind,
    bernoulli_probabilities,
    color_clusters_exact,
    exact_measure,
    partition_functions,
    reconstruct_trace_law,
    sign_assignment_count,
    superpose_max,
    tv_distance,
    two_point_exact,
)
from .gff import (
    FieldSample,
    conditional_sign_weights,
    green_matrix,
    precision_matrix,
    reconstruct_field,
    sample_field,
    sample_fields,
)
from .harness import ExperimentConfig, ExperimentReport, run_experiment
from .loopsoup import (
    LoopEnsemble,
    LoopSkeleton,
    cable_clusters,
    fields,
    occupation_magnitudes,
    sample_bridges,
    sample_fields_bulk,
    sample_soup,
    truncation_bound,
)
from .network import (
    Network,
    Pinning,
    build_network,
    components,
    cyclomatic_number,
    incidence_parity_check,
    load_network,
    save_network,
)
from .sampling import (
    SeedSpec,
    coupled_fk_sample,
    empirical_compare,
    sample_configuration,
)
from .vrjp import JumpEvent, VrjpState, jump_rate, run_pass, run_vrjp

__version__ = "0.1.0"
