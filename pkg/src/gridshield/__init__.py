"""Detection and localization of unobservable injection attacks on DC grids.

The package builds the measurement topology of a transmission network,
simulates stealthy state-targeted data injections, and identifies the attacked
buses from two consecutive measurement snapshots using structure-constrained
sparse selectors.  A benchmark driver and a command line front end reproduce
the full detection/identification experiments.
"""

from .analysis import (
    FalseAlarmBounds,
    detection_probability,
    false_alarm_bounds,
    false_alarm_probability,
    glrt_statistic,
    glrt_tail,
    marcum_q,
    mismatch_fraction,
    oracle_gic_select,
    oracle_glrt_statistic,
)
from .attack_model import (
    AdaptiveMonitor,
    AdaptiveStepResult,
    AttackSpec,
    ConfigurationError,
    ScenarioConfig,
    difference_measurements,
    load_component,
    sample_attack,
    simulate_load_change,
)
from .cases import case_path, ieee30
from .estimation import NoiseModel, PsseResult, bdd_test, corrected_psse, k_matrix, wls_psse
from .gic import (
    CandidateFamily,
    FamilyEvaluator,
    PenaltyConfig,
    calibrate_gamma_gic,
    candidate_energies,
    default_family,
    gic_select,
    gic_statistic,
)
from .gmgic import (
    AuxiliaryPartition,
    GsoPatternError,
    SuspiciousSet,
    auxiliary_partition,
    bfs_distances,
    calibrate_rho,
    gm_gic,
    graph_filter_matrix,
    gsp_sparse_recover,
    prescreen,
)
from .grid_model import (
    Branch,
    Bus,
    CaseParseError,
    GridModelError,
    GridNetwork,
    StructuralError,
    TopologyMatrix,
    build_topology,
    load_case,
    network_to_json,
    parse_case_file,
)
from .omp import OmpConfig, calibrate_gamma_omp, omp_identify, single_state_energies
from .projection import (
    DegenerateSupportError,
    ProjectorCache,
    SubspaceProjector,
    ml_attack_estimate,
    projection_energy,
    projector,
)
from .results import IdentificationResult, empty_result

__version__ = "0.1.0"

__all__ = [
    "AdaptiveMonitor",
    "AdaptiveStepResult",
    "AttackSpec",
    "AuxiliaryPartition",
    "Branch",
    "Bus",
    "CandidateFamily",
    "CaseParseError",
    "ConfigurationError",
    "DegenerateSupportError",
    "FalseAlarmBounds",
    "FamilyEvaluator",
    "GridModelError",
    "GridNetwork",
    "GsoPatternError",
    "IdentificationResult",
    "NoiseModel",
    "OmpConfig",
    "PenaltyConfig",
    "ProjectorCache",
    "PsseResult",
    "ScenarioConfig",
    "StructuralError",
    "SubspaceProjector",
    "SuspiciousSet",
    "TopologyMatrix",
    "auxiliary_partition",
    "bdd_test",
    "bfs_distances",
    "build_topology",
    "calibrate_gamma_gic",
    "calibrate_gamma_omp",
    "calibrate_rho",
    "candidate_energies",
    "case_path",
    "corrected_psse",
    "default_family",
    "detection_probability",
    "difference_measurements",
    "empty_result",
    "false_alarm_bounds",
    "false_alarm_probability",
    "gic_select",
    "gic_statistic",
    "glrt_statistic",
    "glrt_tail",
    "gm_gic",
    "graph_filter_matrix",
    "gsp_sparse_recover",
    "ieee30",
    "k_matrix",
    "load_case",
    "load_component",
    "marcum_q",
    "mismatch_fraction",
    "ml_attack_estimate",
    "network_to_json",
    "omp_identify",
    "oracle_gic_select",
    "oracle_glrt_statistic",
    "parse_case_file",
    "prescreen",
    "projection_energy",
    "projector",
    "sample_attack",
    "simulate_load_change",
    "single_state_energies",
    "wls_psse",
    "__version__",
]
