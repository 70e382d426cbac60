"""Clustered switchback experiments under spatio-temporal interference.

Treatment designs randomized over (spatial cluster x time block) rectangles,
networked Markovian outcome dynamics, an exact GATE oracle via distribution
evolution, truncated Horvitz-Thompson and difference-in-means estimators, and
numeric verification of their bias/variance/exposure bounds.
"""

from .bounds import (
    BoundReport,
    bias_bound,
    check_cond_cov,
    check_cov_outcomes,
    check_initial_state,
    check_tv_decay,
    mse_bound,
    variance_bound,
)
from .design import (
    TimeBlocks,
    TreatmentMatrix,
    constant_policy,
    position_in_block,
    sample_switchback,
    time_blocks,
)
from .dynamics import (
    AffineOutcome,
    FunctionKernels,
    FunctionOutcome,
    Instance,
    NeighborhoodFractionWalkKernels,
    NotMixingError,
    ObservedPanel,
    OwnArmWalkKernels,
    TabularKernel,
    clipped_random_walk_kernel,
    constant_policy_means,
    dobrushin_coefficient,
    estimate_tmix,
    evolve_distribution,
    gate_oracle,
    mean_outcome_exact,
    multi_unit_instance,
    multi_unit_p_up,
    nonstationary_single_instance,
    simulate_panel,
    stationary_instance,
    total_variation,
)
from .estimators import (
    DIMBIOutput,
    EstimatorUndefinedError,
    HTOutput,
    dim,
    dimbi,
    ht_truncated,
)
from .exposure import (
    ExposureProbabilities,
    ExposureSpec,
    entropy,
    exposure_indicator,
    exposure_indicator_matrix,
    exposure_lower_bound,
    exposure_probabilities,
    exposure_probability_exact,
    min_exposure_probability,
)
from .graphs import (
    Clustering,
    DependenceEdges,
    InterferenceGraph,
    build_graph,
    cluster_degree,
    dependence_edges,
    lattice_graph,
    lattice_uniform_clustering,
    line_graph,
    one_hop_max_clustering,
    one_hop_max_from_values,
    restricted_growth_coefficient,
    segments_clustering,
    singleton_clustering,
    whole_clustering,
)
from .harness import (
    EstimatorSpec,
    ExperimentConfig,
    ReplicationReport,
    ResultRow,
    emit_results,
    loglog_slope,
    preset_by_name,
    preset_multi_unit,
    preset_single_unit,
    run_experiment,
)

__all__ = [name for name in dir() if not name.startswith("_")]
