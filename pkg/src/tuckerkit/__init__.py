"""tuckerkit: Tucker tensor decomposition by orthogonal iteration.

Dense tensor algebra, iterative and one-shot low multilinear rank fits,
blockwise perturbation diagnostics, block-model co-clustering, and a seeded
simulation harness with a CLI.
"""

from .cocluster import (
    UnsupportedClusterCount,
    balanced_labels,
    block_expand,
    block_tucker,
    cocluster,
    kmeans_rows,
    membership_matrix,
    misclassification_error,
    read_memberships,
    worst_case_error,
    write_memberships,
)
from .decomposition import (
    IterationRecord,
    TuckerFit,
    hooi,
    hooi_d3,
    hooi_partial,
    one_step_hooi,
    st_hosvd,
    t_hosvd,
)
from .estimators import PartialTucker, TensorCoclustering, TuckerDecomposition
from .linalg import (
    orth_complement,
    random_orthonormal,
    schatten_norm,
    sin_theta,
    svd_r,
    truncated_schatten,
)
from .perturbation import (
    CaptureEstimate,
    ComplementNoiseEstimate,
    PerturbationReport,
    complement_noise,
    complement_noise_grid_rank1,
    complement_upper_bound,
    evaluate_bounds_d3,
    evaluate_bounds_general,
    evaluate_bounds_partial,
    low_rank_capture,
    lower_bound_instance,
    noise_projection_bound,
    projected_noise,
    signal_strength,
)
from .simulate import (
    ExperimentConfig,
    gaussian_noise,
    gen_low_rank_instance,
    perturbed_init,
    run_bounds_audit,
    run_cocluster_experiment,
    run_denoise_experiment,
    run_lower_bound_check,
    trial_seed,
)
from .tensor import (
    ModeGroups,
    asymmetric_groups,
    group_product,
    hs_inner,
    hs_norm,
    kron,
    matricize,
    mode_product,
    multi_mode_product,
    partial_groups,
    read_tns1,
    supersymmetric_group,
    tensorize,
    validate_groups,
    write_tns1,
)

__version__ = "0.1.0"
