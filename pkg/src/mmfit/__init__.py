"""Geometric multi-model fitting via convex relaxation.

Segments multi-structural data (two-view correspondences, RGB-D frames)
into geometric models plus outliers by minimizing a relaxed multi-label
energy with a preconditioned primal-dual solver, alternated with model
merging and re-estimation.
"""

from .errors import (
    AllDepthInvalid,
    DegenerateRays,
    DegenerateSample,
    DimensionMismatch,
    InsufficientLocalPoints,
    InvalidDepth,
    MissingHeader,
    MmfitError,
    NoLabels,
    NoModelsProposed,
    NonInvertible,
    ParseError,
    TooFewPoints,
)
from .geometry import (
    Correspondence,
    CorrespondenceSet,
    CovariancePair,
    Homography,
    InverseDepthPlane,
    estimate_homography_dlt,
    fit_plane,
    homography_costs,
    plane_cost,
    plane_costs,
    propagate_covariance,
    symmetric_transfer_cost,
)
from .neighborhood import (
    NeighborhoodGraph,
    PenaltyNorm,
    build_grid4,
    build_knn,
    divergence,
    gradient,
    median_knn_distance,
    penalty_value,
)
from .pipelines import (
    HomographyEstimator,
    HomographyTask,
    PlaneEstimator,
    PlaneTask,
    edge_weights,
    run_homography_segmentation,
    run_plane_segmentation,
)
from .proposals import Proposal, ProposalConfig, local_sample, propose_models
from .simworld import (
    Camera,
    SimSample,
    SimScene,
    aggregate_rows,
    generate_scene,
    make_corner_scene,
    misclassification_error,
    render_wedge_scene,
    run_noise_sweep,
    run_outlier_sweep,
    triangulate,
)
from .solver import (
    OUTLIER,
    CostMatrix,
    DualField,
    EnergyTriple,
    FitResult,
    LabelField,
    SolverConfig,
    coral_fit,
    merge_models,
    precondition,
    primal_dual_solve,
    project_dual,
    project_simplex,
    sequential_ransac_fit,
    threshold_labels,
    total_energy,
)

__version__ = "0.1.0"
