"""Application pipelines: two-view multi-homography and RGB-D plane fitting.

Both pipelines assemble a neighborhood graph, a model estimator, and the
solver configuration, then dispatch to the relaxation solver or the
sequential RANSAC baseline. The homography pipeline canonicalizes the input
order internally so results are invariant to permutations of the
correspondence list.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllDepthInvalid, DegenerateSample, TooFewPoints
from .geometry import (
    CorrespondenceSet,
    Homography,
    InverseDepthPlane,
    estimate_homography_dlt,
    fit_plane,
    homography_costs,
    plane_costs,
)
from .neighborhood import (
    NeighborhoodGraph,
    PenaltyNorm,
    build_grid4,
    build_knn,
    median_knn_distance,
)
from .proposals import ProposalConfig, consensus_refine, propose_models
from .solver import FitResult, SolverConfig, coral_fit, sequential_ransac_fit

# Inlier gates for the RANSAC baseline: 95% chi-square quantiles matching the
# residual dimensionality of each cost (2 for symmetric transfer, 1 for
# inverse depth).
RANSAC_THRESHOLD_HOMOGRAPHY = 5.99
RANSAC_THRESHOLD_PLANE = 3.84


@dataclass
class HomographyTask:
    """Multi-homography segmentation of sparse two-view correspondences."""

    correspondences: CorrespondenceSet
    sigma_pixel: float = 1.0
    k: int = 4
    lam: float = 0.5
    beta: float = 100.0
    gamma: float = 20.0
    s: int = 100
    seed: int = 0
    n_inner: int = 500
    max_outer: int = 20

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.sigma_pixel <= 0:
            raise ValueError("sigma_pixel must be positive")


@dataclass
class PlaneTask:
    """Plane extraction from an inverse-depth grid plus an intensity image.

    xi is (H, W) inverse depth in 1/meters with 0 marking invalid pixels;
    intensity is (H, W) in [0, 1].
    """

    xi: np.ndarray
    intensity: np.ndarray
    sigma_xi: float = 0.005
    edge_alpha: float = 10.0
    lam: float = 1.0
    beta: float = 5000.0
    gamma: float = 9.0
    s: int = 200
    seed: int = 0
    n_inner: int = 500
    max_outer: int = 20

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float)
        self.intensity = np.asarray(self.intensity, dtype=float)
        if self.xi.ndim != 2 or self.xi.shape != self.intensity.shape:
            raise ValueError("xi and intensity must be equal-shaped 2-D grids")
        if np.nanmin(self.xi, initial=0.0) < 0:
            raise ValueError("inverse depth must be nonnegative (0 = invalid)")
        if self.sigma_xi <= 0:
            raise ValueError("sigma_xi must be positive")


class HomographyEstimator:
    """Estimator adapter: DLT fits and symmetric-transfer costs."""

    min_sample = 4

    def __init__(self, u1, u2, sigma_pixel):
        self.u1 = np.asarray(u1, dtype=float).reshape(-1, 2)
        self.u2 = np.asarray(u2, dtype=float).reshape(-1, 2)
        self.sigma_pixel = float(sigma_pixel)
        self.positions = self.u1

    @property
    def n_points(self):
        return self.u1.shape[0]

    def fit(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return estimate_homography_dlt(self.u1[indices], self.u2[indices])

    def costs(self, model: Homography):
        return homography_costs(self.u1, self.u2, model, self.sigma_pixel)

    def distance(self, a: Homography, b: Homography):
        return float(np.linalg.norm(a.matrix - b.matrix))


class PlaneEstimator:
    """Estimator adapter: least-squares plane fits on valid depth pixels."""

    min_sample = 3

    def __init__(self, coords, xi, sigma_xi, valid, diag_scale):
        self.coords = np.asarray(coords, dtype=float).reshape(-1, 2)
        self.xi = np.asarray(xi, dtype=float).reshape(-1)
        self.sigma_xi = float(sigma_xi)
        self.valid = np.asarray(valid, dtype=bool).reshape(-1)
        self.diag_scale = float(diag_scale)
        self.positions = self.coords
        self.candidate_indices = np.flatnonzero(self.valid)
        self.forced_outlier = ~self.valid

    @property
    def n_points(self):
        return self.coords.shape[0]

    def fit(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        keep = indices[self.valid[indices]]
        if len(keep) < self.min_sample:
            raise DegenerateSample("fewer than 3 valid pixels in the sample")
        return fit_plane(self.coords[keep], self.xi[keep])

    def costs(self, model: InverseDepthPlane):
        return plane_costs(self.coords, self.xi, model, self.sigma_xi)

    def distance(self, a: InverseDepthPlane, b: InverseDepthPlane):
        # Scale the gradient part by the image diagonal so both components
        # compare in 1/meter units.
        da = np.concatenate([a.w * self.diag_scale, [a.c]])
        db = np.concatenate([b.w * self.diag_scale, [b.c]])
        return float(np.linalg.norm(da - db))


def edge_weights(graph: NeighborhoodGraph, intensity, edge_alpha: float):
    """Per-edge contrast weights exp(-edge_alpha * |dI|) for a pixel graph.

    intensity must be in [0, 1]; a step edge of height h gets weight
    exp(-edge_alpha * h), so label boundaries become cheap across image
    edges.
    """
    flat = np.asarray(intensity, dtype=float).ravel()
    if flat.size != graph.n_points:
        raise ValueError("intensity size and graph points differ")
    if not np.isfinite(flat).all():
        raise ValueError("intensity must be finite")
    if flat.size and (flat.min() < -1e-9 or flat.max() > 1 + 1e-9):
        raise ValueError("intensity must be normalized to [0, 1]")
    diff = np.abs(flat[graph.dst] - flat[graph.src])
    return np.exp(-float(edge_alpha) * diff)


def _solver_config(task):
    return SolverConfig(
        lam=task.lam,
        beta=task.beta,
        gamma=task.gamma,
        n_inner=task.n_inner,
        max_outer=task.max_outer,
        seed=task.seed,
    )


def run_homography_segmentation(task: HomographyTask, method="coral") -> FitResult:
    """Segment correspondences into homographies plus outliers.

    Builds a kNN graph over view-1 keypoints (distance-decay weights, scale =
    median kNN distance), evaluates symmetric transfer costs under propagated
    covariances, and minimizes with the L11 penalty. method is "coral" or
    "ransac".
    """
    cs = task.correspondences
    n = len(cs)
    if n < 4:
        raise TooFewPoints(f"need >= 4 correspondences, got {n}")

    # Canonical internal order: makes sampling and edge accumulation
    # independent of the caller's row order.
    order = np.lexsort((cs.u2[:, 1], cs.u2[:, 0], cs.u1[:, 1], cs.u1[:, 0]))
    u1 = cs.u1[order]
    u2 = cs.u2[order]

    graph = build_knn(u1, task.k, scale=median_knn_distance(u1, task.k))
    estimator = HomographyEstimator(u1, u2, task.sigma_pixel)
    cfg = _solver_config(task)

    if method == "coral":
        span = float(np.linalg.norm(u1.max(axis=0) - u1.min(axis=0)))
        pcfg = ProposalConfig(
            s=task.s,
            sample_size=4,
            seed=task.seed,
            local_radius=0.2 * span if span > 0 else None,
        )

        def proposer():
            raw = [p.model for p in propose_models(estimator, pcfg)]
            return consensus_refine(estimator, raw, task.gamma)

        result = coral_fit(estimator, graph, PenaltyNorm.L11, cfg, proposer=proposer)
    elif method == "ransac":
        result = sequential_ransac_fit(
            estimator,
            graph,
            PenaltyNorm.L11,
            cfg,
            inlier_threshold=RANSAC_THRESHOLD_HOMOGRAPHY,
            trials=task.s,
        )
    else:
        raise ValueError(f"unknown method {method!r}")

    labels = np.empty(n, dtype=np.int64)
    labels[order] = result.labels
    result.labels = labels
    return result


def run_plane_segmentation(task: PlaneTask, method="coral"):
    """Extract planes from an inverse-depth grid.

    Builds a 4-connected grid graph with contrast edge weights, evaluates
    inverse-depth residual costs, and minimizes with the grouped L12 penalty.
    Invalid-depth pixels cost gamma under every model and are forced to the
    outlier label in the output.

    Returns (FitResult, label_image) with label_image shaped like xi.
    """
    h, w = task.xi.shape
    valid = np.isfinite(task.xi) & (task.xi > 0)
    if not valid.any():
        raise AllDepthInvalid("no valid depth pixels")

    base = build_grid4(w, h)
    graph = base.with_weights(edge_weights(base, task.intensity, task.edge_alpha))

    ys, xs = np.divmod(np.arange(h * w), w)
    coords = np.column_stack([xs, ys]).astype(float)
    estimator = PlaneEstimator(
        coords,
        task.xi.ravel(),
        task.sigma_xi,
        valid.ravel(),
        diag_scale=float(np.hypot(w, h)),
    )
    cfg = _solver_config(task)

    if method == "coral":
        pcfg = ProposalConfig(
            s=task.s,
            sample_size=3,
            seed=task.seed,
            local_radius=0.15 * float(np.hypot(w, h)),
        )

        def proposer():
            raw = [p.model for p in propose_models(estimator, pcfg)]
            return consensus_refine(estimator, raw, task.gamma)

        result = coral_fit(estimator, graph, PenaltyNorm.L12, cfg, proposer=proposer)
    elif method == "ransac":
        result = sequential_ransac_fit(
            estimator,
            graph,
            PenaltyNorm.L12,
            cfg,
            inlier_threshold=RANSAC_THRESHOLD_PLANE,
            trials=task.s,
        )
    else:
        raise ValueError(f"unknown method {method!r}")

    return result, result.labels.reshape(h, w)
