"""Neighborhood graphs and the discrete gradient/adjoint operators.

A graph stores directed weighted edges sorted by (src, dst); contiguous runs
of equal src form the per-source groups used by the grouped L12 penalty. Both
operators run through a cached sparse incidence matrix, which fixes the
accumulation order and keeps results bit-reproducible.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree


class PenaltyNorm(enum.Enum):
    """Edge-gradient penalty: L11 (anisotropic) or L12 (grouped isotropic).

    The dual-norm pairing is fixed: L11 pairs with a componentwise infinity
    ball, L12 with per-group L2 balls.
    """

    L11 = "l11"
    L12 = "l12"


@dataclass
class NeighborhoodGraph:
    """Directed weighted edges over n_points, sorted by (src, dst)."""

    n_points: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=np.int64).reshape(-1)
        self.dst = np.asarray(self.dst, dtype=np.int64).reshape(-1)
        self.weight = np.asarray(self.weight, dtype=float).reshape(-1)
        if not (len(self.src) == len(self.dst) == len(self.weight)):
            raise ValueError("edge arrays must have equal length")
        if len(self.src) and (
            self.src.min() < 0
            or self.dst.min() < 0
            or max(self.src.max(), self.dst.max()) >= self.n_points
        ):
            raise ValueError("edge endpoints out of range")
        if (self.src == self.dst).any():
            raise ValueError("self-edges are not allowed")
        if not np.isfinite(self.weight).all() or (self.weight < 0).any():
            raise ValueError("weights must be finite and nonnegative")
        order = np.lexsort((self.dst, self.src))
        self.src = self.src[order]
        self.dst = self.dst[order]
        self.weight = self.weight[order]
        # Group boundaries: one group per distinct source, in edge order.
        if len(self.src):
            starts = np.flatnonzero(np.diff(self.src, prepend=self.src[0] - 1))
        else:
            starts = np.empty(0, dtype=np.int64)
        self.group_start = starts.astype(np.int64)
        self.group_src = self.src[starts] if len(starts) else np.empty(0, dtype=np.int64)
        self._incidence = None
        self._incidence_t = None

    @property
    def n_edges(self):
        return len(self.src)

    def with_weights(self, weight):
        return NeighborhoodGraph(self.n_points, self.src, self.dst, weight, self.kind)

    def incidence(self):
        """Sparse (E, n) operator with +w at dst and -w at src per edge row."""
        if self._incidence is None:
            e = self.n_edges
            rows = np.repeat(np.arange(e, dtype=np.int64), 2)
            cols = np.empty(2 * e, dtype=np.int64)
            cols[0::2] = self.src
            cols[1::2] = self.dst
            vals = np.empty(2 * e)
            vals[0::2] = -self.weight
            vals[1::2] = self.weight
            self._incidence = sp.csr_matrix(
                (vals, (rows, cols)), shape=(e, self.n_points)
            )
            self._incidence_t = self._incidence.T.tocsr()
        return self._incidence

    def incidence_t(self):
        if self._incidence_t is None:
            self.incidence()
        return self._incidence_t

    def group_slices(self):
        """Yield (source point, slice into the edge arrays) per group."""
        bounds = np.append(self.group_start, self.n_edges)
        for g in range(len(self.group_start)):
            yield self.group_src[g], slice(bounds[g], bounds[g + 1])


def build_grid4(width: int, height: int) -> NeighborhoodGraph:
    """Forward-difference 4-neighborhood over a width x height pixel grid.

    Pixels are indexed row-major (idx = y * width + x). Each pixel gets a
    right and a down edge where those neighbors exist; weights default to 1.
    """
    if width < 1 or height < 1:
        raise ValueError("width and height must be >= 1")
    idx = np.arange(width * height, dtype=np.int64).reshape(height, width)
    right_src = idx[:, :-1].ravel()
    right_dst = idx[:, 1:].ravel()
    down_src = idx[:-1, :].ravel()
    down_dst = idx[1:, :].ravel()
    src = np.concatenate([right_src, down_src])
    dst = np.concatenate([right_dst, down_dst])
    return NeighborhoodGraph(
        n_points=width * height,
        src=src,
        dst=dst,
        weight=np.ones(len(src)),
        kind="grid4",
    )


def build_knn(points, k: int, scale: float) -> NeighborhoodGraph:
    """Directed k-nearest-neighbor graph with distance-decay weights.

    Each point links to its k nearest Euclidean neighbors (k clamped to
    n - 1) with weight exp(-d / scale), so far-apart neighbors contribute
    less smoothing.
    """
    points = np.asarray(points, dtype=float).reshape(len(points), -1)
    n = points.shape[0]
    if n < 2:
        raise ValueError("need >= 2 points")
    if scale <= 0:
        raise ValueError("scale must be positive")
    k = min(int(k), n - 1)
    if k < 1:
        raise ValueError("k must be >= 1")
    tree = cKDTree(points)
    dist, nbr = tree.query(points, k=k + 1)
    dist = dist.reshape(n, k + 1)
    nbr = nbr.reshape(n, k + 1)
    # Query k+1 and drop the self match (collocated twins may displace it
    # from column 0, so filter by index rather than position).
    src_rows, dst_rows, d_rows = [], [], []
    for i in range(n):
        cols = [j for j in range(k + 1) if nbr[i, j] != i][:k]
        src_rows.extend([i] * len(cols))
        dst_rows.extend(int(nbr[i, j]) for j in cols)
        d_rows.extend(float(dist[i, j]) for j in cols)
    src = np.array(src_rows, dtype=np.int64)
    dst = np.array(dst_rows, dtype=np.int64)
    d = np.array(d_rows)
    return NeighborhoodGraph(
        n_points=n, src=src, dst=dst, weight=np.exp(-d / scale), kind="knn"
    )


def median_knn_distance(points, k: int) -> float:
    """Median distance to the k nearest neighbors; the default kNN scale."""
    points = np.asarray(points, dtype=float).reshape(len(points), -1)
    n = points.shape[0]
    k = min(int(k), n - 1)
    tree = cKDTree(points)
    dist, _ = tree.query(points, k=k + 1)
    d = np.median(dist[:, 1:])
    return float(d) if d > 0 else 1.0


def gradient(graph: NeighborhoodGraph, phi):
    """Weighted forward differences along edges: w * (phi[dst] - phi[src]).

    phi is (n,) or (n, L); the result is (E,) or (E, L).
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape[0] != graph.n_points:
        raise ValueError(
            f"field has {phi.shape[0]} points, graph has {graph.n_points}"
        )
    return graph.incidence() @ phi


def divergence(graph: NeighborhoodGraph, psi):
    """Exact algebraic adjoint of gradient: scatter -w/+w to the endpoints."""
    psi = np.asarray(psi, dtype=float)
    if psi.shape[0] != graph.n_edges:
        raise ValueError(f"field has {psi.shape[0]} edges, graph has {graph.n_edges}")
    return graph.incidence_t() @ psi


def _group_reduce(graph, values):
    """Per-group sums along axis 0 (values is (E,) or (E, L))."""
    if graph.n_edges == 0 or len(graph.group_start) == 0:
        shape = (0,) + values.shape[1:]
        return np.zeros(shape)
    return np.add.reduceat(values, graph.group_start, axis=0)


def penalty_value(norm: PenaltyNorm, grad, graph: NeighborhoodGraph = None) -> float:
    """Total penalty of an edge gradient under the chosen norm.

    L11 sums absolute edge values. L12 groups the outgoing edges of each
    source point and sums the Euclidean norms of the groups (per label),
    which for a pixel grid is the isotropic (grad_x, grad_y) magnitude.
    """
    grad = np.asarray(grad, dtype=float)
    if norm is PenaltyNorm.L11:
        return float(np.abs(grad).sum())
    if norm is PenaltyNorm.L12:
        if graph is None:
            raise ValueError("L12 penalty needs the graph for its grouping")
        g = _group_reduce(graph, grad * grad)
        return float(np.sqrt(g).sum())
    raise ValueError(f"unknown norm {norm}")
