"""Geometric models: two-view homographies and inverse-depth planes.

Each model type comes with estimation (normalized DLT for homographies,
weighted least squares for planes) and residual-cost evaluation. Scalar
operations follow the per-point definitions; the ``*_costs`` batch variants
are the vectorized paths used by the fitting pipelines.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSample, InvalidDepth, NonInvertible, TooFewPoints

# Cap on residual costs so energies stay finite for points that reproject
# near the plane at infinity.
COST_CAP = 1e12

_SINGULAR_TOL = 1e-9


def homogenize(pts):
    """Append a unit coordinate: (n, 2) -> (n, 3)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    return np.concatenate([pts, np.ones((pts.shape[0], 1))], axis=1)


def dehomogenize(pts_h):
    """Divide out the last coordinate: (n, 3) -> (n, 2). No zero guard."""
    pts_h = np.atleast_2d(np.asarray(pts_h, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        return pts_h[:, :2] / pts_h[:, 2:3]


@dataclass(frozen=True)
class Correspondence:
    """A pixel match between view 1 and view 2."""

    u1: np.ndarray
    u2: np.ndarray
    id: int = 0

    def __post_init__(self):
        u1 = np.asarray(self.u1, dtype=float).reshape(2)
        u2 = np.asarray(self.u2, dtype=float).reshape(2)
        if not (np.isfinite(u1).all() and np.isfinite(u2).all()):
            raise ValueError("correspondence coordinates must be finite")
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "u2", u2)


@dataclass(frozen=True)
class CorrespondenceSet:
    """Column store of matches: u1, u2 are (n, 2); ids are unique ints."""

    u1: np.ndarray
    u2: np.ndarray
    ids: np.ndarray = None

    def __post_init__(self):
        u1 = np.ascontiguousarray(np.asarray(self.u1, dtype=float).reshape(-1, 2))
        u2 = np.ascontiguousarray(np.asarray(self.u2, dtype=float).reshape(-1, 2))
        if u1.shape != u2.shape:
            raise ValueError("u1 and u2 must have the same shape")
        if not (np.isfinite(u1).all() and np.isfinite(u2).all()):
            raise ValueError("correspondence coordinates must be finite")
        ids = self.ids
        if ids is None:
            ids = np.arange(len(u1), dtype=np.int64)
        else:
            ids = np.asarray(ids, dtype=np.int64).reshape(-1)
            if len(ids) != len(u1):
                raise ValueError("ids length mismatch")
            if len(np.unique(ids)) != len(ids):
                raise ValueError("ids must be unique")
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "u2", u2)
        object.__setattr__(self, "ids", ids)

    def __len__(self):
        return self.u1.shape[0]

    def subset(self, indices):
        indices = np.asarray(indices)
        return CorrespondenceSet(self.u1[indices], self.u2[indices], self.ids[indices])

    @classmethod
    def from_pairs(cls, pairs):
        pairs = list(pairs)
        if not pairs:
            return cls(np.empty((0, 2)), np.empty((0, 2)))
        u1 = np.stack([c.u1 for c in pairs])
        u2 = np.stack([c.u2 for c in pairs])
        ids = np.array([c.id for c in pairs], dtype=np.int64)
        return cls(u1, u2, ids)


def canonical_homography(H, zero_tol=1e-12):
    """Scale a 3x3 matrix to Frobenius norm 1 with positive last nonzero entry.

    Matrices equal up to a nonzero scale map to the same canonical form, so
    canonical matrices can be compared entrywise.
    """
    H = np.asarray(H, dtype=float).reshape(3, 3)
    nrm = np.linalg.norm(H)
    if not np.isfinite(nrm) or nrm < zero_tol:
        raise NonInvertible("cannot canonicalize a zero or non-finite matrix")
    # Skip the division on already-normalized input so canonicalization is
    # exactly idempotent.
    Hc = H if abs(nrm - 1.0) < 1e-15 else H / nrm
    flat = Hc.ravel()
    nz = np.flatnonzero(np.abs(flat) > zero_tol)
    if nz.size == 0:
        raise NonInvertible("cannot canonicalize a zero matrix")
    if flat[nz[-1]] < 0:
        Hc = -Hc
    return Hc


@dataclass(frozen=True)
class Homography:
    """A plane-induced mapping from view-1 pixels to view-2 pixels.

    The stored matrix is canonical (unit Frobenius norm, positive last
    nonzero entry), so two homographies equal up to scale compare equal.
    """

    H: np.ndarray

    def __post_init__(self):
        Hc = canonical_homography(self.H)
        if abs(np.linalg.det(Hc)) < _SINGULAR_TOL:
            raise NonInvertible("homography is singular within tolerance")
        Hc.setflags(write=False)
        object.__setattr__(self, "H", Hc)

    @property
    def matrix(self):
        return self.H

    def inverse(self):
        return Homography(np.linalg.inv(self.H))

    def apply(self, pts):
        """Map (n, 2) view-1 pixels through the homography."""
        return dehomogenize(homogenize(pts) @ self.H.T)

    def __eq__(self, other):
        if not isinstance(other, Homography):
            return NotImplemented
        return np.array_equal(self.H, other.H)


@dataclass(frozen=True)
class CovariancePair:
    """Per-correspondence reprojection covariances for both views (pixels^2)."""

    sigma12: np.ndarray
    sigma21: np.ndarray

    def __post_init__(self):
        for name in ("sigma12", "sigma21"):
            m = np.asarray(getattr(self, name), dtype=float).reshape(2, 2)
            if not np.allclose(m, m.T, atol=1e-12):
                raise ValueError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(m).min() <= 0:
                raise ValueError(f"{name} must be positive definite")
            object.__setattr__(self, name, m)


def _hartley_transform(pts):
    """Similarity mapping the points to centroid 0 and mean distance sqrt(2)."""
    c = pts.mean(axis=0)
    centered = pts - c
    d = np.sqrt((centered**2).sum(axis=1)).mean()
    if d < 1e-12:
        raise DegenerateSample("points are coincident")
    s = np.sqrt(2.0) / d
    T = np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])
    return T, centered * s


def estimate_homography_dlt(matches, u2=None):
    """Least-squares homography from >= 4 correspondences (normalized DLT).

    Accepts a CorrespondenceSet, a sequence of Correspondence, or a pair of
    (n, 2) arrays. Coordinates are Hartley-normalized, the 2n x 9 design
    matrix is solved by SVD null vector, and the result is canonical.

    Raises TooFewPoints below 4 matches and DegenerateSample when the design
    matrix is rank-deficient (e.g. 3 collinear points).
    """
    if u2 is not None:
        x1 = np.asarray(matches, dtype=float).reshape(-1, 2)
        x2 = np.asarray(u2, dtype=float).reshape(-1, 2)
    elif isinstance(matches, CorrespondenceSet):
        x1, x2 = matches.u1, matches.u2
    else:
        pairs = list(matches)
        x1 = np.array([c.u1 for c in pairs], dtype=float).reshape(-1, 2)
        x2 = np.array([c.u2 for c in pairs], dtype=float).reshape(-1, 2)
    n = x1.shape[0]
    if n < 4:
        raise TooFewPoints(f"need >= 4 correspondences, got {n}")

    T1, x1n = _hartley_transform(x1)
    T2, x2n = _hartley_transform(x2)

    h1 = homogenize(x1n)
    A = np.zeros((2 * n, 9))
    A[0::2, 0:3] = h1
    A[0::2, 6:9] = -x2n[:, 0:1] * h1
    A[1::2, 3:6] = h1
    A[1::2, 6:9] = -x2n[:, 1:2] * h1

    _, s, vt = np.linalg.svd(A)
    if s[0] < 1e-12 or s[7] <= 1e-8 * s[0]:
        raise DegenerateSample("design matrix is rank-deficient")
    Hn = vt[-1].reshape(3, 3)
    H = np.linalg.inv(T2) @ Hn @ T1
    try:
        return Homography(H)
    except NonInvertible as exc:
        raise DegenerateSample("estimated homography is singular") from exc


def _projective_jacobian(H, pts):
    """Jacobian of u -> dehomogenize(H [u, 1]) at each point, shape (n, 2, 2).

    Rows whose projective depth vanishes are returned as NaN; callers cap the
    resulting costs.
    """
    x = homogenize(pts)
    p = x @ H[0]
    q = x @ H[1]
    w = x @ H[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_w = 1.0 / w
        J = np.empty((x.shape[0], 2, 2))
        J[:, 0, 0] = (H[0, 0] - p * inv_w * H[2, 0]) * inv_w
        J[:, 0, 1] = (H[0, 1] - p * inv_w * H[2, 1]) * inv_w
        J[:, 1, 0] = (H[1, 0] - q * inv_w * H[2, 0]) * inv_w
        J[:, 1, 1] = (H[1, 1] - q * inv_w * H[2, 1]) * inv_w
    return J


def propagate_covariance(c: Correspondence, H: Homography, sigma_pixel: float) -> CovariancePair:
    """First-order reprojection covariances for one correspondence.

    Each view's covariance is J S J^T + S with S = sigma_pixel^2 I: the
    source-view pixel noise pushed through the mapping Jacobian, plus the
    destination-view measurement noise.
    """
    if sigma_pixel <= 0:
        raise ValueError("sigma_pixel must be positive")
    Hm = H.matrix if isinstance(H, Homography) else Homography(H).matrix
    if abs(np.linalg.det(Hm)) < _SINGULAR_TOL:
        raise NonInvertible("homography is singular")
    Hinv = np.linalg.inv(Hm)
    s2 = sigma_pixel**2
    eye = np.eye(2)
    J21 = _projective_jacobian(Hm, c.u1.reshape(1, 2))[0]
    J12 = _projective_jacobian(Hinv, c.u2.reshape(1, 2))[0]
    if not (np.isfinite(J21).all() and np.isfinite(J12).all()):
        raise NonInvertible("point maps to infinity under the homography")
    sigma21 = s2 * (J21 @ J21.T + eye)
    sigma12 = s2 * (J12 @ J12.T + eye)
    return CovariancePair(sigma12=sigma12, sigma21=sigma21)


def symmetric_transfer_cost(c: Correspondence, H: Homography, cov: CovariancePair) -> float:
    """Half-sum of squared Mahalanobis reprojection errors in both views."""
    Hm = H.matrix if isinstance(H, Homography) else Homography(H).matrix
    if abs(np.linalg.det(Hm)) < _SINGULAR_TOL:
        raise NonInvertible("homography is singular")
    Hinv = np.linalg.inv(Hm)

    p2 = dehomogenize(homogenize(c.u1.reshape(1, 2)) @ Hm.T)[0]
    p1 = dehomogenize(homogenize(c.u2.reshape(1, 2)) @ Hinv.T)[0]
    if not (np.isfinite(p1).all() and np.isfinite(p2).all()):
        return COST_CAP
    r2 = c.u2 - p2
    r1 = c.u1 - p1
    c2 = r2 @ np.linalg.inv(cov.sigma21) @ r2
    c1 = r1 @ np.linalg.inv(cov.sigma12) @ r1
    return float(min(0.5 * (c1 + c2), COST_CAP))


def _inv_2x2(M):
    """Batched closed-form inverse of (n, 2, 2) matrices."""
    det = M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.empty_like(M)
        inv[:, 0, 0] = M[:, 1, 1] / det
        inv[:, 1, 1] = M[:, 0, 0] / det
        inv[:, 0, 1] = -M[:, 0, 1] / det
        inv[:, 1, 0] = -M[:, 1, 0] / det
    return inv


def homography_costs(u1, u2, H: Homography, sigma_pixel: float):
    """Vectorized symmetric transfer cost with propagated covariances.

    Returns an (n,) array; points whose reprojection degenerates get COST_CAP.
    """
    u1 = np.asarray(u1, dtype=float).reshape(-1, 2)
    u2 = np.asarray(u2, dtype=float).reshape(-1, 2)
    Hm = H.matrix if isinstance(H, Homography) else Homography(H).matrix
    Hinv = np.linalg.inv(Hm)
    s2 = sigma_pixel**2
    eye = np.eye(2)

    out = np.zeros(u1.shape[0])
    for (src, dst, M) in ((u1, u2, Hm), (u2, u1, Hinv)):
        proj = dehomogenize(homogenize(src) @ M.T)
        J = _projective_jacobian(M, src)
        sigma = s2 * (J @ np.transpose(J, (0, 2, 1)) + eye)
        r = dst - proj
        mah = np.einsum("ni,nij,nj->n", r, _inv_2x2(sigma), r)
        out = out + 0.5 * mah
    bad = ~np.isfinite(out)
    out[bad] = COST_CAP
    return np.minimum(out, COST_CAP)


@dataclass(frozen=True)
class InverseDepthPlane:
    """Planar surface as an affine model of inverse depth over pixels.

    Inverse depth predicted at pixel u is <w, u> + c; w has units
    1/(meter*pixel) and c has units 1/meter.
    """

    w: np.ndarray
    c: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).reshape(2)
        c = float(self.c)
        if not (np.isfinite(w).all() and np.isfinite(c)):
            raise ValueError("plane parameters must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "c", c)

    def predict(self, coords):
        """Predicted inverse depth at (n, 2) pixel coordinates."""
        coords = np.asarray(coords, dtype=float).reshape(-1, 2)
        return coords @ self.w + self.c

    def params(self):
        return np.array([self.w[0], self.w[1], self.c])


def plane_cost(u, xi_u, plane: InverseDepthPlane, sigma_xi: float) -> float:
    """Squared inverse-depth residual against the plane, in sigma_xi units."""
    if sigma_xi <= 0:
        raise ValueError("sigma_xi must be positive")
    xi_u = float(xi_u)
    if not np.isfinite(xi_u) or xi_u <= 0:
        raise InvalidDepth(f"invalid inverse depth {xi_u}")
    r = xi_u - float(plane.predict(np.asarray(u, dtype=float).reshape(1, 2))[0])
    return (r / sigma_xi) ** 2


def plane_costs(coords, xi, plane: InverseDepthPlane, sigma_xi: float):
    """Vectorized plane_cost; invalid-depth pixels come back as +inf."""
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    xi = np.asarray(xi, dtype=float).reshape(-1)
    r = (xi - plane.predict(coords)) / sigma_xi
    out = r * r
    out[~np.isfinite(xi) | (xi <= 0)] = np.inf
    return out


def fit_plane(coords, xi, weights=None) -> InverseDepthPlane:
    """Weighted least-squares inverse-depth plane through (pixel, xi) samples.

    Minimizes sum of weight * (xi - <w, u> - c)^2. Needs >= 3 pixels not all
    collinear; raises DegenerateSample otherwise.
    """
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if coords.shape[0] != xi.shape[0]:
        raise ValueError("coords and xi length mismatch")
    if coords.shape[0] < 3:
        raise DegenerateSample(f"need >= 3 pixels, got {coords.shape[0]}")
    A = np.column_stack([coords, np.ones(coords.shape[0])])
    b = xi.copy()
    if weights is not None:
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if (weights < 0).any():
            raise ValueError("weights must be nonnegative")
        sw = np.sqrt(weights)
        A = A * sw[:, None]
        b = b * sw
    # Guard against scale-dependent rank tests: normalize columns first.
    scale = np.linalg.norm(A, axis=0)
    if (scale < 1e-12).any():
        raise DegenerateSample("pixel configuration is degenerate")
    sol, _, rank, _ = np.linalg.lstsq(A / scale, b, rcond=1e-10)
    if rank < 3:
        raise DegenerateSample("pixels are collinear")
    sol = sol / scale
    return InverseDepthPlane(w=sol[:2], c=sol[2])
