"""Synthetic scenes, the misclassification metric, and benchmark sweeps.

The main generator builds a corner scene: three mutually orthogonal plane
patches seen from two noisy pinhole cameras, with uniformly scattered
scene-space outliers. Sweeps drive the homography pipeline over noise or
outlier grids and report per-trial misclassification errors.
"""
from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DegenerateRays
from .geometry import (
    CorrespondenceSet,
    Homography,
    InverseDepthPlane,
    dehomogenize,
    homogenize,
)
from .pipelines import HomographyTask, run_homography_segmentation
from .seeding import seed_tuple
from .solver import OUTLIER


@dataclass(frozen=True)
class Camera:
    """Pinhole camera: X_cam = R @ X_world + t, pixels = dehom(K @ X_cam)."""

    K: np.ndarray
    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "K", np.asarray(self.K, dtype=float).reshape(3, 3))
        object.__setattr__(self, "R", np.asarray(self.R, dtype=float).reshape(3, 3))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float).reshape(3))

    @property
    def center(self):
        return -self.R.T @ self.t

    def transform(self, points):
        return np.asarray(points, dtype=float).reshape(-1, 3) @ self.R.T + self.t

    def project(self, points):
        """World points (n, 3) to pixels (n, 2); callers check depth > 0."""
        cam = self.transform(points)
        return dehomogenize(cam @ self.K.T)

    def depths(self, points):
        return self.transform(points)[:, 2]

    def ray(self, pixel):
        """Unit world-frame direction of the back-projected pixel."""
        v = np.linalg.solve(self.K, np.array([pixel[0], pixel[1], 1.0]))
        d = self.R.T @ v
        return d / np.linalg.norm(d)


def look_at(position, target, up=(0.0, 0.0, 1.0)):
    """Rotation/translation of a camera at `position` looking at `target`."""
    position = np.asarray(position, dtype=float)
    f = np.asarray(target, dtype=float) - position
    f = f / np.linalg.norm(f)
    x = np.cross(f, np.asarray(up, dtype=float))
    nx = np.linalg.norm(x)
    if nx < 1e-12:
        raise ValueError("view direction is parallel to the up vector")
    x = x / nx
    y = np.cross(f, x)
    R = np.stack([x, y, f])
    return R, -R @ position


@dataclass(frozen=True)
class PlanePatch:
    """Square patch on a 3-D plane: origin + a*e1 + b*e2, |a|,|b| <= half."""

    origin: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    half: float

    def __post_init__(self):
        for name in ("origin", "e1", "e2"):
            object.__setattr__(
                self, name, np.asarray(getattr(self, name), dtype=float).reshape(3)
            )

    @property
    def normal(self):
        n = np.cross(self.e1, self.e2)
        return n / np.linalg.norm(n)

    def plane_coefficients(self):
        """(n, d) with n . X = d for points X on the plane."""
        n = self.normal
        return n, float(n @ self.origin)

    def corners(self):
        a = self.half
        return np.array(
            [
                self.origin + sa * a * self.e1 + sb * a * self.e2
                for sa in (-1, 1)
                for sb in (-1, 1)
            ]
        )


@dataclass(frozen=True)
class SimScene:
    """Corner-scene recipe: patches, cameras, sampling and noise settings."""

    patches: tuple
    cameras: tuple
    image_size: tuple
    n_per_plane: int = 60
    sigma_pixel: float = 1.0
    outlier_ratio: float = 0.0


def make_corner_scene(
    n_per_plane=60,
    sigma_pixel=1.0,
    outlier_ratio=0.0,
    image_size=(640, 480),
    focal=525.0,
    distance=4.0,
    baseline_deg=30.0,
    patch_side=2.0,
) -> SimScene:
    """Three mutually orthogonal patches (two walls and a floor) and two
    cameras on a circle around the corner, separated by baseline_deg."""
    half = patch_side / 2.0
    ex, ey, ez = np.eye(3)
    patches = (
        PlanePatch(origin=(half, half, 0.0), e1=ex, e2=ey, half=half),
        PlanePatch(origin=(0.0, half, half), e1=ey, e2=ez, half=half),
        PlanePatch(origin=(half, 0.0, half), e1=ez, e2=ex, half=half),
    )
    w, h = image_size
    K = np.array([[focal, 0, w / 2.0], [0, focal, h / 2.0], [0, 0, 1.0]])
    target = np.full(3, 0.4 * patch_side)
    base_dir = np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0)
    cams = []
    for sign in (-1.0, 1.0):
        a = np.deg2rad(sign * baseline_deg / 2.0)
        rz = np.array(
            [[np.cos(a), -np.sin(a), 0], [np.sin(a), np.cos(a), 0], [0, 0, 1.0]]
        )
        position = target + distance * (rz @ base_dir)
        R, t = look_at(position, target)
        cams.append(Camera(K=K, R=R, t=t))
    return SimScene(
        patches=patches,
        cameras=tuple(cams),
        image_size=(int(w), int(h)),
        n_per_plane=int(n_per_plane),
        sigma_pixel=float(sigma_pixel),
        outlier_ratio=float(outlier_ratio),
    )


@dataclass
class SimSample:
    """Generated correspondences with ground truth attached."""

    u1: np.ndarray
    u2: np.ndarray
    u1_clean: np.ndarray
    u2_clean: np.ndarray
    gt_labels: np.ndarray
    points3d: np.ndarray
    homographies: list
    scene: SimScene

    @property
    def correspondences(self):
        return CorrespondenceSet(self.u1, self.u2)


def _visible(scene, points):
    w, h = scene.image_size
    ok = np.ones(len(points), dtype=bool)
    for cam in scene.cameras:
        uv = cam.project(points)
        z = cam.depths(points)
        ok &= (
            (z > 0.1)
            & (uv[:, 0] >= 0)
            & (uv[:, 0] <= w - 1)
            & (uv[:, 1] >= 0)
            & (uv[:, 1] <= h - 1)
        )
    return ok


def _rejection_sample(scene, draw, count, rng, max_rounds=200):
    """Accumulate `count` points visible in both views, drawing in batches."""
    out = []
    have = 0
    for _ in range(max_rounds):
        cand = draw(rng, max(count - have, 8))
        keep = cand[_visible(scene, cand)]
        if len(keep):
            out.append(keep)
            have += len(keep)
        if have >= count:
            break
    else:
        raise RuntimeError("scene geometry leaves too few points visible")
    return np.concatenate(out)[:count]


def true_homography(scene: SimScene, patch: PlanePatch) -> Homography:
    """Plane-induced view-1 -> view-2 homography for a patch."""
    cam1, cam2 = scene.cameras
    n_w, d_w = patch.plane_coefficients()
    n1 = cam1.R @ n_w
    d1 = d_w + n1 @ cam1.t
    if abs(d1) < 1e-12:
        raise ValueError("plane passes through the first camera center")
    R_rel = cam2.R @ cam1.R.T
    t_rel = cam2.t - R_rel @ cam1.t
    H = cam2.K @ (R_rel + np.outer(t_rel, n1) / d1) @ np.linalg.inv(cam1.K)
    return Homography(H)


def generate_scene(scene: SimScene, seed=0) -> SimSample:
    """Sample the scene: per-patch uniform points, then scene-space outliers.

    Pixel noise is isotropic Gaussian with std scene.sigma_pixel, drawn
    independently per view. Outlier count is outlier_ratio times the inlier
    count; outliers are uniform in the inflated bounding box of the patches
    and must project inside both views.
    """
    rng = np.random.default_rng(seed_tuple(seed))
    pts = []
    labels = []
    for li, patch in enumerate(scene.patches):
        def draw(r, m, patch=patch):
            ab = r.uniform(-patch.half, patch.half, size=(m, 2))
            return patch.origin + ab[:, :1] * patch.e1 + ab[:, 1:2] * patch.e2

        sampled = _rejection_sample(scene, draw, scene.n_per_plane, rng)
        pts.append(sampled)
        labels.append(np.full(len(sampled), li, dtype=np.int64))

    inliers = np.concatenate(pts)
    n_out = int(round(scene.outlier_ratio * len(inliers)))
    if n_out > 0:
        corners = np.concatenate([p.corners() for p in scene.patches])
        lo = corners.min(axis=0)
        hi = corners.max(axis=0)
        span = hi - lo
        lo = lo - 0.1 * span
        hi = hi + 0.1 * span

        def draw_out(r, m):
            return r.uniform(lo, hi, size=(m, 3))

        outs = _rejection_sample(scene, draw_out, n_out, rng)
        points = np.concatenate([inliers, outs])
        gt = np.concatenate([np.concatenate(labels), np.full(n_out, OUTLIER)])
    else:
        points = inliers
        gt = np.concatenate(labels)

    cam1, cam2 = scene.cameras
    u1_clean = cam1.project(points)
    u2_clean = cam2.project(points)
    u1 = u1_clean + rng.normal(0.0, scene.sigma_pixel, size=u1_clean.shape)
    u2 = u2_clean + rng.normal(0.0, scene.sigma_pixel, size=u2_clean.shape)
    homs = [true_homography(scene, p) for p in scene.patches]
    return SimSample(
        u1=u1,
        u2=u2,
        u1_clean=u1_clean,
        u2_clean=u2_clean,
        gt_labels=gt,
        points3d=points,
        homographies=homs,
        scene=scene,
    )


def misclassification_error(pred_labels, gt_labels) -> float:
    """Fraction of points mislabeled after the best model-to-model matching.

    Predicted models are matched one-to-one to ground-truth models by
    maximizing label agreement (Hungarian assignment on the contingency
    table); the outlier label only ever matches the outlier label.
    """
    pred = np.asarray(pred_labels).reshape(-1)
    gt = np.asarray(gt_labels).reshape(-1)
    if pred.shape != gt.shape:
        raise ValueError("label vectors must have equal length")
    n = len(pred)
    if n == 0:
        return 0.0
    pred_ids = np.unique(pred[pred >= 0])
    gt_ids = np.unique(gt[gt >= 0])
    correct = int(((pred == OUTLIER) & (gt == OUTLIER)).sum())
    if len(pred_ids) and len(gt_ids):
        C = np.zeros((len(gt_ids), len(pred_ids)), dtype=np.int64)
        for i, g in enumerate(gt_ids):
            mask = gt == g
            for j, p in enumerate(pred_ids):
                C[i, j] = int((mask & (pred == p)).sum())
        rows, cols = linear_sum_assignment(-C)
        correct += int(C[rows, cols].sum())
    return (n - correct) / n


def triangulate(correspondence, cameras):
    """Midpoint triangulation of one correspondence from two cameras.

    Solves for the closest points of the two back-projected rays and
    returns their midpoint; raises DegenerateRays when the rays are
    parallel within tolerance.
    """
    if hasattr(correspondence, "u1"):
        p1, p2 = correspondence.u1, correspondence.u2
    else:
        p1, p2 = correspondence
    cam1, cam2 = cameras
    c1, c2 = cam1.center, cam2.center
    d1, d2 = cam1.ray(p1), cam2.ray(p2)
    dd = d1 @ d2
    M = np.array([[1.0, -dd], [dd, -1.0]])
    det = np.linalg.det(M)
    if abs(det) < 1e-12:
        raise DegenerateRays("back-projected rays are parallel")
    rhs = np.array([d1 @ (c2 - c1), d2 @ (c2 - c1)])
    a, b = np.linalg.solve(M, rhs)
    return 0.5 * ((c1 + a * d1) + (c2 + b * d2))


@dataclass(frozen=True)
class SweepRow:
    method: str
    sweep_value: float
    trial: int
    me: float


def _run_sweep_cell(args):
    (kind, value, trial, method, scene, seed, task_params) = args
    if kind == "noise":
        scene = dataclasses.replace(scene, sigma_pixel=float(value))
    else:
        scene = dataclasses.replace(scene, sigma_pixel=1.0, outlier_ratio=float(value))
    sample = generate_scene(scene, seed=seed_tuple(seed, trial))
    params = dict(task_params or {})
    params.setdefault("sigma_pixel", scene.sigma_pixel if scene.sigma_pixel > 0 else 0.5)
    task = HomographyTask(
        correspondences=sample.correspondences,
        seed=seed_tuple(seed, trial),
        **params,
    )
    result = run_homography_segmentation(task, method=method)
    me = misclassification_error(result.labels, sample.gt_labels)
    return SweepRow(method=method, sweep_value=float(value), trial=trial, me=me)


def _run_sweep(kind, values, n_trials, methods, scene, seed, task_params, n_jobs):
    cells = [
        (kind, float(v), t, m, scene, seed, task_params)
        for v in values
        for m in methods
        for t in range(n_trials)
    ]
    if n_jobs and n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            rows = list(pool.map(_run_sweep_cell, cells))
    else:
        rows = [_run_sweep_cell(c) for c in cells]
    return rows


def run_noise_sweep(
    sigmas, n_trials, methods=("coral", "ransac"), scene=None, seed=0,
    task_params=None, n_jobs=1,
):
    """Mean-ME study over pixel-noise levels; one row per (value, method,
    trial). Trials reuse the same per-trial scene seed across methods and
    sweep kinds so cells are directly comparable."""
    scene = scene or make_corner_scene()
    return _run_sweep("noise", sigmas, n_trials, methods, scene, seed, task_params, n_jobs)


def run_outlier_sweep(
    ratios, n_trials, methods=("coral", "ransac"), scene=None, seed=0,
    task_params=None, n_jobs=1,
):
    """Mean-ME study over outlier ratios at sigma_pixel = 1.0."""
    scene = scene or make_corner_scene()
    return _run_sweep("outliers", ratios, n_trials, methods, scene, seed, task_params, n_jobs)


def aggregate_rows(rows):
    """Per (method, sweep value) mean/std/count of the ME column."""
    cells = {}
    for r in rows:
        cells.setdefault((r.method, r.sweep_value), []).append(r.me)
    out = {}
    for key in sorted(cells):
        v = np.asarray(cells[key])
        out[key] = {"mean": float(v.mean()), "std": float(v.std()), "n": int(len(v))}
    return out


def render_wedge_scene(width=48, height=36, noise=0.0, seed=0, crease_frac=0.5):
    """Two planes meeting at a vertical crease, with a step intensity edge.

    Returns (xi, intensity, gt_labels, planes): inverse depth (H, W),
    intensity in [0, 1], per-pixel labels 0/1, and the two generating
    planes. Inverse depth is continuous across the crease; the surface
    normal (and the intensity) jumps there.
    """
    xc = crease_frac * (width - 1)
    w_left = np.array([0.004, 0.0012])
    w_right = np.array([-0.0035, 0.0012])
    c_left = 0.45
    c_right = c_left + (w_left[0] - w_right[0]) * xc
    left = InverseDepthPlane(w=w_left, c=c_left)
    right = InverseDepthPlane(w=w_right, c=c_right)

    xs, ys = np.meshgrid(np.arange(width), np.arange(height))
    coords = np.column_stack([xs.ravel(), ys.ravel()]).astype(float)
    xi_left = left.predict(coords).reshape(height, width)
    xi_right = right.predict(coords).reshape(height, width)
    on_left = xs < xc
    xi = np.where(on_left, xi_left, xi_right)
    if noise > 0:
        rng = np.random.default_rng(seed_tuple(seed))
        xi = xi + rng.normal(0.0, noise, size=xi.shape)
        xi = np.maximum(xi, 1e-3)
    intensity = np.where(on_left, 0.25, 0.75).astype(float)
    gt = np.where(on_left, 0, 1).astype(np.int64)
    return xi, intensity, gt, [left, right]


def make_single_homography_matches(n, seed=0, image_size=(640, 480), noise=0.0):
    """Correspondences all explained by one mild random homography."""
    rng = np.random.default_rng(seed_tuple(seed))
    w, h = image_size
    u1 = rng.uniform([0.1 * w, 0.1 * h], [0.9 * w, 0.9 * h], size=(n, 2))
    # Mild projective perturbation of a similarity keeps points in frame.
    angle = rng.uniform(-0.05, 0.05)
    ca, sa = np.cos(angle), np.sin(angle)
    H = np.array(
        [
            [ca * 1.02, -sa, rng.uniform(-8, 8)],
            [sa, ca * 0.98, rng.uniform(-8, 8)],
            [rng.uniform(-1e-5, 1e-5), rng.uniform(-1e-5, 1e-5), 1.0],
        ]
    )
    hom = Homography(H)
    u2 = hom.apply(u1)
    if noise > 0:
        u1 = u1 + rng.normal(0, noise, size=u1.shape)
        u2 = u2 + rng.normal(0, noise, size=u2.shape)
    return CorrespondenceSet(u1, u2), hom
