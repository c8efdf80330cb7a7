"""Stochastic model proposals from minimal samples.

Each proposal draws a minimal sample (optionally localized around an anchor
point), fits a model, and keeps the provenance indices. Degenerate draws are
retried a bounded number of times; proposals use independent RNG streams
derived from (seed, proposal index) so they are reproducible and could run
in parallel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSample, InsufficientLocalPoints, NoModelsProposed
from .seeding import seed_tuple

_MAX_RETRIES = 50


@dataclass
class ProposalConfig:
    """Controls for the proposal stage.

    inlier_threshold is carried for scoring-style extensions but proposals
    are passed on unfiltered; the merging step and the per-model cost prune
    them later.
    """

    s: int = 100
    sample_size: int = 4
    inlier_threshold: float = None
    seed: int = 0
    local_radius: float = None

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("s must be >= 1")
        if self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")


@dataclass
class Proposal:
    """A model hypothesis plus the minimal sample it came from."""

    model: object
    sample_indices: np.ndarray


def local_sample(positions, candidates, anchor_index, radius, sample_size, rng):
    """Minimal sample drawn from the ball around an anchor point.

    Returns sorted indices including the anchor; raises
    InsufficientLocalPoints when fewer than sample_size candidates fall
    within radius of the anchor.
    """
    positions = np.asarray(positions, dtype=float)
    candidates = np.asarray(candidates, dtype=np.int64)
    d = np.linalg.norm(positions[candidates] - positions[anchor_index], axis=1)
    near = candidates[d <= radius]
    if len(near) < sample_size:
        raise InsufficientLocalPoints(
            f"{len(near)} points within radius {radius}, need {sample_size}"
        )
    others = near[near != anchor_index]
    pick = rng.choice(others, size=sample_size - 1, replace=False)
    return np.sort(np.concatenate([[anchor_index], pick]))


def consensus_refine(estimator, models, inlier_threshold, rounds=2):
    """Polish hypotheses by refitting each on its own inlier set.

    Standard local optimization: points cheaper than the threshold are
    claimed and the model is refit on them; the refit is kept only when it
    lowers the claimed points' summed cost. Minimal-sample models
    extrapolate poorly under noise, so a round or two of this turns lucky
    pure samples into usable structure-wide hypotheses.
    """
    out = []
    for m in models:
        for _ in range(rounds):
            inliers = np.flatnonzero(estimator.costs(m) <= inlier_threshold)
            if len(inliers) < estimator.min_sample:
                break
            try:
                refit = estimator.fit(inliers)
            except DegenerateSample:
                break
            if estimator.costs(refit)[inliers].sum() > estimator.costs(m)[inliers].sum():
                break
            m = refit
        out.append(m)
    return out


def propose_models(estimator, cfg: ProposalConfig):
    """Draw up to cfg.s minimal-sample model hypotheses.

    Sampling is uniform over the estimator's candidate points; when
    cfg.local_radius is set, each proposal anchors at a random candidate and
    samples within the radius, falling back to a global draw if the
    neighborhood is too thin. Raises NoModelsProposed when every draw
    degenerates (or there are not enough points for a single sample).
    """
    candidates = getattr(estimator, "candidate_indices", None)
    if candidates is None:
        candidates = np.arange(estimator.n_points, dtype=np.int64)
    candidates = np.asarray(candidates, dtype=np.int64)
    size = cfg.sample_size
    if len(candidates) < size:
        raise NoModelsProposed(
            f"{len(candidates)} candidate points, need {size} for a sample"
        )
    positions = getattr(estimator, "positions", None)

    proposals = []
    for p in range(cfg.s):
        rng = np.random.default_rng(seed_tuple(cfg.seed, p))
        for _ in range(_MAX_RETRIES):
            idx = None
            if cfg.local_radius is not None and positions is not None:
                anchor = int(rng.choice(candidates))
                try:
                    idx = local_sample(
                        positions, candidates, anchor, cfg.local_radius, size, rng
                    )
                except InsufficientLocalPoints:
                    idx = None
            if idx is None:
                idx = np.sort(rng.choice(candidates, size=size, replace=False))
            try:
                model = estimator.fit(idx)
            except DegenerateSample:
                continue
            proposals.append(Proposal(model=model, sample_indices=idx))
            break
    if not proposals:
        raise NoModelsProposed("every minimal sample degenerated")
    return proposals
