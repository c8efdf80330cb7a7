"""Relaxed multi-label fitting: primal-dual inner loop and the outer loop.

The energy being minimized is

    sum_l [ sum_u rho_l(u) phi_l(u) + lam * penalty(weighted grad phi_l) ]
        + beta * (number of active models)

over soft assignments phi with rows on the unit simplex, where one column is
the constant-cost outlier label. The inner solver alternates a projected
dual ascent and a projected primal descent with diagonally preconditioned
step sizes; the outer loop thresholds, merges, and re-estimates models.

Model access goes through an estimator object (duck-typed); it must provide
``n_points``, ``min_sample``, ``fit(indices) -> model``,
``costs(model) -> (n,) array``, ``distance(a, b) -> float``, and optionally
``forced_outlier`` (a boolean mask of points that may never take a model
label) plus ``candidate_indices`` / ``positions`` for the proposal stage.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSample, NoModelsProposed
from .neighborhood import NeighborhoodGraph, PenaltyNorm, gradient, penalty_value
from .seeding import seed_tuple

OUTLIER = -1

_EDGE_COST_CAP = 1e12


@dataclass
class LabelField:
    """Soft label assignment: (n, L) rows on the simplex.

    When has_outlier is set the last column is the outlier label.
    """

    phi: np.ndarray
    has_outlier: bool = True

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        if self.phi.ndim != 2:
            raise ValueError("phi must be (n, L)")

    @property
    def n(self):
        return self.phi.shape[0]

    @property
    def n_labels(self):
        return self.phi.shape[1]

    @property
    def n_models(self):
        return self.n_labels - 1 if self.has_outlier else self.n_labels

    def validate(self, row_tol=1e-6, box_tol=1e-9):
        if not np.isfinite(self.phi).all():
            raise ValueError("phi has non-finite entries")
        if (self.phi < -box_tol).any() or (self.phi > 1 + box_tol).any():
            raise ValueError("phi entries leave [0, 1]")
        if np.abs(self.phi.sum(axis=1) - 1.0).max() > row_tol:
            raise ValueError("phi rows must sum to 1")

    @classmethod
    def uniform(cls, n, n_models, has_outlier=True):
        L = n_models + (1 if has_outlier else 0)
        return cls(np.full((n, L), 1.0 / L), has_outlier=has_outlier)

    @classmethod
    def from_hard(cls, labels, n_models, has_outlier=True):
        labels = np.asarray(labels, dtype=np.int64)
        L = n_models + (1 if has_outlier else 0)
        phi = np.zeros((len(labels), L))
        cols = np.where(labels == OUTLIER, L - 1, labels)
        phi[np.arange(len(labels)), cols] = 1.0
        return cls(phi, has_outlier=has_outlier)


@dataclass
class DualField:
    """Per-edge per-label dual variable, constrained to the dual-norm ball."""

    psi: np.ndarray

    def check_norm(self, graph, norm, tol=1e-9):
        if norm is PenaltyNorm.L11:
            return float(np.abs(self.psi).max(initial=0.0)) <= 1 + tol
        g = np.sqrt(_group_norms_sq(graph, self.psi))
        return float(g.max(initial=0.0)) <= 1 + tol


@dataclass(frozen=True)
class CostMatrix:
    """Per-point per-label data costs; last column is the outlier cost."""

    rho: np.ndarray
    gamma: float = None

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        if rho.ndim != 2:
            raise ValueError("rho must be (n, L)")
        if not np.isfinite(rho).all():
            raise ValueError("costs must be finite")
        if (rho < 0).any():
            raise ValueError("costs must be nonnegative")
        if self.gamma is not None:
            if self.gamma < 0:
                raise ValueError("gamma must be nonnegative")
            if rho.shape[1] < 1 or not (rho[:, -1] == self.gamma).all():
                raise ValueError("outlier column must equal gamma everywhere")
        object.__setattr__(self, "rho", rho)

    @property
    def n(self):
        return self.rho.shape[0]

    @property
    def n_labels(self):
        return self.rho.shape[1]

    @property
    def n_models(self):
        return self.n_labels - (1 if self.gamma is not None else 0)

    @classmethod
    def build(cls, model_costs, gamma, n_points=None):
        """Stack per-model cost columns and append the outlier column.

        Non-finite entries (points a model cannot explain) are replaced by
        gamma so every entry stays finite.
        """
        cols = [np.asarray(c, dtype=float).reshape(-1) for c in model_costs]
        if cols:
            n_points = len(cols[0])
        elif n_points is None:
            raise ValueError("n_points required when no models are given")
        parts = []
        for c in cols:
            fill = gamma if gamma is not None else _EDGE_COST_CAP
            parts.append(np.where(np.isfinite(c), c, fill))
        if gamma is not None:
            parts.append(np.full(n_points, float(gamma)))
        rho = np.column_stack(parts) if parts else np.zeros((n_points, 0))
        return cls(rho, gamma=gamma)


@dataclass
class SolverConfig:
    """Energy weights and iteration controls.

    Step sizes are not configured: they come from diagonal preconditioning.
    convergence_eps is relative to the initial outer-loop energy.
    """

    lam: float = 1.0
    beta: float = 100.0
    gamma: float = 20.0
    theta: float = 1.0
    n_inner: int = 500
    max_outer: int = 20
    merge_tolerance: float = math.inf
    convergence_eps: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0 or self.beta < 0 or self.gamma < 0:
            raise ValueError("lam, beta, gamma must be nonnegative")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.n_inner < 1 or self.max_outer < 1:
            raise ValueError("n_inner and max_outer must be >= 1")


@dataclass(frozen=True)
class EnergyTriple:
    """Data, smoothness and model-count parts of the total energy."""

    data: float
    smoothness: float
    label_cost: float

    @property
    def total(self):
        return self.data + self.smoothness + self.label_cost

    def as_tuple(self):
        return (self.data, self.smoothness, self.label_cost)


@dataclass
class FitResult:
    """Hard labels, surviving models, and the outer-loop energy trace."""

    labels: np.ndarray
    models: list
    energy_trace: list
    iterations: int


def project_simplex(v):
    """Euclidean projection of each row onto {x >= 0, sum x = 1}.

    Sort-and-threshold: with the row sorted descending, the active threshold
    is the largest prefix whose shifted mean stays below the entries.
    """
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    V = np.atleast_2d(v)
    n, L = V.shape
    u = np.sort(V, axis=1)[:, ::-1]
    css = np.cumsum(u, axis=1) - 1.0
    j = np.arange(1, L + 1)
    cond = u * j > css
    rho = L - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(n), rho] / (rho + 1)
    out = np.maximum(V - theta[:, None], 0.0)
    return out[0] if single else out


def _group_norms_sq(graph, psi):
    """Squared L2 norm of psi over each per-source edge group; (G, L)."""
    psi = np.asarray(psi, dtype=float)
    if graph.n_edges == 0:
        return np.zeros((0,) + psi.shape[1:])
    return np.add.reduceat(psi * psi, graph.group_start, axis=0)


def project_dual(psi, norm: PenaltyNorm, graph: NeighborhoodGraph = None):
    """Project the dual variable onto the feasible dual-norm ball.

    L11 primal: clamp components to [-1, 1]. L12 primal: scale each
    per-source group (per label) back onto the unit L2 ball,
    psi -> psi / max(1, |psi|).
    """
    psi = np.asarray(psi, dtype=float)
    if norm is PenaltyNorm.L11:
        return np.clip(psi, -1.0, 1.0)
    if norm is not PenaltyNorm.L12:
        raise ValueError(f"unknown norm {norm}")
    if graph is None:
        if psi.ndim != 1:
            raise ValueError("L12 projection needs the graph for 2-D fields")
        return psi / max(1.0, float(np.linalg.norm(psi)))
    norms = np.sqrt(_group_norms_sq(graph, psi))
    scale = 1.0 / np.maximum(1.0, norms)
    sizes = np.diff(np.append(graph.group_start, graph.n_edges))
    return psi * np.repeat(scale, sizes, axis=0)


def precondition(graph: NeighborhoodGraph, lam: float):
    """Per-element step sizes from row/column sums of the scaled operator.

    For K = lam * weighted gradient: tau_e = 1 / sum_i |K_ei| (dual) and
    alpha_i = 1 / sum_e |K_ei| (primal). Elements the operator never touches
    fall back to step 1, the data-term scale.
    """
    row = 2.0 * lam * graph.weight
    tau = np.where(row > 0, 1.0 / np.maximum(row, 1e-300), 1.0)
    col = np.bincount(graph.src, weights=graph.weight, minlength=graph.n_points)
    col += np.bincount(graph.dst, weights=graph.weight, minlength=graph.n_points)
    col *= lam
    alpha = np.where(col > 0, 1.0 / np.maximum(col, 1e-300), 1.0)
    return tau, alpha


def total_energy(assignment, cost: CostMatrix, graph, norm, cfg: SolverConfig) -> EnergyTriple:
    """Energy triple (data, smoothness, label cost) of an assignment.

    Hard labels (int array, OUTLIER = -1) charge beta per model that still
    owns at least one point; a relaxed LabelField charges beta per model
    column since none has been eliminated yet.
    """
    if isinstance(assignment, LabelField):
        phi = assignment.phi
        if phi.shape != cost.rho.shape:
            raise ValueError("phi and cost shapes differ")
        data = float((cost.rho * phi).sum())
        smooth = cfg.lam * penalty_value(norm, gradient(graph, phi), graph)
        label = cfg.beta * cost.n_models
        return EnergyTriple(data, smooth, label)

    labels = np.asarray(assignment)
    if not np.issubdtype(labels.dtype, np.integer):
        raise TypeError("assignment must be a LabelField or an integer array")
    if labels.shape[0] != cost.n:
        raise ValueError("labels and cost sizes differ")
    if labels.min(initial=0) < OUTLIER or labels.max(initial=-1) >= cost.n_models:
        raise ValueError("labels out of range for the cost matrix")
    if (labels == OUTLIER).any() and cost.gamma is None:
        raise ValueError("outlier labels but the cost matrix has no outlier column")

    cols = np.where(labels == OUTLIER, cost.n_labels - 1, labels)
    data = float(cost.rho[np.arange(cost.n), cols].sum())
    onehot = np.zeros_like(cost.rho)
    onehot[np.arange(cost.n), cols] = 1.0
    smooth = cfg.lam * penalty_value(norm, gradient(graph, onehot), graph)
    active = np.unique(labels[labels >= 0])
    label = cfg.beta * len(active)
    return EnergyTriple(data, smooth, label)


def primal_dual_solve(
    cost: CostMatrix,
    graph: NeighborhoodGraph,
    norm: PenaltyNorm,
    cfg: SolverConfig,
    phi0: LabelField,
    return_info=False,
    debug_checks=False,
):
    """Preconditioned primal-dual iterations for the relaxed labeling.

    Per iteration: dual ascent with projection onto the dual-norm ball,
    primal descent on data + divergence with simplex projection, then
    over-relaxation with factor theta. Runs cfg.n_inner iterations with an
    early exit once the per-point change stays below 1e-5 for 10 consecutive
    iterations. Returns the best (data + smoothness) iterate seen at the
    periodic checkpoints, which is never worse than phi0.
    """
    phi0.validate()
    if cost.rho.shape != phi0.phi.shape:
        raise ValueError("cost and phi0 shapes differ")
    if cost.n != graph.n_points:
        raise ValueError("cost rows and graph points differ")

    rho = cost.rho
    K = graph.incidence() * cfg.lam
    KT = K.T.tocsr()
    tau, alpha = precondition(graph, cfg.lam)
    tau = tau[:, None]
    alpha = alpha[:, None]

    def relaxed_energy(p):
        return float((rho * p).sum()) + penalty_value(norm, K @ p, graph)

    phi = phi0.phi.copy()
    phibar = phi.copy()
    psi = np.zeros((graph.n_edges, rho.shape[1]))

    best_energy = relaxed_energy(phi)
    best_phi = phi.copy()
    gap_trace = []
    check_every = 10
    quiet_iters = 0
    used = 0

    for k in range(cfg.n_inner):
        psi = project_dual(psi + tau * (K @ phibar), norm, graph)
        div = KT @ psi
        phi_new = project_simplex(phi - alpha * (rho + div))
        if debug_checks:
            assert DualField(psi).check_norm(graph, norm)
            LabelField(phi_new, phi0.has_outlier).validate()
        delta = float(np.abs(phi_new - phi).max(initial=0.0))
        phibar = phi_new + cfg.theta * (phi_new - phi)
        phi = phi_new
        used = k + 1

        if (k + 1) % check_every == 0 or k + 1 == cfg.n_inner:
            primal = relaxed_energy(phi)
            dual = float((rho + div).min(axis=1).sum())
            gap_trace.append((k + 1, primal - dual))
            if primal < best_energy:
                best_energy = primal
                best_phi = phi.copy()

        quiet_iters = quiet_iters + 1 if delta < 1e-5 else 0
        if quiet_iters >= 10:
            primal = relaxed_energy(phi)
            if primal < best_energy:
                best_energy = primal
                best_phi = phi.copy()
            break

    out = LabelField(best_phi, has_outlier=phi0.has_outlier)
    if return_info:
        info = {
            "iterations": used,
            "gap_trace": gap_trace,
            "energy": best_energy,
            "early_exit": used < cfg.n_inner,
        }
        return out, info
    return out


def threshold_labels(phi: LabelField):
    """Hard labels by row argmax; ties go to the lowest model index and the
    outlier (last column) never wins a tie."""
    labels = np.argmax(phi.phi, axis=1).astype(np.int64)
    if phi.has_outlier:
        labels[labels == phi.n_labels - 1] = OUTLIER
    return labels


def _apply_forced(labels, estimator):
    forced = getattr(estimator, "forced_outlier", None)
    if forced is not None:
        labels = labels.copy()
        labels[np.asarray(forced, dtype=bool)] = OUTLIER
    return labels


def _data_cost(estimator, model, indices):
    if len(indices) == 0:
        return 0.0
    return float(estimator.costs(model)[indices].sum())


def _shift_mapping(mapping, removed):
    out = mapping.copy()
    out[mapping == removed] = OUTLIER
    out[mapping > removed] -= 1
    return out


def merge_models(models, labels, estimator, cfg: SolverConfig):
    """Greedy model merging driven by the per-model cost beta.

    Candidate moves are pairwise merges (replace two models by a joint refit
    on the union of their points) and merges into the outlier label (delete
    a model, its points pay gamma). A move is admissible when its data-cost
    increase stays below beta, so every move strictly lowers the total
    energy; the largest decrease is applied first and the scan repeats until
    no admissible move remains. Pair candidates beyond cfg.merge_tolerance
    in parameter distance are skipped.

    Returns (models, labels, mapping) where mapping sends each input model
    index to its surviving index or OUTLIER.
    """
    models = list(models)
    labels = np.asarray(labels).copy()
    mapping = np.arange(len(models), dtype=np.int64)

    while True:
        m = len(models)
        costs = [estimator.costs(mod) for mod in models]
        points = [np.flatnonzero(labels == i) for i in range(m)]
        own = [float(costs[i][points[i]].sum()) if len(points[i]) else 0.0 for i in range(m)]

        best = None  # (decrease, order, payload)
        for i in range(m):
            for j in range(i + 1, m):
                if estimator.distance(models[i], models[j]) > cfg.merge_tolerance:
                    continue
                union = np.concatenate([points[i], points[j]])
                if len(union) < estimator.min_sample:
                    continue
                try:
                    joint = estimator.fit(union)
                except DegenerateSample:
                    continue
                d_new = _data_cost(estimator, joint, union)
                decrease = cfg.beta - (d_new - own[i] - own[j])
                if decrease > 0 and (best is None or decrease > best[0] + 1e-12):
                    best = (decrease, ("pair", i, j), joint)
        if cfg.gamma is not None:
            for i in range(m):
                delta = cfg.gamma * len(points[i]) - own[i]
                decrease = cfg.beta - delta
                if decrease > 0 and (best is None or decrease > best[0] + 1e-12):
                    best = (decrease, ("drop", i, -1), None)

        if best is None:
            break
        _, (kind, i, j), joint = best
        if kind == "pair":
            models[i] = joint
            labels[labels == j] = i
            labels[labels > j] -= 1
            models.pop(j)
            mapping = _shift_mapping_merge(mapping, j, i)
        else:
            labels[points[i]] = OUTLIER
            labels[labels > i] -= 1
            models.pop(i)
            mapping = _shift_mapping(mapping, i)
    return models, labels, mapping


def _shift_mapping_merge(mapping, removed, target):
    out = mapping.copy()
    out[mapping == removed] = target
    out[mapping > removed] -= 1
    return out


def _drop_unsupported(models, labels):
    """Remove models that own no points; returns (models, labels, mapping)."""
    m = len(models)
    support = np.bincount(labels[labels >= 0], minlength=m) if m else np.zeros(0)
    keep = support > 0
    mapping = np.full(m, OUTLIER, dtype=np.int64)
    mapping[keep] = np.arange(int(keep.sum()))
    new_models = [mod for mod, k in zip(models, keep) if k]
    new_labels = labels.copy()
    pos = new_labels >= 0
    new_labels[pos] = mapping[new_labels[pos]]
    return new_models, new_labels, mapping


def _compose(first, second):
    out = first.copy()
    pos = out >= 0
    out[pos] = second[out[pos]]
    return out


def _warm_start(phi: LabelField, mapping, n_models):
    """Restrict a relaxed field to the surviving models, renormalized.

    Mass of merged columns is combined; mass of removed columns flows to the
    outlier column.
    """
    old = phi.phi
    n = old.shape[0]
    L = n_models + 1
    out = np.zeros((n, L))
    for old_col, tgt in enumerate(mapping):
        col = tgt if tgt >= 0 else L - 1
        out[:, col] += old[:, old_col]
    out[:, L - 1] += old[:, -1]
    s = out.sum(axis=1, keepdims=True)
    flat = s[:, 0] <= 1e-12
    if flat.any():
        out[flat] = 1.0 / L
        s = out.sum(axis=1, keepdims=True)
    return LabelField(out / s, has_outlier=True)


def _initial_labels(cost: CostMatrix):
    labels = np.argmin(cost.rho, axis=1).astype(np.int64)
    if cost.gamma is not None:
        labels[labels == cost.n_labels - 1] = OUTLIER
    return labels


def _build_cost(estimator, models, gamma):
    return CostMatrix.build(
        [estimator.costs(m) for m in models], gamma, n_points=estimator.n_points
    )


def coral_fit(
    estimator,
    graph: NeighborhoodGraph,
    norm: PenaltyNorm,
    cfg: SolverConfig,
    proposer=None,
    initial_models=None,
    merge=True,
) -> FitResult:
    """Full alternating fit: propose, then loop (solve, merge, re-estimate).

    ``proposer`` is a zero-argument callable returning the initial model
    hypotheses; if it raises NoModelsProposed (or yields nothing) the result
    is the all-outlier labeling. Each outer iteration accepts the thresholded
    relaxed solution only if it does not raise the total energy, merges, then
    re-estimates each surviving model from its assigned points (keeping the
    refit only when it lowers that model's data cost), so the energy trace is
    non-increasing. Stops when the improvement falls below
    cfg.convergence_eps relative to the initial energy, or at max_outer.
    """
    n = estimator.n_points
    if n < 1:
        raise ValueError("need at least one data point")
    if initial_models is not None:
        models = list(initial_models)
    elif proposer is not None:
        try:
            models = list(proposer())
        except NoModelsProposed:
            models = []
    else:
        raise ValueError("either proposer or initial_models is required")

    if not models:
        cost = CostMatrix.build([], cfg.gamma, n_points=n)
        labels = np.full(n, OUTLIER, dtype=np.int64)
        trace = [total_energy(labels, cost, graph, norm, cfg)]
        return FitResult(labels=labels, models=[], energy_trace=trace, iterations=0)

    cost = _build_cost(estimator, models, cfg.gamma)
    labels = _apply_forced(_initial_labels(cost), estimator)
    trace = [total_energy(labels, cost, graph, norm, cfg)]
    eps_abs = cfg.convergence_eps * max(trace[0].total, 1e-30)
    phi = LabelField.uniform(n, len(models), has_outlier=True)

    outer_used = 0
    for _ in range(cfg.max_outer):
        outer_used += 1
        phi = primal_dual_solve(cost, graph, norm, cfg, phi)
        cand = _apply_forced(threshold_labels(phi), estimator)
        cur_total = total_energy(labels, cost, graph, norm, cfg).total
        if total_energy(cand, cost, graph, norm, cfg).total <= cur_total:
            labels = cand

        models, labels, map_drop = _drop_unsupported(models, labels)
        if merge:
            models, labels, map_merge = merge_models(models, labels, estimator, cfg)
            mapping = _compose(map_drop, map_merge)
        else:
            mapping = map_drop

        for k in range(len(models)):
            pts = np.flatnonzero(labels == k)
            if len(pts) < estimator.min_sample:
                continue
            try:
                refit = estimator.fit(pts)
            except DegenerateSample:
                continue
            if _data_cost(estimator, refit, pts) <= _data_cost(estimator, models[k], pts):
                models[k] = refit

        cost = _build_cost(estimator, models, cfg.gamma)
        energy = total_energy(labels, cost, graph, norm, cfg)
        trace.append(energy)
        if trace[-2].total - energy.total < eps_abs:
            break
        if not models:
            break
        phi = _warm_start(phi, mapping, len(models))

    return FitResult(labels=labels, models=models, energy_trace=trace, iterations=outer_used)


def sequential_ransac_fit(
    estimator,
    graph: NeighborhoodGraph,
    norm: PenaltyNorm,
    cfg: SolverConfig,
    inlier_threshold=None,
    trials=100,
    max_trials=2000,
    confidence=0.99,
    min_support=None,
) -> FitResult:
    """Greedy baseline: extract maximal-consensus models one at a time.

    Each round runs RANSAC over the still-unassigned points with the
    standard adaptive trial count (enough draws to hit an all-inlier sample
    with the given confidence, bounded by [trials, max_trials]), refits on
    the consensus set, claims those inliers, and repeats until the best
    model's support drops below min_support. Remaining points are outliers.
    The energy trace holds the single final energy.
    """
    n = estimator.n_points
    if n == 0:
        return FitResult(
            labels=np.empty(0, dtype=np.int64),
            models=[],
            energy_trace=[EnergyTriple(0.0, 0.0, 0.0)],
            iterations=0,
        )
    thr = cfg.gamma if inlier_threshold is None else float(inlier_threshold)
    if min_support is None:
        min_support = 2 * estimator.min_sample
    rng = np.random.default_rng(seed_tuple(cfg.seed, 971))

    candidates = getattr(estimator, "candidate_indices", None)
    if candidates is None:
        candidates = np.arange(n, dtype=np.int64)
    unassigned = np.zeros(n, dtype=bool)
    unassigned[candidates] = True

    labels = np.full(n, OUTLIER, dtype=np.int64)
    models = []
    log_outlier = math.log(max(1.0 - confidence, 1e-12))
    while True:
        pool = np.flatnonzero(unassigned)
        if len(pool) < max(estimator.min_sample, min_support):
            break
        best_count = 0
        best_inliers = None
        best_model = None
        target = max_trials
        t = 0
        while t < max(trials, min(target, max_trials)):
            t += 1
            idx = np.sort(rng.choice(pool, size=estimator.min_sample, replace=False))
            try:
                model = estimator.fit(idx)
            except DegenerateSample:
                continue
            c = estimator.costs(model)[pool]
            inliers = pool[c <= thr]
            if len(inliers) > best_count:
                best_count = len(inliers)
                best_inliers = inliers
                best_model = model
                w = best_count / len(pool)
                p_pure = w**estimator.min_sample
                if p_pure >= 1.0:
                    target = 0
                elif p_pure > 0:
                    target = int(math.ceil(log_outlier / math.log(1.0 - p_pure)))
        if best_model is None or best_count < min_support:
            break
        try:
            refined = estimator.fit(best_inliers)
            c = estimator.costs(refined)[pool]
            refined_inliers = pool[c <= thr]
            if len(refined_inliers) >= estimator.min_sample:
                best_model = refined
                best_inliers = refined_inliers
        except DegenerateSample:
            pass
        labels[best_inliers] = len(models)
        models.append(best_model)
        unassigned[best_inliers] = False

    cost = _build_cost(estimator, models, cfg.gamma)
    trace = [total_energy(labels, cost, graph, norm, cfg)]
    return FitResult(labels=labels, models=models, energy_trace=trace, iterations=len(models))
