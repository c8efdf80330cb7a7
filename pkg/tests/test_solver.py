import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from helpers_oracles import (
    bisection_simplex_projection,
    enumerate_min_energy,
    naive_energy_hard,
)
from mmfit.errors import DegenerateSample, NoModelsProposed
from mmfit.geometry import InverseDepthPlane, fit_plane, plane_costs
from mmfit.neighborhood import NeighborhoodGraph, PenaltyNorm, build_grid4, build_knn
from mmfit.solver import (
    OUTLIER,
    CostMatrix,
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


class MeanEstimator:
    """1-D location models: model is a scalar, cost is squared distance."""

    min_sample = 2

    def __init__(self, x):
        self.x = np.asarray(x, dtype=float)
        self.positions = self.x[:, None]

    @property
    def n_points(self):
        return len(self.x)

    def fit(self, indices):
        return float(self.x[np.asarray(indices)].mean())

    def costs(self, model):
        return (self.x - model) ** 2

    def distance(self, a, b):
        return abs(a - b)


class GridPlaneEstimator:
    """Inverse-depth plane estimator over an explicit coordinate list."""

    min_sample = 3

    def __init__(self, coords, xi, sigma_xi=0.01):
        self.coords = np.asarray(coords, dtype=float)
        self.xi = np.asarray(xi, dtype=float)
        self.sigma_xi = sigma_xi
        self.positions = self.coords

    @property
    def n_points(self):
        return len(self.xi)

    def fit(self, indices):
        idx = np.asarray(indices)
        return fit_plane(self.coords[idx], self.xi[idx])

    def costs(self, model):
        return plane_costs(self.coords, self.xi, model, self.sigma_xi)

    def distance(self, a, b):
        return float(np.linalg.norm(a.params() - b.params()))


def chain_graph(n, weight=1.0):
    return NeighborhoodGraph(n, np.arange(n - 1), np.arange(1, n), np.full(n - 1, weight))


# ---------------------------------------------------------------------------
# simplex projection


def test_simplex_projection_fixed_points():
    assert np.allclose(project_simplex(np.array([0.5, 0.5])), [0.5, 0.5])
    assert np.allclose(project_simplex(np.array([0.2, 0.3, 0.5])), [0.2, 0.3, 0.5])
    assert np.allclose(project_simplex(np.array([2.0, 0.0])), [1.0, 0.0])


def test_simplex_projection_matches_bisection_oracle():
    rng = np.random.default_rng(0)
    for _ in range(500):
        L = int(rng.integers(2, 10))
        v = rng.normal(0, 3, size=L)
        assert np.abs(project_simplex(v) - bisection_simplex_projection(v)).max() < 1e-8


def test_simplex_projection_matches_qp_solver():
    rng = np.random.default_rng(1)
    for _ in range(10):
        v = rng.normal(0, 2, size=5)
        res = minimize(
            lambda x: ((x - v) ** 2).sum(),
            np.full(5, 0.2),
            constraints={"type": "eq", "fun": lambda x: x.sum() - 1},
            bounds=[(0, None)] * 5,
            method="SLSQP",
            options={"ftol": 1e-14, "maxiter": 500},
        )
        assert np.abs(project_simplex(v) - res.x).max() < 1e-6


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=8))
def test_simplex_projection_feasible_and_idempotent(vals):
    v = np.array(vals)
    p = project_simplex(v)
    assert p.min() >= 0
    assert p.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.abs(project_simplex(p) - p).max() < 1e-9


# ---------------------------------------------------------------------------
# dual projection


def test_dual_projection_inside_ball_unchanged():
    g = chain_graph(3)
    psi = np.array([[0.5], [-0.9]])
    assert np.array_equal(project_dual(psi, PenaltyNorm.L11), psi)
    assert np.allclose(project_dual(psi, PenaltyNorm.L12, g), psi)


def test_dual_projection_radial_scaling():
    psi = np.array([3.0, 4.0])
    assert np.allclose(project_dual(psi, PenaltyNorm.L12), [0.6, 0.8])


def test_dual_projection_componentwise_clamp():
    psi = np.array([[2.5], [-3.0], [0.2]])
    out = project_dual(psi, PenaltyNorm.L11)
    assert np.allclose(out.ravel(), [1.0, -1.0, 0.2])


def test_dual_projection_norm_bound_and_minimality():
    rng = np.random.default_rng(5)
    # grid search oracle over the 2-D unit disc
    gx, gy = np.meshgrid(np.linspace(-1, 1, 401), np.linspace(-1, 1, 401))
    disc = np.column_stack([gx.ravel(), gy.ravel()])
    disc = disc[(disc**2).sum(axis=1) <= 1.0]
    for _ in range(50):
        v = rng.normal(0, 2, size=2)
        p = project_dual(v, PenaltyNorm.L12)
        assert np.linalg.norm(p) <= 1 + 1e-9
        best = np.linalg.norm(disc - v, axis=1).min()
        assert np.linalg.norm(p - v) <= best + 1e-2
        # componentwise clamp for the L11 dual
        q = project_dual(v, PenaltyNorm.L11)
        assert np.abs(q).max() <= 1 + 1e-12
        box = np.clip(v, -1, 1)
        assert np.allclose(q, box)


def test_dual_projection_groupwise_on_graph():
    g = NeighborhoodGraph(3, [0, 0], [1, 2], [1.0, 1.0])
    psi = np.array([[3.0], [4.0]])
    out = project_dual(psi, PenaltyNorm.L12, g)
    assert np.allclose(out.ravel(), [0.6, 0.8])


# ---------------------------------------------------------------------------
# preconditioning


def test_precondition_single_edge():
    lam, w = 2.0, 0.5
    g = NeighborhoodGraph(2, [0], [1], [w])
    tau, alpha = precondition(g, lam)
    assert tau[0] == pytest.approx(1.0 / (2 * lam * w))
    assert np.allclose(alpha, 1.0 / (lam * w))


def test_precondition_grid_interior():
    lam = 0.7
    g = build_grid4(5, 5)
    _, alpha = precondition(g, lam)
    interior = 2 * 5 + 2
    assert alpha[interior] == pytest.approx(1.0 / (4 * lam))


def test_precondition_matches_dense_oracle():
    rng = np.random.default_rng(9)
    for _ in range(10):
        n = int(rng.integers(4, 20))
        g = build_knn(rng.uniform(0, 1, (n, 2)), k=2, scale=0.5)
        lam = float(rng.uniform(0.1, 3.0))
        K = np.zeros((g.n_edges, n))
        for e in range(g.n_edges):
            K[e, g.src[e]] = -lam * g.weight[e]
            K[e, g.dst[e]] = lam * g.weight[e]
        tau, alpha = precondition(g, lam)
        row = np.abs(K).sum(axis=1)
        col = np.abs(K).sum(axis=0)
        assert np.allclose(tau, np.where(row > 0, 1 / np.where(row > 0, row, 1), 1.0))
        assert np.allclose(alpha, np.where(col > 0, 1 / np.where(col > 0, col, 1), 1.0))


def test_precondition_zero_lambda_falls_back_to_unit_steps():
    g = build_grid4(3, 3)
    tau, alpha = precondition(g, 0.0)
    assert (tau == 1.0).all() and (alpha == 1.0).all()


# ---------------------------------------------------------------------------
# total energy


def make_cost(rho_models, gamma):
    return CostMatrix.build(list(np.asarray(rho_models, dtype=float).T), gamma)


def test_total_energy_single_model_zero_costs():
    g = build_grid4(2, 2)
    cfg = SolverConfig(lam=1.0, beta=7.0, gamma=1.0)
    cost = make_cost(np.zeros((4, 1)), gamma=1.0)
    e = total_energy(np.zeros(4, dtype=np.int64), cost, g, PenaltyNorm.L11, cfg)
    assert e.as_tuple() == (0.0, 0.0, 7.0)


def test_total_energy_all_outliers():
    g = build_grid4(2, 2)
    cfg = SolverConfig(lam=1.0, beta=7.0, gamma=2.5)
    cost = make_cost(np.zeros((4, 1)), gamma=2.5)
    e = total_energy(np.full(4, OUTLIER, dtype=np.int64), cost, g, PenaltyNorm.L11, cfg)
    assert e.as_tuple() == (4 * 2.5, 0.0, 0.0)


def test_total_energy_matches_naive_oracle():
    rng = np.random.default_rng(3)
    for norm in PenaltyNorm:
        for _ in range(10):
            n = 12
            g = build_knn(rng.uniform(0, 1, (n, 2)), k=2, scale=0.4)
            g = g.with_weights(rng.uniform(0.1, 2.0, g.n_edges))
            rho = rng.uniform(0, 1, size=(n, 2))
            gamma = 0.7
            cost = make_cost(rho, gamma)
            cfg = SolverConfig(lam=0.6, beta=3.0, gamma=gamma)
            labels = rng.integers(-1, 2, size=n).astype(np.int64)
            got = total_energy(labels, cost, g, norm, cfg).total
            want = naive_energy_hard(labels, cost.rho, g, norm, 0.6, 3.0, gamma)
            assert got == pytest.approx(want, abs=1e-10)


def test_total_energy_relaxed_field():
    g = build_grid4(3, 1)
    cfg = SolverConfig(lam=2.0, beta=5.0, gamma=1.0)
    cost = make_cost(np.array([[0.1], [0.2], [0.3]]), gamma=1.0)
    phi = LabelField(np.column_stack([np.full(3, 0.25), np.full(3, 0.75)]))
    e = total_energy(phi, cost, g, PenaltyNorm.L11, cfg)
    assert e.data == pytest.approx(0.25 * 0.6 + 0.75 * 3.0)
    assert e.smoothness == 0.0
    assert e.label_cost == 5.0  # beta * one model column


# ---------------------------------------------------------------------------
# primal-dual solve


def test_primal_dual_zero_lambda_gives_pointwise_argmin():
    rng = np.random.default_rng(8)
    n = 30
    g = build_knn(rng.uniform(0, 1, (n, 2)), k=3, scale=0.3)
    rho = rng.uniform(0, 1, size=(n, 3))
    cost = make_cost(rho, gamma=0.5)
    cfg = SolverConfig(lam=0.0, beta=1.0, gamma=0.5, n_inner=300)
    phi = primal_dual_solve(cost, g, PenaltyNorm.L11, cfg, LabelField.uniform(n, 3))
    labels = threshold_labels(phi)
    want = np.argmin(cost.rho, axis=1)
    want[want == 3] = OUTLIER
    assert np.array_equal(labels, want)
    hot = np.zeros_like(cost.rho)
    hot[np.arange(n), np.argmin(cost.rho, axis=1)] = 1.0
    assert np.abs(phi.phi - hot).max() < 1e-6


def test_primal_dual_single_free_label():
    g = build_grid4(3, 3)
    cost = CostMatrix(np.zeros((9, 1)), gamma=None)
    cfg = SolverConfig(lam=1.0, beta=1.0, gamma=1.0, n_inner=50)
    phi0 = LabelField(np.full((9, 1), 1.0), has_outlier=False)
    phi = primal_dual_solve(cost, g, PenaltyNorm.L11, cfg, phi0)
    assert np.allclose(phi.phi, 1.0)


def test_primal_dual_thresholded_energy_near_bruteforce():
    rng = np.random.default_rng(13)
    for norm in PenaltyNorm:
        for trial in range(3):
            n = 12
            g = build_knn(rng.uniform(0, 1, (n, 2)), k=2, scale=0.4)
            rho = rng.uniform(0, 1, size=(n, 2))
            cost = make_cost(rho, gamma=0.6)
            cfg = SolverConfig(lam=0.25, beta=0.0, gamma=0.6, n_inner=2000)
            phi = primal_dual_solve(cost, g, norm, cfg, LabelField.uniform(n, 2))
            labels = threshold_labels(phi)
            mine = total_energy(labels, cost, g, norm, cfg).total
            best, _ = enumerate_min_energy(cost, g, norm, cfg)
            assert mine <= 1.05 * best + 1e-12


def test_primal_dual_never_worse_than_start():
    rng = np.random.default_rng(2)
    n = 16
    g = build_grid4(4, 4)
    rho = rng.uniform(0, 1, size=(n, 3))
    cost = make_cost(rho, gamma=0.5)
    cfg = SolverConfig(lam=1.0, beta=1.0, gamma=0.5, n_inner=40)

    def relaxed(phi):
        e = total_energy(phi, cost, g, PenaltyNorm.L11, cfg)
        return e.data + e.smoothness

    phi0 = LabelField(project_simplex(rng.uniform(0, 1, size=(n, 4))))
    out = primal_dual_solve(cost, g, PenaltyNorm.L11, cfg, phi0)
    assert relaxed(out) <= relaxed(phi0) + 1e-6


def test_primal_dual_gap_shrinks_in_windows():
    rng = np.random.default_rng(4)
    n = 144
    g = build_grid4(12, 12)
    rho = rng.uniform(0, 1, size=(n, 4))
    cost = make_cost(rho, gamma=0.7)
    cfg = SolverConfig(lam=2.0, beta=1.0, gamma=0.7, n_inner=400)
    _, info = primal_dual_solve(
        cost, g, PenaltyNorm.L11, cfg, LabelField.uniform(n, 4), return_info=True
    )
    gaps = [gap for _, gap in info["gap_trace"]]
    assert len(gaps) >= 8
    window = 5  # checkpoints are every 10 iterations: 5 per 50-iteration window
    means = [np.mean(gaps[i : i + window]) for i in range(0, len(gaps) - window + 1, window)]
    for a, b in zip(means, means[1:]):
        assert b <= a * 1.10 + 1e-9
    assert means[-1] < 0.5 * means[0]


def test_primal_dual_debug_checks_invariants():
    rng = np.random.default_rng(6)
    n = 12
    g = build_grid4(4, 3)
    cost = make_cost(rng.uniform(0, 1, (n, 2)), gamma=0.5)
    cfg = SolverConfig(lam=0.5, beta=1.0, gamma=0.5, n_inner=60)
    for norm in PenaltyNorm:
        primal_dual_solve(
            cost, g, norm, cfg, LabelField.uniform(n, 2), debug_checks=True
        )


def test_primal_dual_scaling_invariance():
    rng = np.random.default_rng(10)
    n = 20
    g = build_knn(rng.uniform(0, 1, (n, 2)), k=3, scale=0.4)
    rho = rng.uniform(0, 1, size=(n, 2))
    base = dict(norm=PenaltyNorm.L11)
    labels = {}
    for s in (1.0, 2.0, 0.5, 3.0):
        cost = make_cost(s * rho, gamma=s * 0.6)
        cfg = SolverConfig(lam=s * 0.4, beta=s * 1.0, gamma=s * 0.6, n_inner=400)
        phi = primal_dual_solve(cost, g, base["norm"], cfg, LabelField.uniform(n, 2))
        labels[s] = threshold_labels(phi)
    # powers of two rescale the iterates exactly; s=3 must agree at argmax
    assert np.array_equal(labels[1.0], labels[2.0])
    assert np.array_equal(labels[1.0], labels[0.5])
    assert np.array_equal(labels[1.0], labels[3.0])


# ---------------------------------------------------------------------------
# thresholding


def test_threshold_one_hot_and_ties():
    phi = LabelField(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.5, 0.5, 0.0]]))
    assert np.array_equal(threshold_labels(phi), [0, 1, 0])


def test_threshold_outlier_loses_ties():
    phi = LabelField(np.array([[0.5, 0.5], [0.2, 0.8]]))
    assert np.array_equal(threshold_labels(phi), [0, OUTLIER])


def test_threshold_matches_naive_scan():
    rng = np.random.default_rng(3)
    phi = LabelField(project_simplex(rng.uniform(0, 1, size=(50, 4))))
    got = threshold_labels(phi)
    for i in range(50):
        row = phi.phi[i]
        best = 0
        for j in range(1, 4):
            if row[j] > row[best]:
                best = j
        want = OUTLIER if best == 3 else best
        assert got[i] == want


# ---------------------------------------------------------------------------
# merging


def test_merge_identical_models_drops_beta_exactly():
    x = np.zeros(6)
    est = MeanEstimator(x)
    # two disconnected triangles; no cross edges, so smoothness is untouched
    g = NeighborhoodGraph(6, [0, 1, 3, 4], [1, 2, 4, 5], np.ones(4))
    cfg = SolverConfig(lam=1.0, beta=4.0, gamma=1.0)
    labels = np.array([0, 0, 0, 1, 1, 1], dtype=np.int64)
    cost = make_cost(np.zeros((6, 2)), gamma=1.0)
    before = total_energy(labels, cost, g, PenaltyNorm.L11, cfg).total
    models, new_labels, mapping = merge_models([0.0, 0.0], labels, est, cfg)
    assert len(models) == 1
    cost2 = make_cost(np.zeros((6, 1)), gamma=1.0)
    after = total_energy(new_labels, cost2, g, PenaltyNorm.L11, cfg).total
    assert before - after == pytest.approx(cfg.beta)
    assert np.array_equal(mapping, [0, 0])


def test_merge_rejected_when_data_increase_exceeds_beta():
    beta = 1.0
    d = np.sqrt(10 * beta / 1.5)  # joint refit raises data by 10*beta
    x = np.array([0.0, 0.0, 0.0, d, d, d])
    est = MeanEstimator(x)
    g = chain_graph(6)
    cfg = SolverConfig(lam=0.0, beta=beta, gamma=1e9)
    labels = np.array([0, 0, 0, 1, 1, 1], dtype=np.int64)
    models, new_labels, _ = merge_models([0.0, float(d)], labels, est, cfg)
    assert len(models) == 2
    assert np.array_equal(new_labels, labels)


def test_merge_near_duplicate_planes_collapse():
    rng = np.random.default_rng(0)
    coords = rng.uniform(0, 50, size=(60, 2))
    true = InverseDepthPlane(w=[0.002, -0.001], c=0.5)
    xi = true.predict(coords) + rng.normal(0, 1e-4, 60)
    est = GridPlaneEstimator(coords, xi, sigma_xi=0.01)
    g = build_knn(coords, k=2, scale=10.0)
    cfg = SolverConfig(lam=0.1, beta=50.0, gamma=10.0)
    labels = np.array([i % 3 for i in range(60)], dtype=np.int64)
    models = [est.fit(np.flatnonzero(labels == k)) for k in range(3)]
    cost_before = make_cost(np.column_stack([est.costs(m) for m in models]), 10.0)
    before = total_energy(labels, cost_before, g, PenaltyNorm.L11, cfg).total
    merged, new_labels, _ = merge_models(models, labels, est, cfg)
    assert len(merged) == 1
    cost_after = make_cost(np.column_stack([est.costs(m) for m in merged]), 10.0)
    after = total_energy(new_labels, cost_after, g, PenaltyNorm.L11, cfg).total
    assert after < before


def test_merge_into_outlier_when_gamma_cheap():
    # gamma = 0 makes the outlier label free: every model merges into it.
    x = np.array([0.0, 0.1, -0.1, 0.05])
    est = MeanEstimator(x)
    cfg = SolverConfig(lam=1.0, beta=5.0, gamma=0.0)
    labels = np.zeros(4, dtype=np.int64)
    models, new_labels, mapping = merge_models([0.0], labels, est, cfg)
    assert models == []
    assert (new_labels == OUTLIER).all()
    assert np.array_equal(mapping, [OUTLIER])


# ---------------------------------------------------------------------------
# coral_fit and sequential RANSAC


def plane_instance(rng, n=80, noise=0.0):
    coords = rng.uniform(0, 40, size=(n, 2))
    plane = InverseDepthPlane(w=[0.003, 0.001], c=0.4)
    xi = plane.predict(coords) + (rng.normal(0, noise, n) if noise else 0.0)
    return coords, xi, plane


def test_coral_fit_single_noiseless_plane():
    rng = np.random.default_rng(1)
    coords, xi, _ = plane_instance(rng)
    est = GridPlaneEstimator(coords, xi)
    g = build_knn(coords, k=3, scale=5.0)
    cfg = SolverConfig(lam=0.5, beta=10.0, gamma=9.0, seed=0)
    from mmfit.proposals import ProposalConfig, propose_models

    pcfg = ProposalConfig(s=10, sample_size=3, seed=0)
    result = coral_fit(
        est, g, PenaltyNorm.L11, cfg,
        proposer=lambda: [p.model for p in propose_models(est, pcfg)],
    )
    assert len(result.models) == 1
    assert (result.labels == 0).all()


def test_coral_fit_gamma_dominance_all_outliers():
    rng = np.random.default_rng(2)
    coords, xi, plane = plane_instance(rng, n=30)
    est = GridPlaneEstimator(coords, xi + rng.uniform(0.05, 0.1, 30))
    g = build_knn(coords, k=2, scale=5.0)
    cfg = SolverConfig(lam=0.2, beta=5.0, gamma=1e-9, seed=0)
    result = coral_fit(est, g, PenaltyNorm.L11, cfg, initial_models=[plane])
    assert (result.labels == OUTLIER).all()
    assert result.models == []


def test_coral_fit_no_models_proposed_gives_all_outliers():
    rng = np.random.default_rng(3)
    coords, xi, _ = plane_instance(rng, n=10)
    est = GridPlaneEstimator(coords, xi)
    g = build_knn(coords, k=2, scale=5.0)
    cfg = SolverConfig(lam=0.2, beta=5.0, gamma=2.0)

    def proposer():
        raise NoModelsProposed("nothing")

    result = coral_fit(est, g, PenaltyNorm.L11, cfg, proposer=proposer)
    assert (result.labels == OUTLIER).all()
    assert result.models == [] and result.iterations == 0


def test_coral_fit_lambda_zero_no_merge_is_argmin():
    rng = np.random.default_rng(4)
    coords, xi, plane = plane_instance(rng, n=40)
    est = GridPlaneEstimator(coords, xi)
    other = InverseDepthPlane(w=[-0.002, 0.002], c=0.6)
    cfg = SolverConfig(lam=0.0, beta=1.0, gamma=5.0, seed=0)
    g = build_knn(coords, k=2, scale=5.0)
    result = coral_fit(
        est, g, PenaltyNorm.L11, cfg, initial_models=[plane, other], merge=False
    )
    cost = make_cost(np.column_stack([est.costs(m) for m in result.models]), 5.0)
    want = np.argmin(cost.rho, axis=1)
    want[want == cost.n_labels - 1] = OUTLIER
    assert np.array_equal(result.labels, want)


def test_coral_fit_energy_trace_non_increasing():
    rng = np.random.default_rng(5)
    coords = rng.uniform(0, 40, size=(90, 2))
    p1 = InverseDepthPlane(w=[0.004, 0.0], c=0.3)
    p2 = InverseDepthPlane(w=[-0.002, 0.003], c=0.6)
    xi = np.where(coords[:, 0] < 20, p1.predict(coords), p2.predict(coords))
    xi = xi + rng.normal(0, 0.004, 90)
    est = GridPlaneEstimator(coords, xi, sigma_xi=0.004)
    g = build_knn(coords, k=3, scale=6.0)
    cfg = SolverConfig(lam=0.5, beta=20.0, gamma=9.0, seed=1)
    from mmfit.proposals import ProposalConfig, propose_models

    pcfg = ProposalConfig(s=30, sample_size=3, seed=1)
    result = coral_fit(
        est, g, PenaltyNorm.L11, cfg,
        proposer=lambda: [p.model for p in propose_models(est, pcfg)],
    )
    totals = [e.total for e in result.energy_trace]
    eps = 1e-6 * totals[0]
    for a, b in zip(totals, totals[1:]):
        assert b <= a + eps


def test_coral_fit_deterministic():
    rng = np.random.default_rng(6)
    coords, xi, _ = plane_instance(rng, n=60, noise=0.003)
    est = GridPlaneEstimator(coords, xi, sigma_xi=0.003)
    g = build_knn(coords, k=3, scale=6.0)
    cfg = SolverConfig(lam=0.5, beta=10.0, gamma=9.0, seed=42)
    from mmfit.proposals import ProposalConfig, propose_models

    def run():
        pcfg = ProposalConfig(s=20, sample_size=3, seed=42)
        return coral_fit(
            est, g, PenaltyNorm.L11, cfg,
            proposer=lambda: [p.model for p in propose_models(est, pcfg)],
        )

    r1, r2 = run(), run()
    assert np.array_equal(r1.labels, r2.labels)
    assert len(r1.models) == len(r2.models)
    for a, b in zip(r1.models, r2.models):
        assert np.array_equal(a.params(), b.params())
    assert [e.as_tuple() for e in r1.energy_trace] == [
        e.as_tuple() for e in r2.energy_trace
    ]


def test_coral_fit_requires_points_and_source_of_models():
    est = GridPlaneEstimator(np.zeros((0, 2)), np.zeros(0))
    g = build_grid4(1, 1)
    cfg = SolverConfig()
    with pytest.raises(ValueError):
        coral_fit(est, g, PenaltyNorm.L11, cfg, initial_models=[])
    est2 = GridPlaneEstimator(np.zeros((1, 2)), np.ones(1))
    with pytest.raises(ValueError):
        coral_fit(est2, build_grid4(1, 1), PenaltyNorm.L11, cfg)


def test_sequential_ransac_single_noiseless_model():
    rng = np.random.default_rng(7)
    coords, xi, plane = plane_instance(rng, n=50)
    est = GridPlaneEstimator(coords, xi)
    g = build_knn(coords, k=2, scale=5.0)
    cfg = SolverConfig(lam=0.5, beta=5.0, gamma=9.0, seed=3)
    result = sequential_ransac_fit(est, g, PenaltyNorm.L11, cfg, trials=50)
    assert len(result.models) == 1
    assert (result.labels == 0).all()
    assert np.abs(result.models[0].params() - plane.params()).max() < 1e-8


def test_sequential_ransac_two_separated_planes():
    rng = np.random.default_rng(8)
    coords = rng.uniform(0, 40, size=(100, 2))
    p1 = InverseDepthPlane(w=[0.004, 0.0], c=0.3)
    p2 = InverseDepthPlane(w=[0.0, -0.003], c=0.8)
    gt = (coords[:, 0] >= 20).astype(np.int64)
    xi = np.where(gt == 0, p1.predict(coords), p2.predict(coords))
    est = GridPlaneEstimator(coords, xi)
    g = build_knn(coords, k=2, scale=5.0)
    cfg = SolverConfig(lam=0.5, beta=5.0, gamma=9.0, seed=4)
    result = sequential_ransac_fit(est, g, PenaltyNorm.L11, cfg, trials=100)
    assert len(result.models) == 2
    from mmfit.simworld import misclassification_error

    assert misclassification_error(result.labels, gt) == 0.0


def test_sequential_ransac_empty_data():
    est = GridPlaneEstimator(np.zeros((0, 2)), np.zeros(0))
    g = build_grid4(1, 1)
    result = sequential_ransac_fit(est, g, PenaltyNorm.L11, SolverConfig())
    assert len(result.labels) == 0 and result.models == []
