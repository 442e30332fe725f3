"""Clustering, centroid extraction, and instance association."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from radar_egoseg import (
    NOISE,
    ClusterConfig,
    InstanceReport,
    associate,
    clusters_to_centroids,
    dbscan,
    match_moving_points,
)


def dbscan_oracle(xy: np.ndarray, eps: float, min_pts: int):
    """Reachability-closure reference: O(n^3), no shared code with dbscan.

    Returns (core_labels, border_allowed, noise_mask) where core_labels
    maps each core point to a component id ordered by smallest member
    index, border_allowed maps each non-core point to the set of
    component ids it may legally join, and noise_mask marks points that
    must stay unclustered.
    """
    n = len(xy)
    diff = xy[:, None, :] - xy[None, :, :]
    within = (diff ** 2).sum(-1) <= eps * eps
    core = within.sum(axis=1) >= min_pts
    # Transitive closure of core-to-core adjacency.
    reach = within & core[:, None] & core[None, :]
    np.fill_diagonal(reach, True)
    for _ in range(n):
        nxt = reach | (reach @ reach)
        if np.array_equal(nxt, reach):
            break
        reach = nxt
    component: dict[int, int] = {}
    next_id = 0
    for i in range(n):
        if core[i] and i not in component:
            members = [j for j in range(n) if core[j] and reach[i, j]]
            for j in members:
                component[j] = next_id
            next_id += 1
    core_labels = {i: component[i] for i in range(n) if core[i]}
    border_allowed = {}
    noise = np.zeros(n, dtype=bool)
    for i in range(n):
        if core[i]:
            continue
        allowed = {component[j] for j in range(n) if core[j] and within[i, j]}
        if allowed:
            border_allowed[i] = allowed
        else:
            noise[i] = True
    return core_labels, border_allowed, noise


def check_against_oracle(xy, eps, min_pts):
    labels = dbscan(xy, eps, min_pts)
    core_labels, border_allowed, noise = dbscan_oracle(xy, eps, min_pts)
    for i, cid in core_labels.items():
        assert labels[i] == cid, f"core point {i}"
    for i, allowed in border_allowed.items():
        assert labels[i] in allowed, f"border point {i}"
    for i in np.flatnonzero(noise):
        assert labels[i] == NOISE, f"noise point {i}"


class TestDbscan:
    def test_pair_within_eps_forms_cluster(self):
        labels = dbscan(np.array([[0.0, 0.0], [0.5, 0.0]]), 1.0, 2)
        assert labels.tolist() == [0, 0]

    def test_isolated_points_are_noise(self):
        labels = dbscan(np.array([[0.0, 0.0], [10.0, 0.0]]), 1.0, 2)
        assert labels.tolist() == [NOISE, NOISE]

    def test_empty_input(self):
        labels = dbscan(np.empty((0, 2)), 1.0, 2)
        assert labels.shape == (0,)

    def test_chain_is_one_cluster(self):
        xy = np.array([[0.0, 0.0], [0.9, 0.0], [1.8, 0.0], [2.7, 0.0]])
        labels = dbscan(xy, 1.0, 2)
        assert labels.tolist() == [0, 0, 0, 0]

    def test_two_separate_blobs(self):
        xy = np.array([[0.0, 0.0], [0.3, 0.0], [20.0, 0.0], [20.3, 0.0]])
        labels = dbscan(xy, 1.0, 2)
        assert labels.tolist() == [0, 0, 1, 1]

    def test_border_point_included(self):
        # Middle point has 3 neighbors (core), ends have 2 each with
        # min_pts 3: ends are border points of the middle's cluster.
        xy = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        labels = dbscan(xy, 1.1, 3)
        assert labels.tolist() == [0, 0, 0]

    def test_min_pts_counts_the_point_itself(self):
        xy = np.array([[0.0, 0.0], [0.5, 0.0]])
        assert dbscan(xy, 1.0, 2).tolist() == [0, 0]
        assert dbscan(xy, 1.0, 3).tolist() == [NOISE, NOISE]

    def test_eps_boundary_inclusive(self):
        xy = np.array([[0.0, 0.0], [1.0, 0.0]])
        assert dbscan(xy, 1.0, 2).tolist() == [0, 0]

    def test_matches_oracle_fixed_case(self):
        rng = np.random.default_rng(12)
        xy = rng.uniform(0.0, 10.0, (30, 2))
        check_against_oracle(xy, 1.5, 3)

    @settings(max_examples=60, deadline=None)
    @given(
        seed=st.integers(0, 10_000),
        n=st.integers(0, 40),
        eps=st.floats(0.3, 3.0),
        min_pts=st.integers(1, 5),
    )
    def test_matches_oracle_random(self, seed, n, eps, min_pts):
        rng = np.random.default_rng(seed)
        xy = rng.uniform(0.0, 12.0, (n, 2))
        check_against_oracle(xy, eps, min_pts)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        xy = rng.uniform(0.0, 5.0, (40, 2))
        assert np.array_equal(dbscan(xy, 1.0, 2), dbscan(xy, 1.0, 2))


class TestCentroids:
    def test_mean_of_cluster(self):
        xy = np.array([[0.0, 0.0], [2.0, 0.0]])
        cent = clusters_to_centroids(xy, np.array([0, 0]))
        assert cent.shape == (1, 2)
        assert cent[0] == pytest.approx([1.0, 0.0])

    def test_all_noise_gives_empty(self):
        xy = np.array([[0.0, 0.0], [5.0, 5.0]])
        cent = clusters_to_centroids(xy, np.array([NOISE, NOISE]))
        assert cent.shape == (0, 2)

    def test_planted_blobs_recovered(self):
        rng = np.random.default_rng(8)
        centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 12.0]])
        pts, labels_true = [], []
        for k, c in enumerate(centers):
            pts.append(c + rng.normal(0.0, 0.3, (8, 2)))
            labels_true += [k] * 8
        xy = np.concatenate(pts)
        labels = dbscan(xy, 1.5, 3)
        cent = clusters_to_centroids(xy, labels)
        assert cent.shape == (3, 2)
        for c in centers:
            d = np.linalg.norm(cent - c, axis=1).min()
            assert d < 1.5

    def test_cluster_order_matches_ids(self):
        xy = np.array([[5.0, 0.0], [5.3, 0.0], [0.0, 0.0], [0.3, 0.0]])
        labels = dbscan(xy, 1.0, 2)
        assert labels.tolist() == [0, 0, 1, 1]
        cent = clusters_to_centroids(xy, labels)
        assert cent[0] == pytest.approx([5.15, 0.0])
        assert cent[1] == pytest.approx([0.15, 0.0])


class TestAssociate:
    def test_identical_lists(self):
        cent = np.array([[0.0, 0.0], [5.0, 5.0], [9.0, 1.0]])
        out = associate(cent, cent.copy(), gate_m=2.5)
        assert (out.tp, out.fp, out.fn) == (3, 0, 0)
        assert all(d == pytest.approx(0.0) for _, _, d in out.matches)

    def test_optimal_beats_greedy(self):
        # Greedy would pair the first ground truth with its nearest
        # prediction and leave a costly remainder; the optimal pairing
        # takes the anti-diagonal.
        gt = np.array([[0.0, 0.0], [4.0, 0.0]])
        pred = np.array([[1.0, 0.0], [0.0, -2.0]])
        out = associate(gt, pred, gate_m=5.0)
        assert (out.tp, out.fp, out.fn) == (2, 0, 0)
        pairs = {(g, p) for g, p, _ in out.matches}
        assert pairs == {(0, 1), (1, 0)}

    def test_far_prediction_is_false_positive(self):
        gt = np.array([[0.0, 0.0], [5.0, 0.0]])
        pred = np.array([[0.1, 0.0], [5.1, 0.0], [50.0, 0.0]])
        out = associate(gt, pred, gate_m=2.5)
        assert (out.tp, out.fp, out.fn) == (2, 1, 0)

    def test_gate_applies_after_assignment(self):
        gt = np.array([[0.0, 0.0]])
        pred = np.array([[3.0, 0.0]])
        out = associate(gt, pred, gate_m=2.5)
        assert (out.tp, out.fp, out.fn) == (0, 1, 1)
        assert out.matches == ()

    def test_gate_boundary_kept(self):
        gt = np.array([[0.0, 0.0]])
        pred = np.array([[2.5, 0.0]])
        out = associate(gt, pred, gate_m=2.5)
        assert (out.tp, out.fp, out.fn) == (1, 0, 0)

    def test_empty_sides(self):
        empty = np.empty((0, 2))
        some = np.array([[1.0, 1.0]])
        assert associate(empty, some, 2.5).fp == 1
        assert associate(some, empty, 2.5).fn == 1
        out = associate(empty, empty, 2.5)
        assert (out.tp, out.fp, out.fn) == (0, 0, 0)

    @settings(max_examples=100, deadline=None)
    @given(
        seed=st.integers(0, 10_000),
        n_gt=st.integers(0, 8),
        n_pred=st.integers(0, 8),
    )
    def test_counts_conserved(self, seed, n_gt, n_pred):
        rng = np.random.default_rng(seed)
        gt = rng.uniform(0.0, 20.0, (n_gt, 2))
        pred = rng.uniform(0.0, 20.0, (n_pred, 2))
        out = associate(gt, pred, gate_m=2.5)
        assert out.tp + out.fp == n_pred
        assert out.tp + out.fn == n_gt
        assert out.tp <= min(n_gt, n_pred)
        for _, _, d in out.matches:
            assert d <= 2.5


class TestMatchMovingPoints:
    def test_matching_blobs(self):
        rng = np.random.default_rng(2)
        gt_pts = np.concatenate([
            rng.normal([0.0, 0.0], 0.2, (4, 2)),
            rng.normal([10.0, 0.0], 0.2, (4, 2)),
        ])
        pred_pts = gt_pts + rng.normal(0.0, 0.05, gt_pts.shape)
        out = match_moving_points(gt_pts, pred_pts, ClusterConfig())
        assert (out.tp, out.fp, out.fn) == (2, 0, 0)

    def test_singleton_prediction_is_not_an_instance(self):
        # min_pts 2 drops lone points, so an isolated false alarm does
        # not create a predicted instance.
        gt_pts = np.array([[0.0, 0.0], [0.3, 0.0]])
        pred_pts = np.array([[0.0, 0.0], [0.3, 0.0], [30.0, 30.0]])
        out = match_moving_points(gt_pts, pred_pts, ClusterConfig())
        assert (out.tp, out.fp, out.fn) == (1, 0, 0)

    def test_missed_object(self):
        gt_pts = np.array([[0.0, 0.0], [0.3, 0.0], [20.0, 0.0], [20.3, 0.0]])
        pred_pts = np.array([[0.0, 0.0], [0.3, 0.0]])
        out = match_moving_points(gt_pts, pred_pts, ClusterConfig())
        assert (out.tp, out.fp, out.fn) == (1, 0, 1)

    def test_empty_both(self):
        out = match_moving_points(
            np.empty((0, 2)), np.empty((0, 2)), ClusterConfig()
        )
        assert (out.tp, out.fp, out.fn) == (0, 0, 0)


class TestInstanceReport:
    def test_accumulates(self):
        report = InstanceReport()
        report.add(associate(np.array([[0.0, 0.0]]), np.array([[0.1, 0.0]]), 2.5))
        report.add(associate(np.array([[0.0, 0.0]]), np.empty((0, 2)), 2.5))
        report.add(associate(np.empty((0, 2)), np.array([[1.0, 0.0]]), 2.5))
        assert (report.tp, report.fp, report.fn) == (1, 1, 1)


class TestClusterConfig:
    def test_defaults(self):
        cfg = ClusterConfig()
        assert cfg.eps_m == 2.0
        assert cfg.min_pts == 2
        assert cfg.gate_m == 2.5

    def test_validation(self):
        with pytest.raises(ValueError):
            ClusterConfig(eps_m=0.0)
        with pytest.raises(ValueError):
            ClusterConfig(min_pts=0)
        with pytest.raises(ValueError):
            ClusterConfig(gate_m=0.0)
