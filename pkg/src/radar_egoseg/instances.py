"""Object-level grouping and matching of moving points.

Per-point labels become object instances by density clustering in the
sensor-frame Cartesian plane; predicted and ground-truth instances are
matched frame by frame with an exact minimum-cost assignment on centroid
distance, gated afterwards, and accumulated into TP/FP/FN counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

#: Cluster label for points in no cluster.
NOISE = -1


@dataclass(frozen=True)
class ClusterConfig:
    """Density clustering and association parameters (meters)."""

    eps_m: float = 2.0
    min_pts: int = 2
    gate_m: float = 2.5

    def __post_init__(self):
        if self.eps_m <= 0:
            raise ValueError("eps_m must be positive")
        if self.min_pts < 1:
            raise ValueError("min_pts must be at least 1")
        if self.gate_m <= 0:
            raise ValueError("gate_m must be positive")


def dbscan(xy: np.ndarray, eps_m: float, min_pts: int) -> np.ndarray:
    """Density-based clustering; returns one label per point, NOISE = -1.

    A point is a core point when at least min_pts points (itself
    included) lie within eps_m of it.  Clusters grow from core points by
    breadth-first expansion in input order, so cluster ids are assigned
    in order of each cluster's first core point and the result is
    deterministic for a given input order.
    """
    pts = np.asarray(xy, dtype=float)
    if pts.ndim != 2 or (pts.size and pts.shape[1] != 2):
        raise ValueError("xy must be an (N, 2) array")
    n = pts.shape[0]
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return labels
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
    within = d2 <= eps_m * eps_m
    neighbor_count = within.sum(axis=1)
    core = neighbor_count >= min_pts
    visited = np.zeros(n, dtype=bool)
    next_id = 0
    for start in range(n):
        if visited[start] or not core[start]:
            continue
        labels[start] = next_id
        visited[start] = True
        frontier = [start]
        while frontier:
            i = frontier.pop(0)
            for j in np.flatnonzero(within[i]):
                if labels[j] == NOISE:
                    labels[j] = next_id
                if not visited[j] and core[j]:
                    visited[j] = True
                    frontier.append(j)
        next_id += 1
    return labels


def clusters_to_centroids(xy: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Arithmetic mean position per cluster id, noise excluded.

    Row k is the centroid of cluster k; cluster ids are assumed to be
    the consecutive integers dbscan produces.
    """
    pts = np.asarray(xy, dtype=float)
    labels = np.asarray(labels)
    if labels.shape[0] != pts.shape[0]:
        raise ValueError("labels must parallel the points")
    kept = labels != NOISE
    if not kept.any():
        return np.zeros((0, 2))
    ids = np.unique(labels[kept])
    if ids.min() < 0 or ids.max() != len(ids) - 1:
        raise ValueError("cluster ids must be consecutive starting at 0")
    return np.stack([pts[labels == i].mean(axis=0) for i in ids])


@dataclass(frozen=True)
class FrameAssociation:
    """Instance-level outcome of one frame.

    matches holds (gt_index, pred_index, distance_m) for pairs that
    survived the gate.  tp + fp equals the predicted instance count and
    tp + fn the ground-truth instance count.
    """

    tp: int
    fp: int
    fn: int
    matches: tuple[tuple[int, int, float], ...]


def associate(
    gt_centroids: np.ndarray, pred_centroids: np.ndarray, gate_m: float = 2.5
) -> FrameAssociation:
    """Match predicted to ground-truth centroids at minimum total cost.

    Solves the exact minimum-cost assignment on the Euclidean distance
    matrix, then discards matched pairs farther apart than gate_m; a
    discarded pair contributes one FP and one FN.
    """
    gt = np.asarray(gt_centroids, dtype=float).reshape(-1, 2)
    pred = np.asarray(pred_centroids, dtype=float).reshape(-1, 2)
    if gt.shape[0] == 0 or pred.shape[0] == 0:
        return FrameAssociation(0, pred.shape[0], gt.shape[0], ())
    cost = np.linalg.norm(gt[:, None, :] - pred[None, :, :], axis=-1)
    rows, cols = linear_sum_assignment(cost)
    matches = []
    for gi, pi in zip(rows, cols):
        dist = float(cost[gi, pi])
        if dist <= gate_m:
            matches.append((int(gi), int(pi), dist))
    tp = len(matches)
    return FrameAssociation(
        tp, pred.shape[0] - tp, gt.shape[0] - tp, tuple(matches)
    )


def match_moving_points(
    gt_xy: np.ndarray, pred_xy: np.ndarray, config: ClusterConfig
) -> FrameAssociation:
    """Cluster both point sets and associate the centroids."""
    gt_labels = dbscan(gt_xy, config.eps_m, config.min_pts)
    pred_labels = dbscan(pred_xy, config.eps_m, config.min_pts)
    return associate(
        clusters_to_centroids(gt_xy, gt_labels),
        clusters_to_centroids(pred_xy, pred_labels),
        config.gate_m,
    )


@dataclass
class InstanceReport:
    """Accumulated per-frame association outcomes."""

    frames: list[FrameAssociation] = field(default_factory=list)

    def add(self, outcome: FrameAssociation) -> None:
        self.frames.append(outcome)

    @property
    def tp(self) -> int:
        return sum(f.tp for f in self.frames)

    @property
    def fp(self) -> int:
        return sum(f.fp for f in self.frames)

    @property
    def fn(self) -> int:
        return sum(f.fn for f in self.frames)
