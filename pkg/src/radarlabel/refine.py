"""Cluster-based label refinement: DBSCAN, per-cluster voting, radius validation.

DBSCAN defaults and the voting/validation numbers are tunables, not measured
constants; every knob is exposed through RefineConfig.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .transfer import LabeledPointCloud, OBJECT_CLASSES


def _default_thresholds() -> dict[int, float]:
    return {2: 0.30, 3: 0.40, 4: 0.30}


def _default_radii() -> dict[int, float]:
    return {2: 1.0, 3: 3.0, 4: 1.5}


@dataclass
class RefineConfig:
    dbscan_eps: float = 1.0
    dbscan_min_pts: int = 5
    vote_thresholds: dict[int, float] = field(default_factory=_default_thresholds)
    validation_radius: dict[int, float] = field(default_factory=_default_radii)

    def __post_init__(self):
        if not self.dbscan_eps > 0:
            raise ValueError(f"dbscan_eps must be > 0, got {self.dbscan_eps}")
        if self.dbscan_min_pts < 1:
            raise ValueError(f"dbscan_min_pts must be >= 1, got {self.dbscan_min_pts}")
        object_ids = {int(c) for c in OBJECT_CLASSES}
        if set(self.vote_thresholds) != object_ids:
            raise ValueError(f"vote_thresholds must cover classes {sorted(object_ids)}")
        if set(self.validation_radius) != object_ids:
            raise ValueError(f"validation_radius must cover classes {sorted(object_ids)}")
        for c, t in self.vote_thresholds.items():
            if not (0 < t <= 1):
                raise ValueError(f"vote threshold for class {c} must be in (0, 1], got {t}")
        for c, r in self.validation_radius.items():
            if not r > 0:
                raise ValueError(f"validation radius for class {c} must be > 0, got {r}")


@dataclass
class ClusterAssignment:
    """Per-point cluster id aligned with a point cloud; -1 marks noise."""

    cluster_ids: np.ndarray  # (N,) int64

    def __post_init__(self):
        self.cluster_ids = np.asarray(self.cluster_ids, dtype=np.int64).reshape(-1)

    def __len__(self) -> int:
        return self.cluster_ids.shape[0]

    @property
    def n_clusters(self) -> int:
        return int(self.cluster_ids.max()) + 1 if self.cluster_ids.size else 0


def dbscan(points: np.ndarray, eps: float, min_pts: int) -> ClusterAssignment:
    """Density clustering with classic DBSCAN semantics.

    A core point has >= min_pts neighbors within eps, counting itself.
    Clusters are maximal density-connected sets; a border point reachable
    from several clusters joins the one discovered first (scan order =
    ascending point index), so the result is deterministic for a fixed
    input order. Non-core points unreachable from any core are noise (-1).
    """
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    if min_pts < 1:
        raise ValueError(f"min_pts must be >= 1, got {min_pts}")
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        return ClusterAssignment(np.empty(0, dtype=np.int64))
    n = pts.shape[0]

    # Symmetric eps-neighborhoods in CSR form (self excluded) so the
    # expansion loop below stays in numpy for large frames.
    tree = cKDTree(pts)
    pairs = tree.query_pairs(eps, output_type="ndarray")
    src = np.concatenate([pairs[:, 0], pairs[:, 1]]).astype(np.int64)
    dst = np.concatenate([pairs[:, 1], pairs[:, 0]]).astype(np.int64)
    degree = np.bincount(src, minlength=n)
    indices = dst[np.argsort(src, kind="stable")]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(degree, out=indptr[1:])

    core = degree + 1 >= min_pts  # a point counts toward its own neighborhood
    labels = np.full(n, -1, dtype=np.int64)
    assigned = np.zeros(n, dtype=bool)
    cluster = 0
    for seed in range(n):
        if assigned[seed] or not core[seed]:
            continue
        labels[seed] = cluster
        assigned[seed] = True
        frontier = np.array([seed], dtype=np.int64)
        while frontier.size:
            nbr = np.concatenate([indices[indptr[i]:indptr[i + 1]] for i in frontier])
            nbr = np.unique(nbr)
            fresh = nbr[~assigned[nbr]]
            labels[fresh] = cluster
            assigned[fresh] = True
            frontier = fresh[core[fresh]]
        cluster += 1
    return ClusterAssignment(labels)


def vote_clusters(lpc: LabeledPointCloud, ca: ClusterAssignment,
                  cfg: RefineConfig) -> LabeledPointCloud:
    """Reassign each cluster by class-threshold voting.

    Per cluster, the fraction of points labeled pedestrian/vehicle/bicycle is
    compared against that class's threshold (strict exceedance). Exactly one
    class above threshold relabels the whole cluster to it; zero or several
    revert the whole cluster to background. Noise points are untouched.
    """
    if len(ca) != len(lpc):
        raise ValueError(f"cluster assignment length {len(ca)} does not match cloud {len(lpc)}")
    labels = lpc.labels.copy()
    ids = ca.cluster_ids
    member = ids >= 0
    n_clusters = ca.n_clusters
    if n_clusters:
        sizes = np.bincount(ids[member], minlength=n_clusters).astype(np.float64)
        sizes[sizes == 0] = 1.0  # ids with no members: fractions stay 0
        winner = np.zeros(n_clusters, dtype=np.uint8)
        exceed_count = np.zeros(n_clusters, dtype=np.int64)
        for c in OBJECT_CLASSES:
            frac = np.bincount(ids[member & (lpc.labels == int(c))],
                               minlength=n_clusters) / sizes
            over = frac > cfg.vote_thresholds[int(c)]
            winner[over] = int(c)
            exceed_count += over
        winner[exceed_count != 1] = 0
        labels[member] = winner[ids[member]]
    return LabeledPointCloud(points=lpc.points, labels=labels,
                             frame_id=lpc.frame_id, projected=lpc.projected)


def validate_neighbors(lpc: LabeledPointCloud, cfg: RefineConfig) -> LabeledPointCloud:
    """Drop isolated object labels by nearest same-class neighbor distance.

    A point labeled pedestrian/vehicle/bicycle reverts to background when its
    nearest neighbor among other points of the same class is farther than the
    class radius, or when no other point shares the class. Decisions are made
    simultaneously on the input labeling, which makes the pass idempotent.
    """
    labels = lpc.labels.copy()
    for c in OBJECT_CLASSES:
        idx = np.flatnonzero(lpc.labels == int(c))
        if idx.size == 0:
            continue
        if idx.size == 1:
            labels[idx] = 0
            continue
        pts = lpc.points[idx]
        dist, _ = cKDTree(pts).query(pts, k=2)
        isolated = dist[:, 1] > cfg.validation_radius[int(c)]
        labels[idx[isolated]] = 0
    return LabeledPointCloud(points=lpc.points, labels=labels,
                             frame_id=lpc.frame_id, projected=lpc.projected)


def refine(lpc: LabeledPointCloud, cfg: RefineConfig) -> LabeledPointCloud:
    """Full refinement: cluster, vote, then validate. Coordinates never change."""
    ca = dbscan(lpc.points, cfg.dbscan_eps, cfg.dbscan_min_pts)
    return validate_neighbors(vote_clusters(lpc, ca, cfg), cfg)
