"""Evaluation metrics: voxel detection/false-alarm rates and Chamfer distance.

Detection is judged on a Cartesian voxel grid at the group level (prediction
and truth both inside the group count as a hit). The false-alarm denominator
is every in-bounds grid cell not truth-occupied by the group. Undefined
ratios (zero denominators) are reported as None, never as 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .transfer import LabeledPointCloud

# Evaluation groups over class ids; VRU merges pedestrians and bicycles.
CLASS_GROUPS = {
    "All": frozenset({1, 2, 3, 4}),
    "Scenario": frozenset({1}),
    "Vehicles": frozenset({3}),
    "VRU": frozenset({2, 4}),
}

# Chamfer point subsets by label.
CHAMFER_SUBSETS = {
    "All": frozenset({1, 2, 3, 4}),
    "Scenario": frozenset({1}),
    "Target": frozenset({2, 3, 4}),
}

# When several classes share a voxel the rarest class wins.
_VOXEL_PRIORITY = {0: 0, 1: 1, 3: 2, 4: 3, 2: 4}

VoxelMap = dict[tuple[int, int, int], int]


@dataclass
class EvalGrid:
    """Axis-aligned voxel grid plus the depth crop applied before voxelizing."""

    voxel_size: float = 0.5
    bound_min: np.ndarray = (0.0, -25.0, -5.0)
    bound_max: np.ndarray = (50.0, 25.0, 5.0)
    crop_depth: float = 50.0

    def __post_init__(self):
        self.bound_min = np.asarray(self.bound_min, dtype=np.float64).reshape(3)
        self.bound_max = np.asarray(self.bound_max, dtype=np.float64).reshape(3)
        if not self.voxel_size > 0:
            raise ValueError(f"voxel_size must be > 0, got {self.voxel_size}")
        if np.any(self.bound_max <= self.bound_min):
            raise ValueError(f"degenerate bounds {self.bound_min} .. {self.bound_max}")
        if not self.crop_depth > 0:
            raise ValueError(f"crop_depth must be > 0, got {self.crop_depth}")

    @property
    def shape(self) -> tuple[int, int, int]:
        n = np.ceil((self.bound_max - self.bound_min) / self.voxel_size).astype(int)
        return tuple(int(v) for v in n)

    @property
    def total_cells(self) -> int:
        return int(np.prod(self.shape))


@dataclass
class MetricsReport:
    """Per-frame or aggregated metric values plus the raw counts behind them.

    counts maps group -> (tp, fn, fp, negatives); pd/pfa hold the derived
    ratios with None marking an undefined (zero-denominator) metric.
    """

    pd: dict[str, float | None] = field(default_factory=dict)
    pfa: dict[str, float | None] = field(default_factory=dict)
    counts: dict[str, tuple[int, int, int, int]] = field(default_factory=dict)
    cd_all: float | None = None
    cd_scenario: float | None = None
    cd_target: float | None = None
    frame_id: int | None = None
    n_frames: int = 1


def _crop_mask(points: np.ndarray, grid: EvalGrid,
               transform: np.ndarray | None) -> np.ndarray:
    """Depth-crop membership. With a radar-to-camera transform the crop keeps
    camera depths in (0, crop_depth]; without one it is a pure forward-range
    cutoff on the radar x axis."""
    if transform is None:
        return points[:, 0] <= grid.crop_depth
    T = np.asarray(transform, dtype=np.float64)
    d = points @ T[2, :3] + T[2, 3]
    return (d > 0) & (d <= grid.crop_depth)


def crop_cloud(lpc: LabeledPointCloud, grid: EvalGrid,
               transform: np.ndarray | None = None) -> LabeledPointCloud:
    """Apply the evaluation depth crop to a cloud."""
    keep = _crop_mask(lpc.points, grid, transform)
    return LabeledPointCloud(
        points=lpc.points[keep], labels=lpc.labels[keep], frame_id=lpc.frame_id,
        projected=None if lpc.projected is None else lpc.projected[keep])


def voxelize(lpc: LabeledPointCloud, grid: EvalGrid,
             transform: np.ndarray | None = None) -> VoxelMap:
    """Sparse voxel map of the cloud; cell class = highest-priority label present.

    Points beyond the depth crop or outside the grid bounds are dropped.
    """
    if len(lpc) == 0:
        return {}
    keep = _crop_mask(lpc.points, grid, transform)
    pts = lpc.points[keep]
    labels = lpc.labels[keep]
    if pts.shape[0] == 0:
        return {}
    idx = np.floor((pts - grid.bound_min) / grid.voxel_size).astype(np.int64)
    shape = np.array(grid.shape, dtype=np.int64)
    inside = np.all((idx >= 0) & (idx < shape), axis=1)
    idx = idx[inside]
    labels = labels[inside]

    prio = np.array([_VOXEL_PRIORITY[c] for c in range(5)])
    order = np.argsort(prio[labels], kind="stable")
    cells: VoxelMap = {}
    for i in order:  # ascending priority, so the last write wins
        cells[tuple(idx[i])] = int(labels[i])
    return cells


def pd_pfa(pred: VoxelMap, truth: VoxelMap, group: str,
           grid: EvalGrid) -> tuple[float | None, float | None]:
    """Detection and false-alarm probability for one class group."""
    tp, fn, fp, neg = _group_counts(pred, truth, group, grid)
    pd = tp / (tp + fn) if (tp + fn) > 0 else None
    pfa = fp / neg if neg > 0 else None
    return pd, pfa


def _group_counts(pred: VoxelMap, truth: VoxelMap, group: str,
                  grid: EvalGrid) -> tuple[int, int, int, int]:
    g = CLASS_GROUPS[group]
    truth_in = {v for v, c in truth.items() if c in g}
    pred_in = {v for v, c in pred.items() if c in g}
    tp = len(truth_in & pred_in)
    fn = len(truth_in) - tp
    fp = len(pred_in - truth_in)
    neg = grid.total_cells - len(truth_in)
    return tp, fn, fp, neg


def chamfer(pred_pts: np.ndarray, truth_pts: np.ndarray,
            reduction: str = "half") -> float | None:
    """Symmetric average nearest-neighbor distance between two point sets.

    "half" gives half the sum of the two directed means; "sum" keeps the full
    sum for comparison with conventions that omit the 1/2. Returns None when
    either cloud is empty (undefined metric).
    """
    if reduction not in ("half", "sum"):
        raise ValueError(f"reduction must be 'half' or 'sum', got {reduction!r}")
    a = np.asarray(pred_pts, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(truth_pts, dtype=np.float64).reshape(-1, 3)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return None
    d_ab, _ = cKDTree(b).query(a)
    d_ba, _ = cKDTree(a).query(b)
    total = d_ab.mean() + d_ba.mean()
    return float(0.5 * total if reduction == "half" else total)


def evaluate_frame(pred: LabeledPointCloud, truth: LabeledPointCloud,
                   grid: EvalGrid, transform: np.ndarray | None = None,
                   chamfer_reduction: str = "half") -> MetricsReport:
    """Depth-crop, voxelize, and score one frame against its ground truth."""
    if pred.frame_id != truth.frame_id:
        raise ValueError(f"frame ids differ: pred {pred.frame_id}, truth {truth.frame_id}")
    pred_c = crop_cloud(pred, grid, transform)
    truth_c = crop_cloud(truth, grid, transform)
    pred_map = voxelize(pred_c, grid)
    truth_map = voxelize(truth_c, grid)

    report = MetricsReport(frame_id=pred.frame_id)
    for group in CLASS_GROUPS:
        counts = _group_counts(pred_map, truth_map, group, grid)
        tp, fn, fp, neg = counts
        report.counts[group] = counts
        report.pd[group] = tp / (tp + fn) if (tp + fn) > 0 else None
        report.pfa[group] = fp / neg if neg > 0 else None

    cds: dict[str, float | None] = {}
    for name, subset in CHAMFER_SUBSETS.items():
        p = pred_c.points[np.isin(pred_c.labels, list(subset))]
        t = truth_c.points[np.isin(truth_c.labels, list(subset))]
        cds[name] = chamfer(p, t, reduction=chamfer_reduction)
    report.cd_all = cds["All"]
    report.cd_scenario = cds["Scenario"]
    report.cd_target = cds["Target"]
    return report


def aggregate_reports(reports: list[MetricsReport]) -> MetricsReport:
    """Micro-averaged aggregate: ratios recomputed from summed counts.

    Chamfer distances are averaged over the frames where they are defined.
    """
    if not reports:
        raise ValueError("nothing to aggregate")
    agg = MetricsReport(frame_id=None, n_frames=len(reports))
    for group in CLASS_GROUPS:
        sums = np.zeros(4, dtype=np.int64)
        for r in reports:
            sums += np.asarray(r.counts[group], dtype=np.int64)
        tp, fn, fp, neg = (int(v) for v in sums)
        agg.counts[group] = (tp, fn, fp, neg)
        agg.pd[group] = tp / (tp + fn) if (tp + fn) > 0 else None
        agg.pfa[group] = fp / neg if neg > 0 else None
    for attr in ("cd_all", "cd_scenario", "cd_target"):
        vals = [getattr(r, attr) for r in reports if getattr(r, attr) is not None]
        setattr(agg, attr, float(np.mean(vals)) if vals else None)
    return agg


# --- report output ---------------------------------------------------------

REPORT_COLUMNS = (
    "fog", "method", "frame",
    "Pd_All", "Pfa_All", "Pd_Scenario", "Pfa_Scenario",
    "Pd_Vehicles", "Pfa_Vehicles", "Pd_VRU", "Pfa_VRU",
    "CD_All", "CD_Scenario", "CD_Target",
)


def _cell(value: float | None) -> str:
    return "undefined" if value is None else f"{value:.6g}"


def report_row(report: MetricsReport, fog: float, method: str) -> dict[str, str]:
    row = {
        "fog": f"{fog:g}",
        "method": method,
        "frame": "aggregate" if report.frame_id is None else str(report.frame_id),
    }
    for group in CLASS_GROUPS:
        row[f"Pd_{group}"] = _cell(report.pd[group])
        row[f"Pfa_{group}"] = _cell(report.pfa[group])
    row["CD_All"] = _cell(report.cd_all)
    row["CD_Scenario"] = _cell(report.cd_scenario)
    row["CD_Target"] = _cell(report.cd_target)
    return row


def write_report_csv(rows: list[dict[str, str]], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)


def format_report(report: MetricsReport, title: str = "evaluation") -> str:
    """Human-readable summary block."""
    lines = [f"{title} ({report.n_frames} frame{'s' if report.n_frames != 1 else ''})"]
    for group in CLASS_GROUPS:
        tp, fn, fp, neg = report.counts.get(group, (0, 0, 0, 0))
        lines.append(f"  {group:<9} Pd={_cell(report.pd.get(group))}  "
                     f"Pfa={_cell(report.pfa.get(group))}  "
                     f"(tp={tp} fn={fn} fp={fp} neg={neg})")
    lines.append(f"  CD_All={_cell(report.cd_all)} m  "
                 f"CD_Scenario={_cell(report.cd_scenario)} m  "
                 f"CD_Target={_cell(report.cd_target)} m")
    return "\n".join(lines)
