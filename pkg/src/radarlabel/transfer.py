"""Label transfer: sample class labels at projected pixels, fuse segmentation maps.

Class palette (index semantics shared by every module):
  0 empty/background, 1 scenario objects, 2 pedestrians, 3 vehicles, 4 bicycles.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import PointCloud, ProjectedPoints


class ClassId(IntEnum):
    EMPTY = 0
    SCENARIO = 1
    PEDESTRIAN = 2
    VEHICLE = 3
    BICYCLE = 4


NUM_CLASSES = 5
CLASS_NAMES = ("empty", "scenario", "pedestrian", "vehicle", "bicycle")
OBJECT_CLASSES = (ClassId.PEDESTRIAN, ClassId.VEHICLE, ClassId.BICYCLE)

SEG_SOURCES = ("camera", "radar_depth", "fused")


@dataclass
class SegMap:
    """H x W raster of class indices from one segmentation source."""

    classes: np.ndarray  # (H, W) uint8, values in {0..4}
    source: str = "camera"
    frame_id: int = 0

    def __post_init__(self):
        arr = np.asarray(self.classes)
        if arr.ndim != 2:
            raise ValueError(f"segmentation raster must be 2-D, got shape {arr.shape}")
        if arr.size and (arr.min() < 0 or arr.max() >= NUM_CLASSES):
            raise ValueError(f"class indices must lie in [0, {NUM_CLASSES}), got range "
                             f"[{arr.min()}, {arr.max()}]")
        if self.source not in SEG_SOURCES:
            raise ValueError(f"source must be one of {SEG_SOURCES}, got {self.source!r}")
        self.classes = arr.astype(np.uint8)

    @property
    def height(self) -> int:
        return self.classes.shape[0]

    @property
    def width(self) -> int:
        return self.classes.shape[1]


@dataclass
class LabeledPointCloud:
    """Point cloud plus per-point class index.

    ``projected`` marks which labels came from a visible projection; points
    outside the visibility mask keep label 0 and projected=False. None means
    provenance is unknown (e.g. ground truth).
    """

    points: np.ndarray        # (N, 3) float64, radar frame
    labels: np.ndarray        # (N,) uint8
    frame_id: int = 0
    projected: np.ndarray | None = None  # (N,) bool

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (N, 3), got {pts.shape}")
        labels = np.asarray(self.labels)
        if labels.shape != (pts.shape[0],):
            raise ValueError(f"labels shape {labels.shape} does not match {pts.shape[0]} points")
        if labels.size and (labels.min() < 0 or labels.max() >= NUM_CLASSES):
            raise ValueError(f"labels must lie in [0, {NUM_CLASSES})")
        self.points = pts
        self.labels = labels.astype(np.uint8)
        if self.projected is not None:
            proj = np.asarray(self.projected, dtype=bool)
            if proj.shape != (pts.shape[0],):
                raise ValueError("projected flags must align with points")
            self.projected = proj

    def __len__(self) -> int:
        return self.points.shape[0]


def round_half_down(x: np.ndarray) -> np.ndarray:
    """Nearest integer with ties toward the lower index (2.5 -> 2)."""
    return np.ceil(np.asarray(x) - 0.5).astype(np.int64)


def sample_labels(pc: PointCloud, proj: ProjectedPoints, seg: SegMap) -> LabeledPointCloud:
    """Assign each visible point the class at its rounded pixel location.

    All N input points are preserved: points outside the visibility mask get
    label 0 and projected=False. A rounded pixel landing outside the raster
    (only possible at the exact image boundary) is treated as background.
    """
    n = len(pc)
    labels = np.zeros(n, dtype=np.uint8)
    projected = np.zeros(n, dtype=bool)
    if len(proj):
        projected[proj.source_indices] = True
        cols = round_half_down(proj.pixel_coords[:, 0])
        rows = round_half_down(proj.pixel_coords[:, 1])
        inside = (cols >= 0) & (cols < seg.width) & (rows >= 0) & (rows < seg.height)
        labels[proj.source_indices[inside]] = seg.classes[rows[inside], cols[inside]]
    return LabeledPointCloud(points=pc.points, labels=labels,
                             frame_id=pc.frame_id, projected=projected)


def fuse_segmaps(cam: SegMap, rad: SegMap) -> SegMap:
    """Merge camera and radar rasters; camera wins except where it sees background.

    Per pixel: radar class where camera is background and radar is not,
    otherwise the camera class.
    """
    if cam.classes.shape != rad.classes.shape:
        raise ValueError(f"segmap dimensions differ: {cam.classes.shape} vs {rad.classes.shape}")
    fused = np.where((cam.classes == 0) & (rad.classes != 0), rad.classes, cam.classes)
    return SegMap(classes=fused, source="fused", frame_id=cam.frame_id)


# --- segmap file format: 8-bit single-channel PNG + sidecar metadata ------

def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta")


def write_segmap(seg: SegMap, path: str | Path) -> None:
    path = Path(path)
    Image.fromarray(seg.classes, mode="L").save(path, format="PNG")
    _sidecar_path(path).write_text(f"source={seg.source}\nframe_id={seg.frame_id}\n")


def read_segmap(path: str | Path) -> SegMap:
    path = Path(path)
    arr = np.asarray(Image.open(path).convert("L"))
    meta: dict[str, str] = {}
    sidecar = _sidecar_path(path)
    if not sidecar.exists():
        raise FileNotFoundError(f"missing segmap sidecar {sidecar}")
    for line in sidecar.read_text().splitlines():
        line = line.strip()
        if line:
            key, _, val = line.partition("=")
            meta[key.strip()] = val.strip()
    if "source" not in meta or "frame_id" not in meta:
        raise ValueError(f"{sidecar}: sidecar must record source and frame_id")
    return SegMap(classes=arr, source=meta["source"], frame_id=int(meta["frame_id"]))
