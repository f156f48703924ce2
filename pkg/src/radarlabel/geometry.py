"""Radar-to-camera geometry: rigid transform, point mapping, pixel projection.

Conventions:
  Radar frame   - right-handed, meters; points arrive here.
  Camera frame  - right-handed, Z forward along the optical axis, meters.
  Image frame   - origin top-left, u right (width), v down (height), pixels.

The extrinsic rotation is the fixed-axis ZYX composition Rz(yaw) Ry(pitch)
Rx(roll); angles are radians throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class CalibrationError(ValueError):
    """Unusable calibration parameters or calibration file."""


@dataclass
class Calibration:
    """Extrinsics (roll/pitch/yaw radians + translation meters) and camera intrinsics.

    ``intrinsics`` is the 3x4 projection matrix K; a 3x3 matrix is accepted
    and augmented with a zero fourth column.
    """

    roll: float
    pitch: float
    yaw: float
    translation: np.ndarray
    intrinsics: np.ndarray
    image_width: int
    image_height: int
    max_depth: float = 50.0

    def __post_init__(self):
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        K = np.asarray(self.intrinsics, dtype=np.float64)
        if K.shape == (3, 3):
            K = np.hstack([K, np.zeros((3, 1))])
        if K.shape != (3, 4):
            raise CalibrationError(f"intrinsics must be 3x3 or 3x4, got {K.shape}")
        self.intrinsics = K
        angles = (self.roll, self.pitch, self.yaw)
        if not all(math.isfinite(a) for a in angles):
            raise CalibrationError(f"non-finite rotation angles {angles}")
        if not np.all(np.isfinite(self.translation)):
            raise CalibrationError(f"non-finite translation {self.translation}")
        if not np.all(np.isfinite(K)):
            raise CalibrationError("non-finite intrinsics")
        if K[0, 0] <= 0 or K[1, 1] <= 0:
            raise CalibrationError(f"focal entries must be positive, got fx={K[0, 0]}, fy={K[1, 1]}")
        if self.image_width <= 0 or self.image_height <= 0:
            raise CalibrationError(f"image size must be positive, got {self.image_width}x{self.image_height}")
        if not (self.max_depth > 0):
            raise CalibrationError(f"max_depth must be positive, got {self.max_depth}")


@dataclass
class PointCloud:
    """N Cartesian points in one frame, meters."""

    points: np.ndarray  # (N, 3) float64
    frame_id: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (N, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        self.points = pts

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass
class ProjectedPoints:
    """Pixel locations, depths, and source-cloud indices of visible points."""

    pixel_coords: np.ndarray   # (M, 2) float64, continuous (u, v)
    depths: np.ndarray         # (M,) float64, camera-frame Z
    source_indices: np.ndarray  # (M,) int64 into the originating cloud

    def __post_init__(self):
        self.pixel_coords = np.asarray(self.pixel_coords, dtype=np.float64).reshape(-1, 2)
        self.depths = np.asarray(self.depths, dtype=np.float64).reshape(-1)
        self.source_indices = np.asarray(self.source_indices, dtype=np.int64).reshape(-1)
        if not (len(self.pixel_coords) == len(self.depths) == len(self.source_indices)):
            raise ValueError("pixel_coords, depths and source_indices must have equal length")

    def __len__(self) -> int:
        return self.depths.shape[0]


def _rotation_zyx(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rz(yaw) @ Ry(pitch) @ Rx(roll) from the elemental rotation matrices."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    Rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]], dtype=np.float64)
    Ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]], dtype=np.float64)
    Rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]], dtype=np.float64)
    return Rz @ Ry @ Rx


def build_transform(calib: Calibration) -> np.ndarray:
    """4x4 homogeneous radar-to-camera transform [R | t; 0 1]."""
    angles = (calib.roll, calib.pitch, calib.yaw)
    if not all(math.isfinite(a) for a in angles) or not np.all(np.isfinite(calib.translation)):
        raise CalibrationError("non-finite calibration parameters")
    T = np.eye(4, dtype=np.float64)
    T[:3, :3] = _rotation_zyx(*angles)
    T[:3, 3] = calib.translation
    return T


def transform_points(pc: PointCloud, T: np.ndarray) -> PointCloud:
    """Apply a 4x4 homogeneous transform to every point; order preserved."""
    T = np.asarray(T, dtype=np.float64)
    if T.shape != (4, 4):
        raise ValueError(f"transform must be 4x4, got {T.shape}")
    pts = pc.points @ T[:3, :3].T + T[:3, 3]
    return PointCloud(points=pts, frame_id=pc.frame_id)


# Homogeneous scale below this magnitude means the point sits on the camera
# plane; dividing by it is unstable, so such points are dropped.
_W_EPS = 1e-12


def project_points(pc_cam: PointCloud, calib: Calibration) -> ProjectedPoints:
    """Perspective-project camera-frame points and keep only visible ones.

    A point is kept when 0 < u < W, 0 < v < H and 0 < d <= max_depth, with
    d the camera-frame Z. Retained entries carry their original cloud index.
    """
    n = len(pc_cam)
    if n == 0:
        return ProjectedPoints(np.empty((0, 2)), np.empty(0), np.empty(0, dtype=np.int64))
    K = calib.intrinsics
    hom = np.hstack([pc_cam.points, np.ones((n, 1))])
    uvw = hom @ K.T
    w = uvw[:, 2]
    depths = pc_cam.points[:, 2]

    safe = np.abs(w) >= _W_EPS
    div = np.where(safe, w, 1.0)
    u = uvw[:, 0] / div
    v = uvw[:, 1] / div

    mask = (
        safe
        & (u > 0) & (u < calib.image_width)
        & (v > 0) & (v < calib.image_height)
        & (depths > 0) & (depths <= calib.max_depth)
    )
    idx = np.flatnonzero(mask)
    return ProjectedPoints(
        pixel_coords=np.column_stack([u[idx], v[idx]]),
        depths=depths[idx],
        source_indices=idx,
    )


# --- calibration file format (plain text key=value) ---------------------

_REQUIRED_KEYS = ("roll", "pitch", "yaw", "tx", "ty", "tz",
                  "fx", "fy", "cx", "cy", "width", "height")
_OPTIONAL_KEYS = {"skew": 0.0, "max_depth": 50.0}
_UNIT_KEY = "angle_unit"


def parse_calibration(path: str | Path, angle_unit: str | None = None) -> Calibration:
    """Read a key=value calibration file.

    Required keys: roll, pitch, yaw, tx, ty, tz, fx, fy, cx, cy, width,
    height. Optional: skew (default 0), max_depth (default 50), angle_unit
    (radians|degrees, default radians). An explicit ``angle_unit`` argument
    overrides the file.
    """
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CalibrationError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key in values:
            raise CalibrationError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = val.strip()

    known = set(_REQUIRED_KEYS) | set(_OPTIONAL_KEYS) | {_UNIT_KEY}
    unknown = sorted(set(values) - known)
    if unknown:
        raise CalibrationError(f"{path}: unknown keys {unknown}")
    missing = sorted(k for k in _REQUIRED_KEYS if k not in values)
    if missing:
        raise CalibrationError(f"{path}: missing keys {missing}")

    recorded = values.get(_UNIT_KEY)
    if angle_unit is not None and recorded is not None and angle_unit != recorded:
        raise CalibrationError(
            f"{path}: file records angle_unit={recorded} but {angle_unit} was requested")
    unit = angle_unit or recorded or "radians"
    if unit not in ("radians", "degrees"):
        raise CalibrationError(f"{path}: angle_unit must be radians or degrees, got {unit!r}")

    def num(key: str) -> float:
        try:
            return float(values.get(key, _OPTIONAL_KEYS.get(key)))
        except (TypeError, ValueError):
            raise CalibrationError(f"{path}: bad numeric value for {key!r}: {values.get(key)!r}") from None

    roll, pitch, yaw = num("roll"), num("pitch"), num("yaw")
    if unit == "degrees":
        roll, pitch, yaw = (math.radians(a) for a in (roll, pitch, yaw))
    K = np.array([
        [num("fx"), num("skew"), num("cx"), 0.0],
        [0.0, num("fy"), num("cy"), 0.0],
        [0.0, 0.0, 1.0, 0.0],
    ])
    return Calibration(
        roll=roll, pitch=pitch, yaw=yaw,
        translation=np.array([num("tx"), num("ty"), num("tz")]),
        intrinsics=K,
        image_width=int(num("width")),
        image_height=int(num("height")),
        max_depth=num("max_depth"),
    )


def write_calibration(calib: Calibration, path: str | Path) -> None:
    """Write a calibration in the key=value file format (angles in radians)."""
    K = calib.intrinsics
    lines = [
        f"roll={float(calib.roll)!r}",
        f"pitch={float(calib.pitch)!r}",
        f"yaw={float(calib.yaw)!r}",
        f"tx={float(calib.translation[0])!r}",
        f"ty={float(calib.translation[1])!r}",
        f"tz={float(calib.translation[2])!r}",
        f"fx={float(K[0, 0])!r}",
        f"fy={float(K[1, 1])!r}",
        f"cx={float(K[0, 2])!r}",
        f"cy={float(K[1, 2])!r}",
        f"skew={float(K[0, 1])!r}",
        f"width={calib.image_width}",
        f"height={calib.image_height}",
        f"max_depth={float(calib.max_depth)!r}",
        "angle_unit=radians",
    ]
    Path(path).write_text("\n".join(lines) + "\n")
