"""Scene conversion: upstream scientific containers to canonical toolkit files.

Expected upstream scene layout (one directory per scene):

    meta.json                    dataset_version, calibration (with angle_unit),
                                 optional per-frame camera timestamps
    radar/frame_NNNNNN.h5        datasets power (128,240,500) and
                                 elevation_index (128,240,500), attr timestamp
    lidar/frame_NNNNNN.h5        datasets points (N,3), optional labels (N,),
                                 attr timestamp
    camera/frame_NNNNNN.png      RGB image
    seg_camera/frame_NNNNNN.png  8-bit class-index raster
    seg_radar/frame_NNNNNN.png   8-bit class-index raster

Emits, per frame: the channel-pair radar cube, the labeled LiDAR truth cloud,
both segmaps, the camera image, and a LiDAR-projected depth map, plus one
calibration file and a manifest with a checksum for every emitted file.
Unreadable containers flag the frame and conversion continues.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import h5py
import numpy as np
from PIL import Image

from .formats import (write_calibration, write_image, write_labeled_ply,
                      write_segmap, write_tensor)
from .projection import CameraModel, depth_map_from_points

RAED_SHAPE = (128, 240, 500)
ELEVATION_BINS = 34

_FRAME_RE = re.compile(r"^frame_(\d{6})\.(h5|png)$")

_CALIB_KEYS = ("roll", "pitch", "yaw", "tx", "ty", "tz",
               "fx", "fy", "cx", "cy", "skew", "width", "height", "max_depth")


@dataclass
class FrameRecord:
    frame_id: int
    timestamps: dict[str, float] = field(default_factory=dict)
    outputs: list[dict] = field(default_factory=list)
    status: str = "ok"
    reasons: list[str] = field(default_factory=list)


@dataclass
class ConversionManifest:
    dataset_version: str
    angle_unit: str
    frames: list[FrameRecord] = field(default_factory=list)
    calibration: dict | None = None

    def to_dict(self) -> dict:
        return {
            "dataset_version": self.dataset_version,
            "angle_unit": self.angle_unit,
            "calibration": self.calibration,
            "frames": [
                {
                    "frame_id": f.frame_id,
                    "timestamps": {k: f.timestamps[k] for k in sorted(f.timestamps)},
                    "status": f.status,
                    **({"reasons": f.reasons} if f.reasons else {}),
                    "outputs": f.outputs,
                }
                for f in self.frames
            ],
        }


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _discover_frame_ids(scene_dir: Path) -> list[int]:
    ids: set[int] = set()
    for sub in ("radar", "lidar", "camera", "seg_camera", "seg_radar"):
        directory = scene_dir / sub
        if not directory.is_dir():
            continue
        for entry in directory.iterdir():
            match = _FRAME_RE.match(entry.name)
            if match:
                ids.add(int(match.group(1)))
    return sorted(ids)


def _load_meta(scene_dir: Path) -> dict:
    meta_path = scene_dir / "meta.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"missing {meta_path}")
    meta = json.loads(meta_path.read_text())
    calib = meta.get("calibration")
    if not isinstance(calib, dict):
        raise ValueError(f"{meta_path}: missing calibration block")
    missing = [k for k in _CALIB_KEYS if k not in calib]
    if missing:
        raise ValueError(f"{meta_path}: calibration lacks keys {missing}")
    return meta


def _camera_from_calib(calib: dict, angle_unit: str) -> CameraModel:
    scale = math.pi / 180.0 if angle_unit == "degrees" else 1.0
    return CameraModel(
        roll=calib["roll"] * scale, pitch=calib["pitch"] * scale,
        yaw=calib["yaw"] * scale,
        tx=calib["tx"], ty=calib["ty"], tz=calib["tz"],
        fx=calib["fx"], fy=calib["fy"], cx=calib["cx"], cy=calib["cy"],
        skew=calib["skew"], width=int(calib["width"]), height=int(calib["height"]),
        max_depth=calib["max_depth"],
    )


def _emit(record: FrameRecord, path: Path) -> None:
    record.outputs.append({"path": path.name, "sha256": _sha256(path)})


_KNOWN_RADAR = {"power", "elevation_index"}
_KNOWN_LIDAR = {"points", "labels"}


def _sidecar_extras(h5file: h5py.File, known: set[str]) -> dict:
    """Unknown datasets (names only) and root attrs, kept for forward compatibility."""
    extras: dict = {}
    unknown = sorted(set(h5file.keys()) - known)
    if unknown:
        extras["datasets"] = unknown
    attrs = {k: v for k, v in h5file.attrs.items() if k != "timestamp"}
    if attrs:
        extras["attrs"] = {k: (v.item() if hasattr(v, "item") else str(v))
                           for k, v in sorted(attrs.items())}
    return extras


def _convert_radar(src: Path, out_dir: Path, record: FrameRecord) -> dict:
    with h5py.File(src, "r") as fh:
        power = np.asarray(fh["power"])
        elev = np.asarray(fh["elevation_index"])
        record.timestamps["radar"] = float(fh.attrs.get("timestamp", record.frame_id))
        extras = _sidecar_extras(fh, _KNOWN_RADAR)
    if power.shape != RAED_SHAPE or elev.shape != RAED_SHAPE:
        raise ValueError(f"radar cube must be {RAED_SHAPE} per channel, got "
                         f"power {power.shape}, elevation {elev.shape}")
    if elev.min() < 1 or elev.max() > ELEVATION_BINS:
        raise ValueError(f"elevation index out of range [1, {ELEVATION_BINS}]")
    pair = np.empty((2,) + RAED_SHAPE, dtype=np.float32)
    pair[0] = power
    pair[1] = elev
    path = out_dir / f"{record.frame_id:06d}_raed.tensor"
    write_tensor(pair, path)
    _emit(record, path)
    return extras


def _convert_lidar(src: Path, out_dir: Path, record: FrameRecord) -> np.ndarray:
    with h5py.File(src, "r") as fh:
        points = np.asarray(fh["points"], dtype=np.float64)
        labels = (np.asarray(fh["labels"], dtype=np.uint8) if "labels" in fh
                  else np.zeros(len(points), dtype=np.uint8))
        record.timestamps["lidar"] = float(fh.attrs.get("timestamp", record.frame_id))
    if points.ndim != 2 or points.shape[1] != 3:
        raise ValueError(f"lidar points must be (N, 3), got {points.shape}")
    path = out_dir / f"{record.frame_id:06d}_truth.ply"
    write_labeled_ply(points, labels, path)
    _emit(record, path)
    return points


def _convert_segmap(src: Path, out_dir: Path, record: FrameRecord,
                    source: str, suffix: str) -> None:
    classes = np.asarray(Image.open(src).convert("L"))
    path = out_dir / f"{record.frame_id:06d}_{suffix}.png"
    write_segmap(classes, source, record.frame_id, path)
    _emit(record, path)
    _emit(record, path.with_name(path.name + ".meta"))


def _convert_camera(src: Path, out_dir: Path, record: FrameRecord,
                    timestamps: dict) -> None:
    rgb = np.asarray(Image.open(src).convert("RGB"))
    path = out_dir / f"{record.frame_id:06d}_camera.png"
    write_image(rgb, path)
    record.timestamps["camera"] = float(
        timestamps.get(f"{record.frame_id:06d}", record.frame_id))
    _emit(record, path)


def _convert_depth(points: np.ndarray, cam: CameraModel, out_dir: Path,
                   record: FrameRecord) -> None:
    depth_rows = depth_map_from_points(cam, points.tolist())
    depth = np.asarray(depth_rows, dtype=np.float32)
    path = out_dir / f"{record.frame_id:06d}_depth.tensor"
    write_tensor(depth, path)
    _emit(record, path)


def convert_scene(scene_dir: str | Path, out_dir: str | Path) -> ConversionManifest:
    """Convert one upstream scene directory; returns the manifest it wrote."""
    scene_dir = Path(scene_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    meta = _load_meta(scene_dir)
    calib = meta["calibration"]
    angle_unit = calib.get("angle_unit", "radians")
    manifest = ConversionManifest(
        dataset_version=str(meta.get("dataset_version", "unknown")),
        angle_unit=angle_unit)

    calib_path = out_dir / "calibration.txt"
    write_calibration(calib, calib_path, angle_unit)
    manifest.calibration = {"path": calib_path.name, "sha256": _sha256(calib_path)}
    camera = _camera_from_calib(calib, angle_unit)
    cam_timestamps = meta.get("timestamps", {})

    for frame_id in _discover_frame_ids(scene_dir):
        record = FrameRecord(frame_id=frame_id)
        extras: dict = {}
        lidar_points: np.ndarray | None = None

        members = (
            ("radar", scene_dir / "radar" / f"frame_{frame_id:06d}.h5"),
            ("lidar", scene_dir / "lidar" / f"frame_{frame_id:06d}.h5"),
            ("camera", scene_dir / "camera" / f"frame_{frame_id:06d}.png"),
            ("seg_camera", scene_dir / "seg_camera" / f"frame_{frame_id:06d}.png"),
            ("seg_radar", scene_dir / "seg_radar" / f"frame_{frame_id:06d}.png"),
        )
        for name, src in members:
            if not src.exists():
                continue
            try:
                if name == "radar":
                    extras.update(_convert_radar(src, out_dir, record))
                elif name == "lidar":
                    lidar_points = _convert_lidar(src, out_dir, record)
                elif name == "camera":
                    _convert_camera(src, out_dir, record, cam_timestamps)
                elif name == "seg_camera":
                    _convert_segmap(src, out_dir, record, "camera", "segcam")
                else:
                    _convert_segmap(src, out_dir, record, "radar_depth", "segrad")
            except Exception as exc:
                record.status = "flagged"
                record.reasons.append(f"{name}: {exc}")

        if lidar_points is not None:
            try:
                _convert_depth(lidar_points, camera, out_dir, record)
            except Exception as exc:
                record.status = "flagged"
                record.reasons.append(f"depth: {exc}")

        if extras:
            path = out_dir / f"{frame_id:06d}_upstream_extra.json"
            path.write_text(json.dumps(extras, indent=2, sort_keys=True) + "\n")
            _emit(record, path)
        manifest.frames.append(record)

    (out_dir / "manifest.json").write_text(
        json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")
    return manifest
