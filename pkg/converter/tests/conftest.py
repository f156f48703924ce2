"""Upstream-scene fixture: the scientific-container layout the converter ingests."""

from __future__ import annotations

import json
from pathlib import Path

import h5py
import numpy as np
from PIL import Image

from radarconvert.convert import RAED_SHAPE

CALIBRATION = {
    "roll": 2.0, "pitch": -3.0, "yaw": 5.0,          # degrees
    "tx": 0.1, "ty": -0.2, "tz": 0.05,
    "fx": 60.0, "fy": 60.0, "cx": 32.0, "cy": 24.0, "skew": 0.0,
    "width": 64, "height": 48, "max_depth": 50.0,
    "angle_unit": "degrees",
}


def lidar_points(rng: np.random.Generator, n: int = 300) -> np.ndarray:
    return rng.uniform([-3.0, -2.0, 1.0], [3.0, 2.0, 45.0], size=(n, 3))


def build_upstream_scene(root: Path, n_frames: int = 2, seed: int = 0,
                         radar_frames: tuple[int, ...] | None = None) -> Path:
    """Write an upstream scene; radar cubes only for ``radar_frames`` (default all)."""
    rng = np.random.default_rng(seed)
    scene = Path(root) / "upstream_scene"
    for sub in ("radar", "lidar", "camera", "seg_camera", "seg_radar"):
        (scene / sub).mkdir(parents=True, exist_ok=True)
    if radar_frames is None:
        radar_frames = tuple(range(n_frames))

    meta = {
        "dataset_version": "fixture-1",
        "calibration": CALIBRATION,
        "timestamps": {f"{i:06d}": 1700000000.0 + 0.1 * i for i in range(n_frames)},
    }
    (scene / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))

    for fid in range(n_frames):
        if fid in radar_frames:
            power = np.zeros(RAED_SHAPE, dtype=np.float32)
            flat = rng.choice(power.size, size=2000, replace=False)
            power.ravel()[flat] = rng.uniform(0.5, 40.0, size=2000).astype(np.float32)
            elev = rng.integers(1, 35, size=RAED_SHAPE).astype(np.uint8)
            with h5py.File(scene / "radar" / f"frame_{fid:06d}.h5", "w") as fh:
                fh.create_dataset("power", data=power, compression="gzip", compression_opts=1)
                fh.create_dataset("elevation_index", data=elev,
                                  compression="gzip", compression_opts=1)
                fh.attrs["timestamp"] = 1700000000.0 + 0.1 * fid + 0.01
                fh.attrs["sensor_serial"] = "radar-42"  # unknown attr, kept in sidecar

        points = lidar_points(rng)
        labels = rng.integers(0, 5, size=len(points)).astype(np.uint8)
        with h5py.File(scene / "lidar" / f"frame_{fid:06d}.h5", "w") as fh:
            fh.create_dataset("points", data=points)
            fh.create_dataset("labels", data=labels)
            fh.attrs["timestamp"] = 1700000000.0 + 0.1 * fid + 0.02

        rgb = rng.integers(0, 256, size=(48, 64, 3)).astype(np.uint8)
        Image.fromarray(rgb).save(scene / "camera" / f"frame_{fid:06d}.png")
        for sub in ("seg_camera", "seg_radar"):
            seg = rng.integers(0, 5, size=(48, 64)).astype(np.uint8)
            Image.fromarray(seg, mode="L").save(scene / sub / f"frame_{fid:06d}.png")
    return scene
