"""Native writers for the toolkit's canonical file formats.

These are written against the published format contracts (64-byte tensor
header, key=value calibration, labeled PLY, 8-bit segmap plus sidecar), not
against the toolkit's code, so a converted dataset exercises the formats end
to end.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

TENSOR_MAGIC = b"RLTENSOR"
_TENSOR_HEADER = "<8sHHBBH6Q"
_TENSOR_DTYPE_CODES = {
    "<f4": 1, "<f8": 2, "<i1": 3, "<i2": 4, "<i4": 5,
    "<i8": 6, "<u1": 7, "<u2": 8, "<u4": 9, "<u8": 10,
}

# class index -> display color, mirroring the toolkit palette
PALETTE = {
    0: (0, 0, 0),
    1: (70, 70, 70),
    2: (220, 20, 60),
    3: (0, 0, 142),
    4: (119, 11, 32),
}


def write_tensor(arr: np.ndarray, path: Path) -> None:
    arr = np.ascontiguousarray(arr)
    key = arr.dtype.newbyteorder("<").str
    if key not in _TENSOR_DTYPE_CODES:
        raise ValueError(f"unsupported tensor dtype {arr.dtype}")
    if not 1 <= arr.ndim <= 6:
        raise ValueError(f"tensor rank must be 1..6, got {arr.ndim}")
    dims = list(arr.shape) + [0] * (6 - arr.ndim)
    header = struct.pack(_TENSOR_HEADER, TENSOR_MAGIC, 1, _TENSOR_DTYPE_CODES[key],
                         1, 0, arr.ndim, *dims)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes(order="C"))


def write_calibration(values: dict, path: Path, angle_unit: str) -> None:
    """Key=value calibration file, preserving the unit the dataset uses."""
    keys = ("roll", "pitch", "yaw", "tx", "ty", "tz",
            "fx", "fy", "cx", "cy", "skew", "width", "height", "max_depth")
    lines = []
    for key in keys:
        value = values[key]
        if key in ("width", "height"):
            lines.append(f"{key}={int(value)}")
        else:
            lines.append(f"{key}={float(value)!r}")
    lines.append(f"angle_unit={angle_unit}")
    path.write_text("\n".join(lines) + "\n")


def write_labeled_ply(points: np.ndarray, labels: np.ndarray, path: Path) -> None:
    """Binary little-endian PLY: double x/y/z, uchar red/green/blue/class."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1)
    if len(points) != len(labels):
        raise ValueError("points and labels must align")
    header = [
        "ply", "format binary_little_endian 1.0",
        f"element vertex {len(points)}",
        "property double x", "property double y", "property double z",
        "property uchar red", "property uchar green", "property uchar blue",
        "property uchar class", "end_header",
    ]
    dtype = np.dtype([("x", "<f8"), ("y", "<f8"), ("z", "<f8"),
                      ("red", "u1"), ("green", "u1"), ("blue", "u1"), ("class", "u1")])
    data = np.empty(len(points), dtype=dtype)
    data["x"], data["y"], data["z"] = points[:, 0], points[:, 1], points[:, 2]
    colors = np.array([PALETTE[c] for c in range(5)], dtype=np.uint8)[labels]
    data["red"], data["green"], data["blue"] = colors[:, 0], colors[:, 1], colors[:, 2]
    data["class"] = labels
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(data.tobytes())


def write_segmap(classes: np.ndarray, source: str, frame_id: int, path: Path) -> None:
    classes = np.asarray(classes, dtype=np.uint8)
    if classes.max(initial=0) > 4:
        raise ValueError("segmap values must be class indices 0..4")
    Image.fromarray(classes, mode="L").save(path, format="PNG")
    path.with_name(path.name + ".meta").write_text(
        f"source={source}\nframe_id={frame_id}\n")


def write_image(rgb: np.ndarray, path: Path) -> None:
    Image.fromarray(np.asarray(rgb, dtype=np.uint8)).save(path, format="PNG")
