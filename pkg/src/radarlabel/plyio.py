"""Labeled point cloud files: PLY with coordinates, palette color, and class.

Vertices carry double x/y/z so coordinates survive round trips bit-exactly,
plus uchar red/green/blue (from the class palette) and the uchar class index
itself. Both ASCII and binary little-endian variants are handled.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .transfer import LabeledPointCloud

# Display colors per class: background black, scenario dark grey, pedestrians
# crimson, vehicles dark blue, bicycles maroon.
PALETTE = {
    0: (0, 0, 0),
    1: (70, 70, 70),
    2: (220, 20, 60),
    3: (0, 0, 142),
    4: (119, 11, 32),
}

_VERTEX_DTYPE = np.dtype([
    ("x", "<f8"), ("y", "<f8"), ("z", "<f8"),
    ("red", "u1"), ("green", "u1"), ("blue", "u1"), ("class", "u1"),
])

_HEADER_PROPS = [
    ("double", "x"), ("double", "y"), ("double", "z"),
    ("uchar", "red"), ("uchar", "green"), ("uchar", "blue"),
    ("uchar", "class"),
]


def export_ply(lpc: LabeledPointCloud, path: str | Path,
               palette: dict[int, tuple[int, int, int]] = PALETTE,
               binary: bool = True) -> None:
    """Write a labeled cloud as PLY, coloring each point by its class."""
    n = len(lpc)
    colors = np.asarray([palette[c] for c in range(5)], dtype=np.uint8)
    data = np.empty(n, dtype=_VERTEX_DTYPE)
    data["x"] = lpc.points[:, 0]
    data["y"] = lpc.points[:, 1]
    data["z"] = lpc.points[:, 2]
    rgb = colors[lpc.labels]
    data["red"] = rgb[:, 0]
    data["green"] = rgb[:, 1]
    data["blue"] = rgb[:, 2]
    data["class"] = lpc.labels

    fmt = "binary_little_endian" if binary else "ascii"
    header = ["ply", f"format {fmt} 1.0", f"element vertex {n}"]
    header += [f"property {t} {name}" for t, name in _HEADER_PROPS]
    header.append("end_header")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            fh.write(data.tobytes())
        else:
            for row in data:
                fh.write((f"{float(row['x'])!r} {float(row['y'])!r} {float(row['z'])!r} "
                          f"{row['red']} {row['green']} {row['blue']} "
                          f"{row['class']}\n").encode("ascii"))


def read_labeled_ply(path: str | Path) -> LabeledPointCloud:
    """Parse a PLY file written by export_ply (ASCII or binary little-endian)."""
    raw = Path(path).read_bytes()
    end = raw.find(b"end_header\n")
    if not raw.startswith(b"ply\n") or end < 0:
        raise ValueError(f"{path}: not a PLY file")
    header_lines = raw[:end].decode("ascii").splitlines()
    body = raw[end + len(b"end_header\n"):]

    fmt = None
    count = None
    props: list[tuple[str, str]] = []
    for line in header_lines[1:]:
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            if parts[1] != "vertex":
                raise ValueError(f"{path}: unsupported element {parts[1]!r}")
            count = int(parts[2])
        elif parts[0] == "property":
            props.append((parts[1], parts[2]))
    if fmt not in ("ascii", "binary_little_endian"):
        raise ValueError(f"{path}: unsupported format {fmt!r}")
    if count is None:
        raise ValueError(f"{path}: missing vertex element")
    expected = [name for _, name in _HEADER_PROPS]
    if [name for _, name in props] != expected:
        raise ValueError(f"{path}: expected properties {expected}, got {[n for _, n in props]}")

    type_map = {"double": "<f8", "float": "<f4", "uchar": "u1"}
    try:
        dtype = np.dtype([(name, type_map[t]) for t, name in props])
    except KeyError as exc:
        raise ValueError(f"{path}: unsupported property type {exc}") from None

    if fmt == "binary_little_endian":
        if len(body) != count * dtype.itemsize:
            raise ValueError(f"{path}: body is {len(body)} bytes, "
                             f"{count} vertices require {count * dtype.itemsize}")
        data = np.frombuffer(body, dtype=dtype)
    else:
        rows = [line.split() for line in body.decode("ascii").splitlines() if line.strip()]
        if len(rows) != count:
            raise ValueError(f"{path}: expected {count} vertex lines, found {len(rows)}")
        data = np.zeros(count, dtype=dtype)
        for i, row in enumerate(rows):
            for (t, name), token in zip(props, row):
                data[name][i] = float(token) if t in ("double", "float") else int(token)

    points = np.column_stack([data["x"], data["y"], data["z"]]).astype(np.float64)
    return LabeledPointCloud(points=points, labels=data["class"].astype(np.uint8))
