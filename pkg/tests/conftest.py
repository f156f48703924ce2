"""Shared test helpers: random calibrations, synthetic scenes, reference oracles."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from radarlabel.fog import to_float_image, write_image
from radarlabel.geometry import Calibration, write_calibration
from radarlabel.plyio import export_ply
from radarlabel.tensorio import write_tensor
from radarlabel.transfer import LabeledPointCloud, SegMap, write_segmap


def random_calibration(rng: np.random.Generator) -> Calibration:
    """Calibration with random pose and plausible pinhole intrinsics."""
    fx = rng.uniform(200, 1200)
    fy = rng.uniform(200, 1200)
    width = int(rng.integers(320, 1920))
    height = int(rng.integers(240, 1080))
    K = np.array([
        [fx, 0.0, rng.uniform(0.3, 0.7) * width, 0.0],
        [0.0, fy, rng.uniform(0.3, 0.7) * height, 0.0],
        [0.0, 0.0, 1.0, 0.0],
    ])
    return Calibration(
        roll=rng.uniform(-np.pi, np.pi),
        pitch=rng.uniform(-np.pi, np.pi),
        yaw=rng.uniform(-np.pi, np.pi),
        translation=rng.uniform(-5, 5, size=3),
        intrinsics=K,
        image_width=width,
        image_height=height,
        max_depth=float(rng.uniform(20, 80)),
    )


def rotation_zyx_longdouble(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Extended-precision Rz(yaw) Ry(pitch) Rx(roll) for use as an oracle."""
    r = np.longdouble(roll)
    p = np.longdouble(pitch)
    y = np.longdouble(yaw)
    one = np.longdouble(1)
    zero = np.longdouble(0)
    Rx = np.array([[one, zero, zero],
                   [zero, np.cos(r), -np.sin(r)],
                   [zero, np.sin(r), np.cos(r)]], dtype=np.longdouble)
    Ry = np.array([[np.cos(p), zero, np.sin(p)],
                   [zero, one, zero],
                   [-np.sin(p), zero, np.cos(p)]], dtype=np.longdouble)
    Rz = np.array([[np.cos(y), -np.sin(y), zero],
                   [np.sin(y), np.cos(y), zero],
                   [zero, zero, one]], dtype=np.longdouble)
    return Rz @ Ry @ Rx


def brute_force_dbscan(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Naive all-pairs DBSCAN reference.

    Core points are found from the full distance matrix; clusters are the
    connected components of the core-core adjacency graph, numbered by their
    smallest core index; each border point joins the earliest-discovered
    cluster among the cores that reach it. Everything else is noise (-1).
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n == 0:
        return np.empty(0, dtype=np.int64)
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    adjacent = dist <= eps
    core = adjacent.sum(axis=1) >= min_pts

    labels = np.full(n, -1, dtype=np.int64)
    cluster = 0
    for start in range(n):
        if not core[start] or labels[start] != -1:
            continue
        # flood fill over core-core adjacency
        stack = [start]
        labels[start] = cluster
        while stack:
            i = stack.pop()
            for j in range(n):
                if core[j] and labels[j] == -1 and adjacent[i, j]:
                    labels[j] = cluster
                    stack.append(j)
        cluster += 1
    # border points: earliest-discovered cluster among reaching cores
    for i in range(n):
        if core[i] or not adjacent[i][core].any():
            continue
        reachable = labels[core & adjacent[i]]
        labels[i] = reachable.min()
    return labels


def assert_clusterings_equivalent(a: np.ndarray, b: np.ndarray) -> None:
    """Cluster ids must match up to a bijective relabeling; noise maps to noise."""
    a = np.asarray(a)
    b = np.asarray(b)
    assert a.shape == b.shape
    assert np.array_equal(a == -1, b == -1), "noise sets differ"
    fwd: dict[int, int] = {}
    rev: dict[int, int] = {}
    for x, y in zip(a[a != -1].tolist(), b[b != -1].tolist()):
        assert fwd.setdefault(x, y) == y, f"cluster {x} maps to both {fwd[x]} and {y}"
        assert rev.setdefault(y, x) == x, f"cluster {y} mapped from both {rev[y]} and {x}"


# --- synthetic pipeline scene --------------------------------------------

SCENE_WIDTH = 64
SCENE_HEIGHT = 48


def scene_calibration() -> Calibration:
    """Forward camera colocated with the radar: optical axis along radar z."""
    K = np.array([[60.0, 0, 32.0], [0, 60.0, 24.0], [0, 0, 1.0]])
    return Calibration(roll=0, pitch=0, yaw=0, translation=np.zeros(3), intrinsics=K,
                       image_width=SCENE_WIDTH, image_height=SCENE_HEIGHT)


def scene_frame_cloud(rng: np.random.Generator) -> np.ndarray:
    """A compact blob in front of the camera plus sparse background scatter."""
    center = np.array([rng.uniform(-1, 1), rng.uniform(-0.8, 0.8), rng.uniform(8, 12)])
    blob = center + rng.normal(0, 0.25, size=(40, 3))
    scatter = rng.uniform([-2.5, -1.6, 2.0], [2.5, 1.6, 40.0], size=(30, 3))
    return np.vstack([blob, scatter])


def scene_segmap(blob_center: np.ndarray, calib: Calibration) -> np.ndarray:
    """Raster that paints a vehicle square around the blob's projected pixel."""
    classes = np.zeros((SCENE_HEIGHT, SCENE_WIDTH), dtype=np.uint8)
    K = calib.intrinsics
    u = (K[0, 0] * blob_center[0] + K[0, 2] * blob_center[2]) / blob_center[2]
    v = (K[1, 1] * blob_center[1] + K[1, 2] * blob_center[2]) / blob_center[2]
    r0, c0 = int(v), int(u)
    classes[max(r0 - 6, 0):r0 + 7, max(c0 - 6, 0):c0 + 7] = 3
    return classes


def build_label_scene(root: Path, scene: str = "scene0", n_frames: int = 3,
                      seed: int = 0, radar_background: bool = True) -> Path:
    """Write a complete synthetic scene in the canonical on-disk layout."""
    rng = np.random.default_rng(seed)
    scene_dir = Path(root) / scene
    scene_dir.mkdir(parents=True, exist_ok=True)
    calib = scene_calibration()
    write_calibration(calib, scene_dir / "calibration.txt")
    for fid in range(n_frames):
        pts = scene_frame_cloud(rng)
        cloud = LabeledPointCloud(points=pts, labels=np.zeros(len(pts), dtype=np.uint8),
                                  frame_id=fid)
        export_ply(cloud, scene_dir / f"{fid:06d}_cloud.ply")

        blob_center = pts[:40].mean(axis=0)
        cam_classes = scene_segmap(blob_center, calib)
        write_segmap(SegMap(classes=cam_classes, source="camera", frame_id=fid),
                     scene_dir / f"{fid:06d}_segcam.png")
        rad_classes = (np.zeros_like(cam_classes) if radar_background
                       else np.roll(cam_classes, 3, axis=1))
        write_segmap(SegMap(classes=rad_classes, source="radar_depth", frame_id=fid),
                     scene_dir / f"{fid:06d}_segrad.png")

        image = to_float_image(rng.integers(0, 256, size=(SCENE_HEIGHT, SCENE_WIDTH, 3)))
        write_image(image, scene_dir / f"{fid:06d}_camera.png")
        depth = rng.uniform(5, 80, size=(SCENE_HEIGHT, SCENE_WIDTH)).astype(np.float32)
        depth[:4, :] = 0.0  # a band of invalid sky pixels
        write_tensor(depth, scene_dir / f"{fid:06d}_depth.tensor")
    return scene_dir


def write_scene_config(path: Path, dataset_root: Path, out_dir: Path,
                       scenes=("scene0",), seg_source: str = "camera",
                       extra: str = "") -> Path:
    path.write_text(
        "dataset:\n"
        f"  root: {dataset_root}\n"
        f"  scenes: [{', '.join(scenes)}]\n"
        "segmentation:\n"
        f"  source: {seg_source}\n"
        "refine:\n"
        "  dbscan_eps: 1.0\n"
        "  dbscan_min_pts: 5\n"
        "eval:\n"
        "  voxel_size: 1.0\n"
        "  bounds: {min: [-5, -5, 0], max: [5, 5, 45]}\n"
        "  crop_depth: 50.0\n"
        "output:\n"
        f"  dir: {out_dir}\n"
        + extra)
    return path
