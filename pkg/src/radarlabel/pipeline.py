"""End-to-end orchestration: ingest frames, label, fog-sweep, evaluate.

Scene directories follow the canonical layout emitted by the dataset
converter: per-frame files named ``{frame:06d}_<member>`` plus one
``calibration.txt``. All stage functions are pure per frame, so batches can
run on a process pool; the manifest is assembled by a single reducer and is
byte-deterministic for identical configs and inputs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np

from .config import ConfigError, PipelineConfig, config_hash
from .fog import (DepthImage, FogParams, apply_fog, gamma_decode, gamma_encode,
                  read_image, write_image)
from .geometry import (Calibration, PointCloud, build_transform, parse_calibration,
                       project_points, transform_points)
from .metrics import (MetricsReport, aggregate_reports, evaluate_frame,
                      format_report, report_row, write_report_csv)
from .plyio import export_ply, read_labeled_ply
from .refine import refine
from .tensorio import read_tensor
from .transfer import fuse_segmaps, read_segmap, sample_labels

logger = logging.getLogger(__name__)

_MEMBERS = {
    "cloud": "_cloud.ply",
    "camera_image": "_camera.png",
    "camera_segmap": "_segcam.png",
    "radar_segmap": "_segrad.png",
    "depth": "_depth.tensor",
}


@dataclass
class FrameBundle:
    """Paths of one synchronized frame; members absent on disk are None."""

    frame_id: int
    cloud_path: Path | None = None
    camera_image_path: Path | None = None
    camera_segmap_path: Path | None = None
    radar_segmap_path: Path | None = None
    depth_path: Path | None = None
    timestamp: float = 0.0


def discover_frames(scene_dir: str | Path,
                    frame_range: tuple[int, int] | None = None) -> list[FrameBundle]:
    """Scan a scene directory for per-frame members, grouped by frame id."""
    scene_dir = Path(scene_dir)
    bundles: dict[int, FrameBundle] = {}
    for member, suffix in _MEMBERS.items():
        for path in scene_dir.glob(f"*{suffix}"):
            stem = path.name[:-len(suffix)]
            if not stem.isdigit():
                continue
            fid = int(stem)
            if frame_range is not None and not frame_range[0] <= fid <= frame_range[1]:
                continue
            bundle = bundles.setdefault(fid, FrameBundle(frame_id=fid, timestamp=float(fid)))
            setattr(bundle, f"{member}_path", path)
    timestamps = _load_timestamps(scene_dir)
    for fid, ts in timestamps.items():
        if fid in bundles:
            bundles[fid].timestamp = ts
    return [bundles[fid] for fid in sorted(bundles)]


def _load_timestamps(scene_dir: Path) -> dict[int, float]:
    """Frame timestamps from a converter manifest, when the scene carries one.

    Accepts either a flat "timestamp" or a per-sensor "timestamps" mapping
    (radar preferred, since the clouds being labeled are radar frames).
    """
    manifest = scene_dir / "manifest.json"
    if not manifest.exists():
        return {}
    try:
        out: dict[int, float] = {}
        for f in json.loads(manifest.read_text()).get("frames", []):
            fid = int(f["frame_id"])
            if "timestamp" in f:
                out[fid] = float(f["timestamp"])
            elif f.get("timestamps"):
                per_sensor = f["timestamps"]
                out[fid] = float(per_sensor.get("radar", min(per_sensor.values())))
        return out
    except (ValueError, KeyError, TypeError):
        logger.warning("ignoring unreadable scene manifest %s", manifest)
        return {}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _required_members(bundle: FrameBundle, seg_source: str) -> list[str]:
    missing = []
    if bundle.cloud_path is None:
        missing.append("cloud")
    if seg_source in ("camera", "fused") and bundle.camera_segmap_path is None:
        missing.append("camera_segmap")
    if seg_source in ("radar", "fused") and bundle.radar_segmap_path is None:
        missing.append("radar_segmap")
    return missing


def _label_frame(bundle: FrameBundle, calib: Calibration, transform: np.ndarray,
                 seg_source: str, cfg: PipelineConfig, out_dir: Path) -> dict:
    """Label one frame; returns its manifest entry. Never raises on frame data."""
    missing = _required_members(bundle, seg_source)
    if missing:
        return {"frame_id": bundle.frame_id, "status": "skipped",
                "reason": f"missing members: {', '.join(missing)}"}
    try:
        t0 = time.perf_counter()
        cloud = read_labeled_ply(bundle.cloud_path)
        pc = PointCloud(points=cloud.points, frame_id=bundle.frame_id)
        if seg_source == "camera":
            seg = read_segmap(bundle.camera_segmap_path)
        elif seg_source == "radar":
            seg = read_segmap(bundle.radar_segmap_path)
        else:
            seg = fuse_segmaps(read_segmap(bundle.camera_segmap_path),
                               read_segmap(bundle.radar_segmap_path))
        if (seg.height, seg.width) != (calib.image_height, calib.image_width):
            raise ValueError(
                f"segmap is {seg.width}x{seg.height} but calibration expects "
                f"{calib.image_width}x{calib.image_height}")
        cam_pc = transform_points(pc, transform)
        proj = project_points(cam_pc, calib)
        labeled = sample_labels(pc, proj, seg)
        refined = refine(labeled, cfg.refine)
        out_path = out_dir / f"{bundle.frame_id:06d}_labeled.ply"
        export_ply(refined, out_path)
        logger.info("frame %06d: %d points, %d visible, %.3f s", bundle.frame_id,
                    len(pc), len(proj), time.perf_counter() - t0)
        return {"frame_id": bundle.frame_id, "status": "ok",
                "outputs": [{"path": out_path.name, "sha256": _sha256(out_path)}]}
    except Exception as exc:  # frame failures must not abort the batch
        logger.warning("frame %06d failed: %s", bundle.frame_id, exc)
        return {"frame_id": bundle.frame_id, "status": "skipped", "reason": str(exc)}


def run_label(cfg: PipelineConfig) -> dict:
    """Label every configured frame, writing clouds plus a manifest.

    Manifest paths are relative to the output directory; its JSON encoding is
    deterministic so reruns of an identical config hash identically.
    """
    manifest: dict = {"command": "label", "config_hash": config_hash(cfg), "scenes": {}}
    for scene in cfg.scenes:
        scene_dir = cfg.dataset_root / scene
        if not scene_dir.is_dir():
            raise ConfigError(f"scene directory does not exist: {scene_dir}")
        calib_path = cfg.calibration or scene_dir / "calibration.txt"
        if not calib_path.exists():
            raise ConfigError(f"calibration file does not exist: {calib_path}")
        calib = parse_calibration(calib_path, cfg.angle_unit)
        transform = build_transform(calib)
        out_dir = cfg.output_dir / scene
        out_dir.mkdir(parents=True, exist_ok=True)
        bundles = discover_frames(scene_dir, cfg.frames)

        work = partial(_label_frame, calib=calib, transform=transform,
                       seg_source=cfg.seg_source, cfg=cfg, out_dir=out_dir)
        if cfg.workers > 1 and len(bundles) > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                entries = list(pool.map(work, bundles))
        else:
            entries = [work(b) for b in bundles]
        entries.sort(key=lambda e: e["frame_id"])
        manifest["scenes"][scene] = entries

    _write_manifest(manifest, cfg.output_dir / "label_manifest.json")
    return manifest


def run_fog_sweep(cfg: PipelineConfig) -> dict:
    """Render one fogged image per attenuation level for every frame."""
    manifest: dict = {"command": "fog-sweep", "config_hash": config_hash(cfg),
                      "betas": list(cfg.betas), "scenes": {}}
    for scene in cfg.scenes:
        scene_dir = cfg.dataset_root / scene
        if not scene_dir.is_dir():
            raise ConfigError(f"scene directory does not exist: {scene_dir}")
        out_dir = cfg.output_dir / scene
        out_dir.mkdir(parents=True, exist_ok=True)
        entries = []
        for bundle in discover_frames(scene_dir, cfg.frames):
            entries.append(_fog_frame(bundle, cfg, out_dir))
        entries.sort(key=lambda e: e["frame_id"])
        manifest["scenes"][scene] = entries
    _write_manifest(manifest, cfg.output_dir / "fog_manifest.json")
    return manifest


def _fog_frame(bundle: FrameBundle, cfg: PipelineConfig, out_dir: Path) -> dict:
    if bundle.camera_image_path is None:
        return {"frame_id": bundle.frame_id, "status": "skipped",
                "reason": "missing members: camera_image"}
    if bundle.depth_path is None:
        return {"frame_id": bundle.frame_id, "status": "skipped",
                "reason": "missing members: depth"}
    try:
        image = read_image(bundle.camera_image_path)
        depth = DepthImage(read_tensor(bundle.depth_path))
        if cfg.gamma:
            image = gamma_decode(image, cfg.gamma)
        outputs = []
        for beta in cfg.betas:
            fogged = apply_fog(image, depth, FogParams(beta=beta, airlight=cfg.airlight))
            if cfg.gamma:
                fogged = gamma_encode(fogged, cfg.gamma)
            out_path = out_dir / f"{bundle.frame_id:06d}_camera_b{beta:g}.png"
            write_image(fogged, out_path)
            outputs.append({"path": out_path.name, "sha256": _sha256(out_path)})
        return {"frame_id": bundle.frame_id, "status": "ok", "outputs": outputs}
    except Exception as exc:
        logger.warning("frame %06d failed: %s", bundle.frame_id, exc)
        return {"frame_id": bundle.frame_id, "status": "skipped", "reason": str(exc)}


def _cloud_files(directory: Path) -> dict[int, Path]:
    out: dict[int, Path] = {}
    for path in sorted(directory.glob("*.ply")):
        digits = path.name.split("_")[0]
        if digits.isdigit():
            out[int(digits)] = path
    return out


def run_eval(cfg: PipelineConfig, pred_dir: str | Path,
             truth_dir: str | Path) -> tuple[MetricsReport, list[MetricsReport], list[int]]:
    """Evaluate predicted clouds against ground truth clouds, frame id matched.

    Returns (aggregate, per-frame reports, skipped frame ids) and writes
    report.csv plus report.txt under the output directory.
    """
    pred_files = _cloud_files(Path(pred_dir))
    truth_files = _cloud_files(Path(truth_dir))
    shared = sorted(set(pred_files) & set(truth_files))
    skipped = sorted(set(pred_files) ^ set(truth_files))
    if not shared:
        raise ConfigError(f"no common frame ids between {pred_dir} and {truth_dir}")

    reports = []
    for fid in shared:
        pred = read_labeled_ply(pred_files[fid])
        truth = read_labeled_ply(truth_files[fid])
        pred.frame_id = fid
        truth.frame_id = fid
        reports.append(evaluate_frame(pred, truth, cfg.grid,
                                      chamfer_reduction=cfg.chamfer_reduction))
    aggregate = aggregate_reports(reports)

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    rows = [report_row(r, cfg.fog_level, cfg.method) for r in reports]
    rows.append(report_row(aggregate, cfg.fog_level, cfg.method))
    write_report_csv(rows, cfg.output_dir / "report.csv")
    summary = format_report(aggregate, title=f"{cfg.method} @ fog {cfg.fog_level:g}")
    if skipped:
        summary += "\n  skipped frames (unmatched ids): " + ", ".join(map(str, skipped))
    (cfg.output_dir / "report.txt").write_text(summary + "\n")
    return aggregate, reports, skipped


def _write_manifest(manifest: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def manifest_exit_code(manifest: dict) -> int:
    """0 when everything ran, 2 when any frame was skipped."""
    for entries in manifest.get("scenes", {}).values():
        if any(e["status"] != "ok" for e in entries):
            return 2
    return 0
