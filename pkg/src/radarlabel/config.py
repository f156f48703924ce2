"""Pipeline configuration: YAML file with one section per stage, CLI overridable."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .fog import DEFAULT_AIRLIGHT, DEFAULT_BETAS
from .metrics import EvalGrid
from .refine import RefineConfig
from .transfer import SEG_SOURCES

_THRESHOLD_KEYS = {"pedestrian": 2, "vehicle": 3, "bicycle": 4}


@dataclass
class PipelineConfig:
    dataset_root: Path
    scenes: list[str]
    frames: tuple[int, int] | None = None       # inclusive id range
    calibration: Path | None = None             # default <scene>/calibration.txt
    angle_unit: str = "radians"
    seg_source: str = "camera"
    betas: tuple[float, ...] = DEFAULT_BETAS
    airlight: tuple[float, ...] = DEFAULT_AIRLIGHT
    gamma: float | None = None
    refine: RefineConfig = field(default_factory=RefineConfig)
    grid: EvalGrid = field(default_factory=EvalGrid)
    output_dir: Path = Path("out")
    export_formats: tuple[str, ...] = ("ply",)
    workers: int = 1
    method_label: str | None = None             # report metadata; defaults to seg_source
    fog_level: float = 0.0                      # report metadata
    chamfer_reduction: str = "half"

    def __post_init__(self):
        self.dataset_root = Path(self.dataset_root)
        self.output_dir = Path(self.output_dir)
        if self.calibration is not None:
            self.calibration = Path(self.calibration)
        if self.seg_source not in SEG_SOURCES and self.seg_source != "radar":
            raise ValueError(f"seg_source must be camera, radar or fused, got {self.seg_source!r}")
        if self.seg_source == "radar_depth":
            self.seg_source = "radar"
        if self.angle_unit not in ("radians", "degrees"):
            raise ValueError(f"angle_unit must be radians or degrees, got {self.angle_unit!r}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.chamfer_reduction not in ("half", "sum"):
            raise ValueError(f"chamfer_reduction must be half or sum, got {self.chamfer_reduction!r}")
        if self.frames is not None:
            a, b = self.frames
            if b < a:
                raise ValueError(f"frame range {a}..{b} is empty")
            self.frames = (int(a), int(b))

    @property
    def method(self) -> str:
        return self.method_label or self.seg_source


class ConfigError(ValueError):
    """Malformed or inconsistent pipeline configuration."""


def _refine_from_dict(section: dict[str, Any]) -> RefineConfig:
    kwargs: dict[str, Any] = {}
    if "dbscan_eps" in section:
        kwargs["dbscan_eps"] = float(section["dbscan_eps"])
    if "dbscan_min_pts" in section:
        kwargs["dbscan_min_pts"] = int(section["dbscan_min_pts"])
    for name in ("vote_thresholds", "validation_radius"):
        if name in section:
            raw = section[name]
            try:
                kwargs[name] = {_THRESHOLD_KEYS[k]: float(v) for k, v in raw.items()}
            except KeyError as exc:
                raise ConfigError(f"refine.{name}: unknown class {exc}") from None
    return RefineConfig(**kwargs)


def _grid_from_dict(section: dict[str, Any]) -> EvalGrid:
    kwargs: dict[str, Any] = {}
    if "voxel_size" in section:
        kwargs["voxel_size"] = float(section["voxel_size"])
    if "bounds" in section:
        kwargs["bound_min"] = section["bounds"]["min"]
        kwargs["bound_max"] = section["bounds"]["max"]
    if "crop_depth" in section:
        kwargs["crop_depth"] = float(section["crop_depth"])
    return EvalGrid(**kwargs)


def load_config(path: str | Path, overrides: dict[str, Any] | None = None) -> PipelineConfig:
    """Load the YAML config, apply CLI overrides, and validate referenced paths."""
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    dataset = doc.get("dataset", {})
    seg = doc.get("segmentation", {})
    fog = doc.get("fog", {})
    out = doc.get("output", {})
    evald = doc.get("eval", {})
    overrides = overrides or {}

    try:
        cfg = PipelineConfig(
            dataset_root=overrides.get("dataset_root", dataset.get("root", ".")),
            scenes=list(overrides.get("scenes", dataset.get("scenes", []))),
            frames=overrides.get("frames", _as_range(dataset.get("frames"))),
            calibration=overrides.get("calibration", dataset.get("calibration")),
            angle_unit=dataset.get("angle_unit", "radians"),
            seg_source=overrides.get("seg_source", seg.get("source", "camera")),
            betas=tuple(overrides.get("betas", fog.get("betas", DEFAULT_BETAS))),
            airlight=tuple(fog.get("airlight", DEFAULT_AIRLIGHT)),
            gamma=overrides.get("gamma", fog.get("gamma")),
            refine=_refine_from_dict(doc.get("refine", {})),
            grid=_grid_from_dict(evald),
            output_dir=overrides.get("output_dir", out.get("dir", "out")),
            export_formats=tuple(out.get("formats", ("ply",))),
            workers=int(overrides.get("workers", doc.get("workers", 1))),
            method_label=evald.get("method_label"),
            fog_level=float(evald.get("fog_level", 0.0)),
            chamfer_reduction=evald.get("chamfer_reduction", "half"),
        )
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    if not cfg.dataset_root.exists():
        raise ConfigError(f"dataset root does not exist: {cfg.dataset_root}")
    if cfg.calibration is not None and not cfg.calibration.exists():
        raise ConfigError(f"calibration file does not exist: {cfg.calibration}")
    return cfg


def _as_range(value: Any) -> tuple[int, int] | None:
    if value is None:
        return None
    if isinstance(value, str):
        a, _, b = value.partition("..")
        return int(a), int(b)
    a, b = value
    return int(a), int(b)


def config_hash(cfg: PipelineConfig) -> str:
    """Stable digest of every knob that affects pipeline output."""
    blob = {
        "dataset_root": str(cfg.dataset_root),
        "scenes": cfg.scenes,
        "frames": cfg.frames,
        "calibration": None if cfg.calibration is None else str(cfg.calibration),
        "angle_unit": cfg.angle_unit,
        "seg_source": cfg.seg_source,
        "betas": list(cfg.betas),
        "airlight": list(cfg.airlight),
        "gamma": cfg.gamma,
        "refine": {
            "dbscan_eps": cfg.refine.dbscan_eps,
            "dbscan_min_pts": cfg.refine.dbscan_min_pts,
            "vote_thresholds": {str(k): v for k, v in sorted(cfg.refine.vote_thresholds.items())},
            "validation_radius": {str(k): v for k, v in sorted(cfg.refine.validation_radius.items())},
        },
        "grid": {
            "voxel_size": cfg.grid.voxel_size,
            "bound_min": cfg.grid.bound_min.tolist(),
            "bound_max": cfg.grid.bound_max.tolist(),
            "crop_depth": cfg.grid.crop_depth,
        },
        "chamfer_reduction": cfg.chamfer_reduction,
        "export_formats": list(cfg.export_formats),
    }
    return hashlib.sha256(json.dumps(blob, sort_keys=True).encode()).hexdigest()
