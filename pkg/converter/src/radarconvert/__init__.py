"""Upstream-dataset converter emitting the radar labeling toolkit's canonical formats."""

from .convert import ConversionManifest, FrameRecord, convert_scene
from .projection import CameraModel, depth_map_from_points, project_point

__version__ = "0.1.0"
