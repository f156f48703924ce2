"""Synthetic fog from clear images plus per-pixel depth.

Single-scattering attenuation model applied per pixel in linear intensity:

    I_fog = I * exp(-beta * d) + A * (1 - exp(-beta * d))

Pixels without a valid depth (sky, dropouts) take the full airlight A, the
infinite-depth limit of the model.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

# Attenuation sweep used by the fog-sweep pipeline mode, weakest to densest.
DEFAULT_BETAS = (0.02, 0.04, 0.08, 0.15)

DEFAULT_AIRLIGHT = (0.8, 0.8, 0.8)


@dataclass
class FogParams:
    beta: float
    airlight: np.ndarray = DEFAULT_AIRLIGHT

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta < 0:
            raise ValueError(f"attenuation coefficient must be >= 0, got {self.beta}")
        a = np.asarray(self.airlight, dtype=np.float64).reshape(-1)
        if a.size == 0 or np.any(a < 0) or np.any(a > 1):
            raise ValueError(f"airlight components must lie in [0, 1], got {a}")
        self.airlight = a


@dataclass
class DepthImage:
    """Per-pixel depth in meters; non-finite or non-positive values are invalid."""

    depths: np.ndarray  # (H, W) float

    def __post_init__(self):
        arr = np.asarray(self.depths, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"depth image must be 2-D, got shape {arr.shape}")
        self.depths = arr

    @property
    def height(self) -> int:
        return self.depths.shape[0]

    @property
    def width(self) -> int:
        return self.depths.shape[1]

    @property
    def valid_mask(self) -> np.ndarray:
        return np.isfinite(self.depths) & (self.depths > 0)


def apply_fog(image: np.ndarray, depth: DepthImage, params: FogParams) -> np.ndarray:
    """Blend an image toward the airlight by optical transmission.

    ``image`` is H x W x C (or H x W) with intensities in [0, 1]; output is
    clamped to [0, 1]. Each output pixel depends only on its own intensity,
    depth, and the fog parameters.
    """
    img = np.asarray(image, dtype=np.float64)
    squeeze = img.ndim == 2
    if squeeze:
        img = img[:, :, None]
    if img.ndim != 3:
        raise ValueError(f"image must be H x W x C, got shape {image.shape}")
    if img.shape[:2] != depth.depths.shape:
        raise ValueError(f"image size {img.shape[:2]} does not match depth {depth.depths.shape}")
    airlight = params.airlight
    if airlight.size == 1:
        airlight = np.repeat(airlight, img.shape[2])
    if airlight.size != img.shape[2]:
        raise ValueError(f"airlight has {airlight.size} channels, image has {img.shape[2]}")

    valid = depth.valid_mask
    trans = np.where(valid, np.exp(-params.beta * np.where(valid, depth.depths, 0.0)), 0.0)
    out = img * trans[:, :, None] + airlight[None, None, :] * (1.0 - trans[:, :, None])
    out = np.clip(out, 0.0, 1.0)
    return out[:, :, 0] if squeeze else out


# --- 8-bit image I/O ------------------------------------------------------

def to_float_image(raw: np.ndarray) -> np.ndarray:
    """uint8 image to linear [0, 1] float64."""
    return np.asarray(raw, dtype=np.float64) / 255.0


def to_uint8_image(img: np.ndarray) -> np.ndarray:
    """[0, 1] float image to uint8 with round-half-up."""
    scaled = np.floor(np.asarray(img, dtype=np.float64) * 255.0 + 0.5)
    return np.clip(scaled, 0, 255).astype(np.uint8)


def read_image(path: str | Path) -> np.ndarray:
    """PNG/JPEG file to H x W x 3 float64 in [0, 1]."""
    return to_float_image(np.asarray(Image.open(path).convert("RGB")))


def write_image(img: np.ndarray, path: str | Path) -> None:
    Image.fromarray(to_uint8_image(img)).save(Path(path), format="PNG")


def gamma_decode(img: np.ndarray, gamma: float) -> np.ndarray:
    return np.power(np.clip(img, 0.0, 1.0), gamma)


def gamma_encode(img: np.ndarray, gamma: float) -> np.ndarray:
    return np.power(np.clip(img, 0.0, 1.0), 1.0 / gamma)
