"""Radar tensor encoding and the segmentation loss, as pure verified numerics.

Covers the power-volume reshaping (Doppler-folded cube to range-azimuth-
elevation volume), per-frame normalization, composition of the occupancy-
gated semantic seed, and the weighted cross-entropy + soft-Dice loss with
its analytic gradient. No network code lives here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .tensorio import MalformedTensorError
from .transfer import NUM_CLASSES

# Canonical cube dimensions of the production data.
RAED_SHAPE = (128, 240, 500)   # Doppler x azimuth x range
ELEVATION_BINS = 34
RAE_SHAPE = (500, 240, ELEVATION_BINS)  # range x azimuth x elevation

# Per-class loss weights (empty, scenario, pedestrian, vehicle, bicycle) and
# Dice mixing factor of the reference operating point.
DEFAULT_CLASS_WEIGHTS = (1.27e-4, 2.26e-2, 5.99, 3.93e-1, 2.50)
DEFAULT_DICE_LAMBDA = 2.5


@dataclass
class RaedTensor:
    """Doppler-resolved radar cube: power plus one elevation index per voxel."""

    power: np.ndarray       # (D, A, R), non-negative
    elev_index: np.ndarray  # (D, A, R), ints in {1..ELEVATION_BINS}

    def __post_init__(self):
        power = np.asarray(self.power, dtype=np.float64)
        elev = np.asarray(self.elev_index)
        if power.ndim != 3:
            raise MalformedTensorError(f"power must be 3-D (D, A, R), got {power.shape}")
        if elev.shape != power.shape:
            raise MalformedTensorError(
                f"elev_index shape {elev.shape} does not match power {power.shape}")
        if not np.issubdtype(elev.dtype, np.integer):
            raise MalformedTensorError(f"elev_index must be integer, got {elev.dtype}")
        if power.size and power.min() < 0:
            raise MalformedTensorError("power must be non-negative")
        if elev.size and (elev.min() < 1 or elev.max() > ELEVATION_BINS):
            raise MalformedTensorError(
                f"elevation index must lie in [1, {ELEVATION_BINS}], got range "
                f"[{elev.min()}, {elev.max()}]")
        self.power = power
        self.elev_index = elev.astype(np.int64)

    @property
    def is_canonical(self) -> bool:
        return self.power.shape == RAED_SHAPE


@dataclass
class RaeTensor:
    """Range-azimuth-elevation power volume; non-negative until normalized."""

    power: np.ndarray  # (R, A, E)
    normalized: bool = False

    def __post_init__(self):
        power = np.asarray(self.power, dtype=np.float64)
        if power.ndim != 3:
            raise MalformedTensorError(f"power must be 3-D (R, A, E), got {power.shape}")
        if not self.normalized and power.size and power.min() < 0:
            raise MalformedTensorError("unnormalized power must be non-negative")
        self.power = power

    @property
    def is_canonical(self) -> bool:
        return self.power.shape == RAE_SHAPE


VOLUME_KINDS = ("logits", "probabilities", "labels", "seed")


@dataclass
class SemanticVolume:
    """Per-voxel class volume, (K, R, A, E) or batched (B, K, R, A, E).

    kind "probabilities" requires each voxel's class distribution to sum to 1;
    kind "seed" is occupancy-gated, so class sums lie in [0, 1] instead.
    """

    values: np.ndarray
    kind: str = "logits"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim not in (4, 5):
            raise ValueError(f"values must be (K, R, A, E) or (B, K, R, A, E), got {vals.shape}")
        if self.kind not in VOLUME_KINDS:
            raise ValueError(f"kind must be one of {VOLUME_KINDS}, got {self.kind!r}")
        k = vals.shape[self.class_axis_for(vals)]
        if k != NUM_CLASSES:
            raise ValueError(f"expected {NUM_CLASSES} classes, got {k}")
        if self.kind in ("probabilities", "seed"):
            if vals.size and (vals.min() < 0 or vals.max() > 1):
                raise ValueError(f"{self.kind} values must lie in [0, 1]")
            if self.kind == "probabilities":
                sums = vals.sum(axis=self.class_axis_for(vals))
                if sums.size and np.max(np.abs(sums - 1.0)) > 1e-6:
                    raise ValueError("probability volumes must sum to 1 per voxel")
        self.values = vals

    @staticmethod
    def class_axis_for(vals: np.ndarray) -> int:
        return 0 if vals.ndim == 4 else 1

    @property
    def class_axis(self) -> int:
        return self.class_axis_for(self.values)


@dataclass
class LossWeights:
    """Per-class cross-entropy weights and the Dice mixing factor."""

    w: np.ndarray = DEFAULT_CLASS_WEIGHTS
    dice_lambda: float = DEFAULT_DICE_LAMBDA

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64).reshape(-1)
        if w.size != NUM_CLASSES:
            raise ValueError(f"expected {NUM_CLASSES} class weights, got {w.size}")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValueError("class weights must be positive and finite")
        self.w = w


def raed_from_channels(arr: np.ndarray) -> RaedTensor:
    """Split a (2, D, A, R) channel-pair cube into power and elevation index.

    Channel 0 is power, channel 1 the per-voxel elevation index stored as a
    float but required to hold integral values.
    """
    arr = np.asarray(arr)
    if arr.ndim != 4 or arr.shape[0] != 2:
        raise MalformedTensorError(f"channel pair must be (2, D, A, R), got {arr.shape}")
    elev = arr[1]
    if not np.all(elev == np.round(elev)):
        raise MalformedTensorError("elevation channel holds non-integral values")
    return RaedTensor(power=arr[0], elev_index=elev.astype(np.int64))


def raed_to_rae(raed: RaedTensor) -> RaeTensor:
    """Fold the Doppler axis: deposit each voxel's power at its elevation bin.

    Every (doppler, azimuth, range) contribution lands at
    (range, azimuth, elev_index - 1); cells hit by several Doppler bins hold
    the arithmetic mean of their contributions, untouched cells hold 0.
    """
    D, A, R = raed.power.shape
    E = ELEVATION_BINS
    a_idx = np.arange(A, dtype=np.int64)[None, :, None]
    r_idx = np.arange(R, dtype=np.int64)[None, None, :]
    lin = ((r_idx * A + a_idx) * E + (raed.elev_index - 1)).ravel()
    sums = np.bincount(lin, weights=raed.power.ravel(), minlength=R * A * E)
    counts = np.bincount(lin, minlength=R * A * E)
    rae = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0).reshape(R, A, E)
    return RaeTensor(power=rae, normalized=False)


def normalize_rae(rae: RaeTensor, epsilon: float = 1e-6) -> RaeTensor:
    """Log-compress and standardize each elevation slice over its (R, A) plane.

    p_hat = (log1p(p) - mean) / (std + epsilon), with population mean and
    standard deviation computed per elevation slice of the frame.
    """
    if rae.normalized:
        raise ValueError("tensor is already normalized")
    if rae.power.size and rae.power.min() < 0:
        raise ValueError("power must be non-negative before normalization")
    logp = np.log1p(rae.power)
    mu = logp.mean(axis=(0, 1))
    sigma = logp.std(axis=(0, 1))
    return RaeTensor(power=(logp - mu) / (sigma + epsilon), normalized=True)


def compose_seed(occupancy: np.ndarray, classes: np.ndarray) -> SemanticVolume:
    """Occupancy-gated class seed: sigmoid(occupancy) times softmax(classes).

    occupancy is (B, E, R, A) logits, classes is (B, K, R, A) logits. The
    result is (B, K, R, A, E) with each voxel's class sum equal to the
    sigmoid occupancy at that voxel.
    """
    occ = np.asarray(occupancy, dtype=np.float64)
    cls = np.asarray(classes, dtype=np.float64)
    if occ.ndim != 4 or cls.ndim != 4:
        raise ValueError(f"expected 4-D inputs, got occupancy {occ.shape}, classes {cls.shape}")
    if cls.shape[1] != NUM_CLASSES:
        raise ValueError(f"expected {NUM_CLASSES} class channels, got {cls.shape[1]}")
    if occ.shape[0] != cls.shape[0] or occ.shape[2:] != cls.shape[2:]:
        raise ValueError(f"batch/spatial dims differ: occupancy {occ.shape}, classes {cls.shape}")
    gate = expit(occ)                            # (B, E, R, A)
    soft = _softmax(cls, axis=1)                 # (B, K, R, A)
    seed = soft[:, :, :, :, None] * gate.transpose(0, 2, 3, 1)[:, None, :, :, :]
    return SemanticVolume(values=seed, kind="seed")


def _softmax(z: np.ndarray, axis: int) -> np.ndarray:
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def loss(logits: SemanticVolume, labels: np.ndarray, weights: LossWeights,
         smooth: float = 1.0) -> tuple[float, np.ndarray]:
    """Weighted cross-entropy plus lambda-scaled soft Dice, with gradient.

    CE is the weighted mean of -w[y] * log softmax(z)[y] over voxels,
    normalized by the summed applied weights. Soft Dice averages
    (2*intersection + s) / (prediction sum + target sum + s) over all K
    classes on the flattened volume. Returns (total, d total / d logits)
    with the gradient shaped like the logits.
    """
    if logits.kind != "logits":
        raise ValueError(f"loss expects kind='logits', got {logits.kind!r}")
    vals = logits.values
    if vals.ndim != 4:
        raise ValueError("loss expects an unbatched (K, R, A, E) volume")
    y = np.asarray(labels)
    if y.shape != vals.shape[1:]:
        raise ValueError(f"labels shape {y.shape} does not match volume {vals.shape[1:]}")
    if not np.issubdtype(y.dtype, np.integer):
        raise ValueError(f"labels must be integer class indices, got {y.dtype}")
    if y.size and (y.min() < 0 or y.max() >= NUM_CLASSES):
        raise ValueError(f"labels must lie in [0, {NUM_CLASSES})")

    K = vals.shape[0]
    z = vals.reshape(K, -1)                      # (K, N)
    yv = y.reshape(-1)                           # (N,)
    n = yv.size
    if n == 0:
        raise ValueError("loss over an empty volume is undefined")
    cols = np.arange(n)

    zmax = z.max(axis=0, keepdims=True)
    ze = np.exp(z - zmax)
    denom = ze.sum(axis=0, keepdims=True)
    p = ze / denom                               # softmax, (K, N)
    logp = (z - zmax) - np.log(denom)

    onehot = np.zeros((K, n))
    onehot[yv, cols] = 1.0

    wv = weights.w[yv]                           # (N,)
    wsum = wv.sum()
    ce = float((-wv * logp[yv, cols]).sum() / wsum)
    grad_ce = (p - onehot) * (wv / wsum)[None, :]

    inter = (p * onehot).sum(axis=1)             # (K,)
    psum = p.sum(axis=1)
    tsum = onehot.sum(axis=1)
    union = psum + tsum + smooth
    dice_k = (2.0 * inter + smooth) / union
    sdice = float(1.0 - dice_k.mean())
    # d sdice / d p[k, v], then chained through the softmax Jacobian.
    g = -(2.0 * onehot * union[:, None] - (2.0 * inter + smooth)[:, None]) / (K * union[:, None] ** 2)
    grad_dice = p * (g - (g * p).sum(axis=0, keepdims=True))

    total = ce + weights.dice_lambda * sdice
    grad = (grad_ce + weights.dice_lambda * grad_dice).reshape(vals.shape)
    return total, grad
