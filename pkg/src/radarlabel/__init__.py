"""Cross-modal labeling toolkit for 4D radar point clouds.

Transfers semantic labels from camera and radar-depth segmentation maps onto
radar point clouds by geometric projection, refines them with class-aware
clustering, simulates fog over camera images, and evaluates labeled clouds
with detection / false-alarm / Chamfer metrics.
"""

from .encode import (DEFAULT_CLASS_WEIGHTS, DEFAULT_DICE_LAMBDA, LossWeights,
                     RaedTensor, RaeTensor, SemanticVolume, compose_seed, loss,
                     normalize_rae, raed_from_channels, raed_to_rae)
from .fog import DEFAULT_BETAS, DepthImage, FogParams, apply_fog
from .geometry import (Calibration, CalibrationError, PointCloud, ProjectedPoints,
                       build_transform, parse_calibration, project_points,
                       transform_points)
from .metrics import (CLASS_GROUPS, EvalGrid, MetricsReport, aggregate_reports,
                      chamfer, evaluate_frame, pd_pfa, voxelize)
from .plyio import PALETTE, export_ply, read_labeled_ply
from .refine import (ClusterAssignment, RefineConfig, dbscan, refine,
                     validate_neighbors, vote_clusters)
from .tensorio import MalformedTensorError, read_tensor, write_tensor
from .transfer import (ClassId, LabeledPointCloud, SegMap, fuse_segmaps,
                       read_segmap, sample_labels, write_segmap)

__version__ = "0.1.0"
