"""Self-contained LiDAR-to-camera projection for depth map generation.

This is deliberately an independent implementation of the rigid transform,
perspective projection, and visibility test (scalar math, expanded rotation
matrix) so the emitted depth maps double as a cross-check oracle for the
consuming toolkit's vectorized geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class CameraModel:
    """Pose (radians, meters) and pinhole intrinsics of the target camera."""

    roll: float
    pitch: float
    yaw: float
    tx: float
    ty: float
    tz: float
    fx: float
    fy: float
    cx: float
    cy: float
    skew: float
    width: int
    height: int
    max_depth: float = 50.0


def rotation_entries(roll: float, pitch: float, yaw: float) -> list[list[float]]:
    """Expanded Rz(yaw) Ry(pitch) Rx(roll), written out entry by entry."""
    sr, cr = math.sin(roll), math.cos(roll)
    sp, cp = math.sin(pitch), math.cos(pitch)
    sy, cy = math.sin(yaw), math.cos(yaw)
    return [
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ]


def project_point(cam: CameraModel, x: float, y: float, z: float
                  ) -> tuple[float, float, float, bool]:
    """Map one sensor-frame point to (u, v, depth, visible).

    Visible means 0 < u < width, 0 < v < height and 0 < depth <= max_depth
    after the rigid transform and homogeneous normalization. For invisible
    points u and v are still returned when the division is defined, else 0.
    """
    R = rotation_entries(cam.roll, cam.pitch, cam.yaw)
    xc = R[0][0] * x + R[0][1] * y + R[0][2] * z + cam.tx
    yc = R[1][0] * x + R[1][1] * y + R[1][2] * z + cam.ty
    zc = R[2][0] * x + R[2][1] * y + R[2][2] * z + cam.tz

    u_t = cam.fx * xc + cam.skew * yc + cam.cx * zc
    v_t = cam.fy * yc + cam.cy * zc
    w_t = zc
    if abs(w_t) < 1e-12:
        return 0.0, 0.0, zc, False
    u = u_t / w_t
    v = v_t / w_t
    visible = (0.0 < u < cam.width and 0.0 < v < cam.height
               and 0.0 < zc <= cam.max_depth)
    return u, v, zc, visible


def _round_half_down(value: float) -> int:
    return math.ceil(value - 0.5)


def depth_map_from_points(cam: CameraModel, points) -> "list[list[float]]":
    """Z-buffer depth image from sensor points; 0 marks pixels with no return.

    Each visible point deposits its camera depth at the nearest pixel (ties
    toward the lower index); when several points share a pixel the closest
    one wins.
    """
    rows = [[0.0] * cam.width for _ in range(cam.height)]
    for x, y, z in points:
        u, v, depth, visible = project_point(cam, float(x), float(y), float(z))
        if not visible:
            continue
        col = _round_half_down(u)
        row = _round_half_down(v)
        if 0 <= row < cam.height and 0 <= col < cam.width:
            current = rows[row][col]
            if current == 0.0 or depth < current:
                rows[row][col] = depth
    return rows
