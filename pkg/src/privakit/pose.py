"""Body-pose parameter helpers: validation and root-yaw extraction."""

from __future__ import annotations

import numpy as np

from .errors import ShapeError

__all__ = ["POSE_LEN", "SHAPE_LEN", "check_params", "root_yaw_deg"]

POSE_LEN = 72  # 24 joints x 3 axis-angle components
SHAPE_LEN = 10


def check_params(theta, beta) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(theta, dtype=np.float64).ravel()
    b = np.asarray(beta, dtype=np.float64).ravel()
    if t.shape != (POSE_LEN,):
        raise ShapeError(f"pose vector must have {POSE_LEN} values, got {t.shape}")
    if b.shape != (SHAPE_LEN,):
        raise ShapeError(f"shape vector must have {SHAPE_LEN} values, got {b.shape}")
    return t, b


def _rodrigues(axis_angle: np.ndarray) -> np.ndarray:
    angle = float(np.linalg.norm(axis_angle))
    if angle < 1e-12:
        return np.eye(3)
    axis = axis_angle / angle
    kx, ky, kz = axis
    k = np.array([[0, -kz, ky], [kz, 0, -kx], [-ky, kx, 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


def root_yaw_deg(theta) -> float:
    """Heading of the body's forward axis after the root joint rotation.

    0 means the subject faces the camera; positive angles turn counter-
    clockwise when seen from above (90 = facing left). Range (-180, 180].
    """
    t = np.asarray(theta, dtype=np.float64).ravel()
    if t.size < 3:
        raise ShapeError("pose vector too short for a root rotation")
    forward = _rodrigues(t[:3]) @ np.array([0.0, 0.0, 1.0])
    yaw = float(np.degrees(np.arctan2(forward[0], forward[2])))
    return 180.0 if yaw == -180.0 else yaw
