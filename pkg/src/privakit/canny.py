"""Classical Canny edge extraction: smooth, Sobel, NMS, hysteresis."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import ParameterError
from .imaging import EdgeMap, ImageBuffer, gaussian_smooth

__all__ = ["canny_edges", "DEFAULT_LOW", "DEFAULT_HIGH", "DEFAULT_SIGMA"]

DEFAULT_LOW = 100.0
DEFAULT_HIGH = 200.0
DEFAULT_SIGMA = 1.4

_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = _SOBEL_X.T

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def _sobel(field: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gx = ndimage.convolve(field, _SOBEL_X, mode="nearest")
    gy = ndimage.convolve(field, _SOBEL_Y, mode="nearest")
    return gx, gy


def _nonmax_suppress(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Thin ridges to 1 px along the quantized gradient direction.

    Ties across the ridge are broken asymmetrically (>= forward, > backward)
    so a symmetric step keeps exactly one crest line.
    """
    h, w = mag.shape
    padded = np.pad(mag, 1, mode="constant")

    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    sector = np.zeros(mag.shape, dtype=np.int8)
    sector[(angle >= 22.5) & (angle < 67.5)] = 1
    sector[(angle >= 67.5) & (angle < 112.5)] = 2
    sector[(angle >= 112.5) & (angle < 157.5)] = 3

    # neighbor pairs along the gradient per sector, in y-down image coordinates:
    # 0 deg -> E/W, 45 -> SE/NW, 90 -> S/N, 135 -> SW/NE
    offsets = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}
    keep = np.zeros(mag.shape, dtype=bool)
    ys, xs = np.mgrid[0:h, 0:w]
    for s, (dy, dx) in offsets.items():
        sel = sector == s
        fwd = padded[ys + 1 + dy, xs + 1 + dx]
        bwd = padded[ys + 1 - dy, xs + 1 - dx]
        keep |= sel & (mag > bwd) & (mag >= fwd)
    return keep


def canny_edges(
    image: ImageBuffer,
    low: float = DEFAULT_LOW,
    high: float = DEFAULT_HIGH,
    sigma: float = DEFAULT_SIGMA,
) -> EdgeMap:
    """Detect edges on the luminance plane with hysteresis thresholds (low, high).

    Thresholds are on the Sobel gradient magnitude of the sigma-smoothed
    0-255 luminance. Weak pixels survive only in 8-connected components that
    contain at least one strong pixel.
    """
    if not (0 <= low < high):
        raise ParameterError(f"need 0 <= low < high, got low={low} high={high}")
    if not np.isfinite(sigma) or sigma <= 0:
        raise ParameterError(f"sigma must be finite and > 0, got {sigma}")

    smoothed = gaussian_smooth(image.to_luminance(), sigma)
    gx, gy = _sobel(smoothed)
    mag = np.hypot(gx, gy)

    crest = _nonmax_suppress(mag, gx, gy)
    weak = crest & (mag >= low)
    strong = crest & (mag >= high)
    if not strong.any():
        return EdgeMap(np.zeros(mag.shape, dtype=bool))

    labels, n = ndimage.label(weak, structure=_EIGHT_CONNECTED)
    anchored = np.zeros(n + 1, dtype=bool)
    anchored[np.unique(labels[strong])] = True
    anchored[0] = False
    return EdgeMap(anchored[labels])
