"""Deterministic raster math: masks, feathering, compositing, crop/paste, PNG I/O.

All operations are pure functions over value types and are safe to call from
multiple threads. Images are 8-bit per channel; masks are real-valued blend
weights in [0, 1].
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import EmptyCropError, ParameterError, ShapeError

__all__ = [
    "ImageBuffer",
    "SoftMask",
    "BBox",
    "EdgeMap",
    "alpha_composite",
    "crop",
    "paste_resample",
    "mask_union",
    "feather_mask",
    "resample_bilinear",
    "quantize_u8",
    "load_png",
    "save_png",
]


def quantize_u8(values: np.ndarray) -> np.ndarray:
    """Round non-negative float values half-away-from-zero into uint8."""
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class ImageBuffer:
    """An 8-bit raster plane, shape (height, width, channels), channels 1 or 3."""

    data: np.ndarray

    def __post_init__(self):
        d = self.data
        if d.ndim == 2:
            d = d[:, :, None]
            object.__setattr__(self, "data", d)
        if d.ndim != 3 or d.shape[2] not in (1, 3):
            raise ShapeError(f"image must be (h, w, 1|3), got {d.shape}")
        if d.shape[0] < 1 or d.shape[1] < 1:
            raise ShapeError("image dimensions must be at least 1x1")
        if d.dtype != np.uint8:
            raise ShapeError(f"image dtype must be uint8, got {d.dtype}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @classmethod
    def full(cls, width: int, height: int, value=0, channels: int = 3) -> "ImageBuffer":
        arr = np.empty((height, width, channels), dtype=np.uint8)
        arr[...] = value
        return cls(arr)

    def copy(self) -> "ImageBuffer":
        return ImageBuffer(self.data.copy())

    def to_luminance(self) -> np.ndarray:
        """ITU-R 601 luma as float64, shape (h, w)."""
        if self.channels == 1:
            return self.data[:, :, 0].astype(np.float64)
        r, g, b = (self.data[:, :, i].astype(np.float64) for i in range(3))
        return 0.299 * r + 0.587 * g + 0.114 * b

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.width}x{self.height}x{self.channels}:".encode())
        h.update(self.data.tobytes())
        return h.hexdigest()

    def __eq__(self, other) -> bool:
        return isinstance(other, ImageBuffer) and np.array_equal(self.data, other.data)


@dataclass(frozen=True)
class SoftMask:
    """Per-pixel blend weights in [0, 1], shape (height, width)."""

    weights: np.ndarray

    def __post_init__(self):
        w = self.weights
        if w.ndim != 2:
            raise ShapeError(f"mask must be 2-d, got shape {w.shape}")
        if w.dtype != np.float64:
            object.__setattr__(self, "weights", w.astype(np.float64))
            w = self.weights
        if w.size and (w.min() < 0.0 or w.max() > 1.0):
            raise ShapeError("mask weights must lie in [0, 1]")

    @property
    def height(self) -> int:
        return self.weights.shape[0]

    @property
    def width(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def zeros(cls, width: int, height: int) -> "SoftMask":
        return cls(np.zeros((height, width), dtype=np.float64))

    @classmethod
    def from_box(cls, width: int, height: int, box: "BBox") -> "SoftMask":
        w = np.zeros((height, width), dtype=np.float64)
        b = box.clamp(width, height)
        w[b.y0 : b.y1, b.x0 : b.x1] = 1.0
        return cls(w)

    def support_box(self, threshold: float = 0.0) -> "BBox | None":
        ys, xs = np.nonzero(self.weights > threshold)
        if len(xs) == 0:
            return None
        return BBox(int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)


@dataclass(frozen=True)
class BBox:
    """Integer pixel rectangle; top-left inclusive, bottom-right exclusive."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ShapeError(f"degenerate box {(self.x0, self.y0, self.x1, self.y1)}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    def area(self) -> int:
        return self.width * self.height

    def expand(self, pad: int) -> "BBox":
        return BBox(self.x0 - pad, self.y0 - pad, self.x1 + pad, self.y1 + pad)

    def clamp(self, width: int, height: int) -> "BBox":
        x0 = max(0, min(self.x0, width))
        y0 = max(0, min(self.y0, height))
        x1 = max(0, min(self.x1, width))
        y1 = max(0, min(self.y1, height))
        if x0 >= x1 or y0 >= y1:
            raise EmptyCropError(f"box {self.as_tuple()} lies outside {width}x{height}")
        return BBox(x0, y0, x1, y1)

    def intersects(self, width: int, height: int) -> bool:
        return self.x0 < width and self.y0 < height and self.x1 > 0 and self.y1 > 0

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x0, self.y0, self.x1, self.y1)


@dataclass(frozen=True)
class EdgeMap:
    """Binary edge flags, shape (height, width)."""

    edges: np.ndarray

    def __post_init__(self):
        e = self.edges
        if e.ndim != 2:
            raise ShapeError(f"edge map must be 2-d, got shape {e.shape}")
        if e.dtype != np.bool_:
            object.__setattr__(self, "edges", e.astype(bool))

    @property
    def height(self) -> int:
        return self.edges.shape[0]

    @property
    def width(self) -> int:
        return self.edges.shape[1]

    def count(self) -> int:
        return int(self.edges.sum())


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = int(np.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs**2) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_smooth(field: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian convolution, kernel radius ceil(3*sigma), replicated edges."""
    kernel = _gaussian_kernel(sigma)
    radius = len(kernel) // 2
    padded = np.pad(field, radius, mode="edge")
    # horizontal then vertical pass
    tmp = np.apply_along_axis(lambda r: np.convolve(r, kernel, mode="valid"), 1, padded)
    out = np.apply_along_axis(lambda c: np.convolve(c, kernel, mode="valid"), 0, tmp)
    return out


def feather_mask(mask: SoftMask, sigma: float) -> SoftMask:
    """Gaussian-blur a mask to soften composite boundaries.

    The result is clamped back to [0, 1]; boundary handling replicates edge
    pixels so constant masks stay constant.
    """
    if not np.isfinite(sigma) or sigma <= 0:
        raise ParameterError(f"sigma must be finite and > 0, got {sigma}")
    out = gaussian_smooth(mask.weights, sigma)
    return SoftMask(np.clip(out, 0.0, 1.0))


def alpha_composite(base: ImageBuffer, overlay: ImageBuffer, mask: SoftMask) -> ImageBuffer:
    """Blend overlay into base: out = base*(1-a) + overlay*a per pixel/channel.

    Written in lerp form base + (overlay-base)*a so that a==0, a==1 and
    overlay==base are bit-exact after half-away-from-zero rounding.
    """
    if base.data.shape != overlay.data.shape:
        raise ShapeError(f"base {base.data.shape} vs overlay {overlay.data.shape}")
    if (mask.height, mask.width) != (base.height, base.width):
        raise ShapeError(f"mask {mask.weights.shape} vs image {(base.height, base.width)}")
    a = mask.weights[:, :, None]
    b = base.data.astype(np.float64)
    o = overlay.data.astype(np.float64)
    return ImageBuffer(quantize_u8(b + (o - b) * a))


def crop(image: ImageBuffer, box: BBox, pad: int = 0) -> tuple[ImageBuffer, BBox]:
    """Cut the sub-image of box expanded by pad, clamped to image bounds.

    Returns the crop and the effective (clamped) box actually used.
    """
    if pad < 0:
        raise ParameterError(f"pad must be >= 0, got {pad}")
    if not box.intersects(image.width, image.height):
        raise EmptyCropError(f"box {box.as_tuple()} outside {image.width}x{image.height}")
    eff = box.expand(pad).clamp(image.width, image.height)
    return ImageBuffer(image.data[eff.y0 : eff.y1, eff.x0 : eff.x1].copy()), eff


def resample_bilinear(data: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resampling of an (h, w, c) float array."""
    in_h, in_w = data.shape[:2]
    if (in_h, in_w) == (out_h, out_w):
        return data.copy()

    def grid(n_out, n_in):
        if n_out == 1 or n_in == 1:
            return np.zeros(n_out, dtype=np.float64)
        return np.arange(n_out, dtype=np.float64) * (n_in - 1) / (n_out - 1)

    ys, xs = grid(out_h, in_h), grid(out_w, in_w)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    d = data.astype(np.float64)
    top = d[y0][:, x0] * (1 - fx) + d[y0][:, x1] * fx
    bot = d[y1][:, x0] * (1 - fx) + d[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def paste_resample(canvas: ImageBuffer, patch: ImageBuffer, box: BBox) -> ImageBuffer:
    """Write patch into the canvas region box, bilinearly resampled to fit.

    Pixels outside box are untouched; a patch already at box dimensions is
    copied bit-exactly.
    """
    if patch.channels != canvas.channels:
        raise ShapeError(f"patch channels {patch.channels} vs canvas {canvas.channels}")
    if box.x0 < 0 or box.y0 < 0 or box.x1 > canvas.width or box.y1 > canvas.height:
        raise ShapeError(f"box {box.as_tuple()} outside canvas {canvas.width}x{canvas.height}")
    out = canvas.data.copy()
    if (patch.height, patch.width) == (box.height, box.width):
        out[box.y0 : box.y1, box.x0 : box.x1] = patch.data
    else:
        resampled = resample_bilinear(patch.data, box.height, box.width)
        out[box.y0 : box.y1, box.x0 : box.x1] = quantize_u8(resampled)
    return ImageBuffer(out)


def mask_union(masks: list[SoftMask], shape: tuple[int, int] | None = None) -> SoftMask:
    """Per-pixel maximum of masks; empty list yields zeros of the given (w, h)."""
    if not masks:
        if shape is None:
            raise ParameterError("mask_union of an empty list needs an explicit shape")
        return SoftMask.zeros(shape[0], shape[1])
    dims = (masks[0].height, masks[0].width)
    for m in masks[1:]:
        if (m.height, m.width) != dims:
            raise ShapeError(f"mask {m.weights.shape} vs {dims}")
    return SoftMask(np.maximum.reduce([m.weights for m in masks]))


def load_png(path) -> ImageBuffer:
    img = Image.open(path)
    if img.mode == "L":
        return ImageBuffer(np.asarray(img, dtype=np.uint8)[:, :, None].copy())
    return ImageBuffer(np.asarray(img.convert("RGB"), dtype=np.uint8).copy())


def load_mask_png(path) -> SoftMask:
    img = Image.open(path).convert("L")
    return SoftMask(np.asarray(img, dtype=np.uint8).astype(np.float64) / 255.0)


def save_png(obj, path) -> None:
    """Write an ImageBuffer, SoftMask (8-bit gray, weight*255) or EdgeMap as PNG."""
    if isinstance(obj, ImageBuffer):
        arr = obj.data[:, :, 0] if obj.channels == 1 else obj.data
        Image.fromarray(arr).save(path)
    elif isinstance(obj, SoftMask):
        Image.fromarray(quantize_u8(obj.weights * 255.0)).save(path)
    elif isinstance(obj, EdgeMap):
        Image.fromarray(np.where(obj.edges, 255, 0).astype(np.uint8)).save(path)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} as PNG")
