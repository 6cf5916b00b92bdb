"""Warping and resizing primitives shared by registration, flow, and fusion.

``warp_bilinear`` is the single backward-warping entry point: callers hand
it a sampler producing per-pixel source coordinates, so homography and flow
warps go through identical interpolation and validity logic. Out-of-frame
samples are 0 with validity 0 (never clamped) because the fusion stage must
know which ultra-wide pixels are unavailable.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import kernels
from .errors import InvalidArgumentError
from .image import Image

Sampler = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


def output_grid(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-center coordinate grids (xs, ys), each (h, w) float64."""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    return xs, ys


def warp_bilinear(
    img: Image,
    sampler: Sampler,
    out_shape: tuple[int, int] | None = None,
) -> tuple[Image, Image]:
    """Backward-warp ``img`` through ``sampler``.

    ``sampler`` maps output-grid coordinate arrays (xs, ys) to source
    coordinates. Returns the warped image and a single-plane validity image
    (1 inside the source frame, 0 where the sample fell outside).
    """
    h, w = out_shape if out_shape is not None else img.shape
    xs, ys = output_grid(h, w)
    sx, sy = sampler(xs, ys)
    sx = np.asarray(sx, dtype=np.float64)
    sy = np.asarray(sy, dtype=np.float64)
    if not (np.all(np.isfinite(sx)) and np.all(np.isfinite(sy))):
        raise InvalidArgumentError("sampler produced non-finite coordinates")
    planes = []
    valid = None
    for c in range(img.channels):
        vals, ok = kernels.bilinear_sample(img.data[c], sx, sy)
        planes.append(vals)
        valid = ok  # identical for every channel
    warped = Image(np.stack(planes), img.color_space)
    validity = Image(valid.astype(np.float32)[None])
    return warped, validity


def shift_sampler(dx: float, dy: float) -> Sampler:
    """Sampler reading ``dx, dy`` pixels ahead (output p maps to p + (dx,dy))."""

    def sample(xs, ys):
        return xs + dx, ys + dy

    return sample


def _axis_lerp(arr: np.ndarray, new_len: int, axis: int) -> np.ndarray:
    old_len = arr.shape[axis]
    # half-pixel-center mapping with edge clamping
    pos = (np.arange(new_len, dtype=np.float64) + 0.5) * (old_len / new_len) - 0.5
    pos = np.clip(pos, 0.0, old_len - 1.0)
    i0 = np.floor(pos).astype(np.int64)
    i1 = np.minimum(i0 + 1, old_len - 1)
    f = pos - i0
    a = np.take(arr, i0, axis=axis)
    b = np.take(arr, i1, axis=axis)
    shape = [1] * arr.ndim
    shape[axis] = new_len
    f = f.reshape(shape)
    return a * (1.0 - f) + b * f


def resize_bilinear(img: Image, new_w: int, new_h: int) -> Image:
    """Separable bilinear resampling with edge clamping."""
    if new_w < 1 or new_h < 1:
        raise InvalidArgumentError(f"target size must be >= 1, got {new_w}x{new_h}")
    if (new_w, new_h) == (img.width, img.height):
        return img.copy()
    data = img.data.astype(np.float64)
    data = _axis_lerp(data, new_h, axis=1)
    data = _axis_lerp(data, new_w, axis=2)
    return Image(data.astype(np.float32), img.color_space)


def resize_plane(plane: np.ndarray, new_w: int, new_h: int) -> np.ndarray:
    """resize_bilinear for a bare (h, w) array."""
    out = resize_bilinear(Image(plane[None]), new_w, new_h)
    return out.data[0]
