"""Planar float image container and PNG input/output.

Samples live in a (channels, height, width) float32 array, nominally in
[0, 1]. PNG decode divides by the bit-depth maximum (255 or 65535); encode
clamps to [0, 1] and rounds half-to-even. The color-space tag is metadata
only and never triggers a conversion.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .errors import InvalidArgumentError

# Rec.601 luma weights, used wherever a single-channel view is needed
_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


@dataclass
class Image:
    """A 1- or 3-channel planar float32 raster."""

    data: np.ndarray  # (channels, height, width), float32
    color_space: str = "srgb"

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3 or arr.shape[0] not in (1, 3):
            raise InvalidArgumentError(
                f"image data must be (c,h,w) with c in (1,3), got {arr.shape}"
            )
        if arr.shape[1] == 0 or arr.shape[2] == 0:
            raise InvalidArgumentError("zero-sized image")
        self.data = np.ascontiguousarray(arr, dtype=np.float32)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def validate_finite(self) -> "Image":
        if not np.all(np.isfinite(self.data)):
            raise InvalidArgumentError("image contains non-finite samples")
        return self

    def luma(self) -> np.ndarray:
        """Rec.601 luma plane as (h, w) float32."""
        if self.channels == 1:
            return self.data[0]
        return np.tensordot(_LUMA, self.data, axes=1).astype(np.float32)

    def to_gray(self) -> "Image":
        return Image(self.luma()[None], color_space=self.color_space)

    def copy(self) -> "Image":
        return Image(self.data.copy(), color_space=self.color_space)


def from_planes(*planes: np.ndarray, color_space: str = "srgb") -> Image:
    return Image(np.stack([np.asarray(p, dtype=np.float32) for p in planes]),
                 color_space=color_space)


def read_png(path: str | Path) -> Image:
    """Decode an 8- or 16-bit PNG to [0, 1] float32. Alpha is dropped."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise InvalidArgumentError(f"cannot read image: {path}")
    if raw.dtype == np.uint8:
        maxval = 255.0
    elif raw.dtype == np.uint16:
        maxval = 65535.0
    else:
        raise InvalidArgumentError(f"unsupported PNG sample type {raw.dtype} in {path}")
    if raw.ndim == 2:
        planes = raw[None].astype(np.float32) / maxval
    else:
        if raw.shape[2] == 4:
            raw = raw[:, :, :3]
        if raw.shape[2] != 3:
            raise InvalidArgumentError(f"unsupported channel count {raw.shape[2]} in {path}")
        rgb = cv2.cvtColor(raw, cv2.COLOR_BGR2RGB)
        planes = np.moveaxis(rgb, 2, 0).astype(np.float32) / maxval
    return Image(planes)


def write_png(path: str | Path, img: Image, bit_depth: int = 8) -> None:
    """Encode to PNG, clamping to [0, 1] and rounding half-to-even."""
    if bit_depth == 8:
        maxval, dtype = 255.0, np.uint8
    elif bit_depth == 16:
        maxval, dtype = 65535.0, np.uint16
    else:
        raise InvalidArgumentError(f"bit_depth must be 8 or 16, got {bit_depth}")
    clamped = np.clip(img.data, 0.0, 1.0)
    quantized = np.round(clamped.astype(np.float64) * maxval).astype(dtype)
    if img.channels == 1:
        raster = quantized[0]
    else:
        raster = cv2.cvtColor(np.moveaxis(quantized, 0, 2), cv2.COLOR_RGB2BGR)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ok, buf = cv2.imencode(".png", raster)
    if not ok:
        raise InvalidArgumentError(f"PNG encode failed for {path}")
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(buf.tobytes())
    tmp.replace(path)
