"""Single-level orthonormal Haar transform on 2x2 blocks.

The four analysis vectors are the scaled Hadamard basis (+-1/2), so the
transform preserves energy exactly and the low band of a [0, 1] image lies
in [0, 2]. Odd input dimensions are handled by replicating the last row or
column; the original size is kept in ``parity`` and restored on inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .image import Image


@dataclass
class WaveletBands:
    ll: Image
    lh: Image  # horizontal high-pass (vertical edges)
    hl: Image  # vertical high-pass (horizontal edges)
    hh: Image
    parity: tuple[int, int]  # (width, height) before even-padding

    def band_shape(self) -> tuple[int, int]:
        return self.ll.shape


def _pad_even(arr: np.ndarray) -> np.ndarray:
    c, h, w = arr.shape
    if h % 2:
        arr = np.concatenate([arr, arr[:, -1:, :]], axis=1)
    if w % 2:
        arr = np.concatenate([arr, arr[:, :, -1:]], axis=2)
    return arr


def dwt2(img: Image) -> WaveletBands:
    """Forward transform; output bands are ceil(half) the input resolution."""
    img.validate_finite()
    parity = (img.width, img.height)
    x = _pad_even(img.data).astype(np.float64)
    a = x[:, 0::2, 0::2]
    b = x[:, 0::2, 1::2]
    c = x[:, 1::2, 0::2]
    d = x[:, 1::2, 1::2]
    ll = (a + b + c + d) * 0.5
    lh = (a - b + c - d) * 0.5
    hl = (a + b - c - d) * 0.5
    hh = (a - b - c + d) * 0.5
    cs = img.color_space
    return WaveletBands(
        ll=Image(ll.astype(np.float32), cs),
        lh=Image(lh.astype(np.float32), cs),
        hl=Image(hl.astype(np.float32), cs),
        hh=Image(hh.astype(np.float32), cs),
        parity=parity,
    )


def idwt2(bands: WaveletBands) -> Image:
    """Inverse transform with parity crop; exact to float rounding."""
    shapes = {bands.ll.shape, bands.lh.shape, bands.hl.shape, bands.hh.shape}
    if len(shapes) != 1:
        raise InvalidArgumentError(f"band dimensions differ: {shapes}")
    ll = bands.ll.data.astype(np.float64)
    lh = bands.lh.data.astype(np.float64)
    hl = bands.hl.data.astype(np.float64)
    hh = bands.hh.data.astype(np.float64)
    ch, bh, bw = ll.shape
    out = np.empty((ch, bh * 2, bw * 2), dtype=np.float64)
    out[:, 0::2, 0::2] = (ll + lh + hl + hh) * 0.5
    out[:, 0::2, 1::2] = (ll - lh + hl - hh) * 0.5
    out[:, 1::2, 0::2] = (ll + lh - hl - hh) * 0.5
    out[:, 1::2, 1::2] = (ll - lh - hl + hh) * 0.5
    w, h = bands.parity
    out = out[:, :h, :w]
    return Image(out.astype(np.float32), bands.ll.color_space)
