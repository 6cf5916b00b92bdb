"""Photometric alignment in the wavelet low band, conditioned on the
reference image.

A spatially varying 3x4 affine color map is fitted per tile by weighted
ridge regression on the low-frequency band, using only flow-confident
pixels. Tile matrices are shared at tile corners and interpolated
bilinearly, so the field is continuous. The high-frequency bands of the
input pass through untouched, preserving sharpness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .image import Image
from .wavelet import WaveletBands, dwt2, idwt2

_MIN_TILE_WEIGHT = 32.0

# ridge pulls the fit toward this (do-nothing) map
_IDENTITY_M = np.hstack([np.eye(3), np.zeros((3, 1))])


@dataclass
class ColorTransform:
    """Per-corner-node 3x4 affine RGB maps over a grid_h x grid_w tiling."""

    grid_w: int
    grid_h: int
    nodes: np.ndarray  # (grid_h+1, grid_w+1, 3, 4) float64
    ridge: float
    warned: bool = field(default=False)  # set when fitted from an empty mask

    def __post_init__(self):
        expected = (self.grid_h + 1, self.grid_w + 1, 3, 4)
        self.nodes = np.asarray(self.nodes, dtype=np.float64)
        if self.nodes.shape != expected:
            raise InvalidArgumentError(
                f"nodes must have shape {expected}, got {self.nodes.shape}"
            )
        if not np.all(np.isfinite(self.nodes)):
            raise InvalidArgumentError("color transform has non-finite entries")

    @staticmethod
    def identity(grid_w: int = 1, grid_h: int = 1,
                 ridge: float = 0.0, warned: bool = False) -> "ColorTransform":
        nodes = np.tile(_IDENTITY_M, (grid_h + 1, grid_w + 1, 1, 1))
        return ColorTransform(grid_w, grid_h, nodes, ridge, warned)


def _solve_tile(a: np.ndarray, b: np.ndarray, ridge: float) -> np.ndarray | None:
    """Solve (A + ridge I) M = B + ridge M_id for the (3,4) map."""
    lhs = a + ridge * np.eye(4)
    rhs = b + ridge * _IDENTITY_M.T  # (4, 3)
    try:
        m = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(m)):
        return None
    return m.T  # (3, 4)


def fit_color_transform(
    src_ll: Image,
    ref_ll: Image,
    mask_ll: np.ndarray,
    grid: tuple[int, int] = (8, 8),
    ridge: float = 1e-3,
) -> ColorTransform:
    """Per-tile weighted ridge regression of ref against [src, 1].

    ``mask_ll`` weights each pixel's contribution in [0, 1]; pixels with
    zero weight contribute nothing to the normal equations. Tiles with a
    weight sum below 32 fall back to the global fit. An all-zero mask
    returns the identity transform with ``warned`` set.
    """
    grid_w, grid_h = grid
    if grid_w < 1 or grid_h < 1:
        raise InvalidArgumentError("grid must be at least 1x1")
    if ridge < 0:
        raise InvalidArgumentError("ridge must be >= 0")
    if src_ll.shape != ref_ll.shape or src_ll.channels != ref_ll.channels:
        raise InvalidArgumentError("src and ref low bands must match in shape")
    mask = np.asarray(mask_ll, dtype=np.float64)
    if mask.shape != src_ll.shape:
        raise InvalidArgumentError("mask shape must match the low band")
    if mask.min() < 0.0 or mask.max() > 1.0:
        raise InvalidArgumentError("mask values must lie in [0, 1]")
    if src_ll.channels != 3:
        raise InvalidArgumentError("color fitting needs 3-channel bands")

    h, w = src_ll.shape
    if mask.sum() == 0.0:
        return ColorTransform.identity(grid_w, grid_h, ridge, warned=True)

    x = np.empty((h * w, 4), dtype=np.float64)
    x[:, 0] = src_ll.data[0].ravel()
    x[:, 1] = src_ll.data[1].ravel()
    x[:, 2] = src_ll.data[2].ravel()
    x[:, 3] = 1.0
    y = ref_ll.data.reshape(3, -1).T.astype(np.float64)
    wgt = mask.ravel()

    # tile id per pixel
    col_tile = np.minimum((np.arange(w) * grid_w) // w, grid_w - 1)
    row_tile = np.minimum((np.arange(h) * grid_h) // h, grid_h - 1)
    tile_id = (row_tile[:, None] * grid_w + col_tile[None, :]).ravel()
    n_tiles = grid_w * grid_h

    # accumulate per-tile normal equations with bincount
    a_acc = np.zeros((n_tiles, 4, 4))
    b_acc = np.zeros((n_tiles, 4, 3))
    for i in range(4):
        for j in range(i, 4):
            s = np.bincount(tile_id, weights=wgt * x[:, i] * x[:, j],
                            minlength=n_tiles)
            a_acc[:, i, j] = s
            a_acc[:, j, i] = s
        for c in range(3):
            b_acc[:, i, c] = np.bincount(tile_id, weights=wgt * x[:, i] * y[:, c],
                                         minlength=n_tiles)
    wsum = np.bincount(tile_id, weights=wgt, minlength=n_tiles)

    a_global = a_acc.sum(axis=0)
    b_global = b_acc.sum(axis=0)
    m_global = _solve_tile(a_global, b_global, ridge)
    if m_global is None:
        m_global = _IDENTITY_M.copy()

    tiles = np.empty((grid_h, grid_w, 3, 4))
    for t in range(n_tiles):
        ty, tx = divmod(t, grid_w)
        if wsum[t] < _MIN_TILE_WEIGHT:
            tiles[ty, tx] = m_global
            continue
        m = _solve_tile(a_acc[t], b_acc[t], ridge)
        tiles[ty, tx] = m_global if m is None else m

    # shared corners: each node averages its adjacent tiles
    nodes = np.empty((grid_h + 1, grid_w + 1, 3, 4))
    for ny in range(grid_h + 1):
        y0, y1 = max(ny - 1, 0), min(ny, grid_h - 1)
        for nx in range(grid_w + 1):
            x0, x1 = max(nx - 1, 0), min(nx, grid_w - 1)
            block = tiles[y0:y1 + 1, x0:x1 + 1]
            nodes[ny, nx] = block.mean(axis=(0, 1))
    return ColorTransform(grid_w, grid_h, nodes, ridge)


def _node_interp_maps(t: ColorTransform, h: int, w: int):
    """Per-pixel node indices and bilinear fractions for the tile grid."""
    gx = (np.arange(w, dtype=np.float64) + 0.5) * t.grid_w / w
    gy = (np.arange(h, dtype=np.float64) + 0.5) * t.grid_h / h
    jx = np.clip(np.floor(gx).astype(np.int64), 0, t.grid_w - 1)
    iy = np.clip(np.floor(gy).astype(np.int64), 0, t.grid_h - 1)
    fx = gx - jx
    fy = gy - iy
    return iy, jx, fy, fx


def apply_color_transform(
    t: ColorTransform,
    img: Image,
    value_range: tuple[float, float] = (0.0, 1.0),
) -> Image:
    """Per-pixel affine map with bilinear interpolation of node parameters."""
    if img.channels != 3:
        raise InvalidArgumentError("color transform applies to 3-channel images")
    h, w = img.shape
    iy, jx, fy, fx = _node_interp_maps(t, h, w)
    wy0 = (1.0 - fy)[:, None]
    wy1 = fy[:, None]
    wx0 = (1.0 - fx)[None, :]
    wx1 = fx[None, :]

    src = img.data.astype(np.float64)
    ones = np.ones((h, w))
    inputs = (src[0], src[1], src[2], ones)
    out = np.zeros((3, h, w))
    for c in range(3):
        for k in range(4):
            n = t.nodes[:, :, c, k]
            coeff = (
                n[iy][:, jx] * (wy0 * wx0)
                + n[iy][:, jx + 1] * (wy0 * wx1)
                + n[iy + 1][:, jx] * (wy1 * wx0)
                + n[iy + 1][:, jx + 1] * (wy1 * wx1)
            )
            out[c] += coeff * inputs[k]
    lo, hi = value_range
    np.clip(out, lo, hi, out=out)
    return Image(out.astype(np.float32), img.color_space)


def _downsample_mask(mask: np.ndarray, band_shape: tuple[int, int]) -> np.ndarray:
    """2x2 mean pooling with the same replicate padding as dwt2."""
    m = mask.astype(np.float64)
    if m.shape[0] % 2:
        m = np.concatenate([m, m[-1:, :]], axis=0)
    if m.shape[1] % 2:
        m = np.concatenate([m, m[:, -1:]], axis=1)
    pooled = 0.25 * (m[0::2, 0::2] + m[0::2, 1::2] + m[1::2, 0::2] + m[1::2, 1::2])
    if pooled.shape != band_shape:
        raise InvalidArgumentError("mask does not match the wavelet band grid")
    return pooled


def _smooth_band(img: Image, sigma: float) -> Image:
    from .filters import gaussian_blur

    data = np.stack([gaussian_blur(img.data[c], sigma) for c in range(img.channels)])
    return Image(data.astype(np.float32), img.color_space)


def color_align_bands(
    warped: Image,
    main: Image,
    conf: Image,
    grid: tuple[int, int] = (8, 8),
    ridge: float = 1e-3,
    fit_smooth: float = 4.0,
) -> tuple[WaveletBands, ColorTransform]:
    """Wavelet-domain core of :func:`color_align`.

    The transform is fitted on smoothed copies of both low bands: an affine
    color relation is invariant under identical blurring, while content
    differences (defocus, residual misalignment) would otherwise shrink the
    fitted gains toward the blurrier side. Returns the output decomposition
    whose detail bands are (by construction) the same arrays as the
    input's, plus the fitted transform.
    """
    if warped.shape != main.shape:
        raise InvalidArgumentError("images must share dimensions")
    wb = dwt2(warped)
    mb = dwt2(main)
    conf_ll = _downsample_mask(conf.data[0], wb.ll.shape)
    if fit_smooth > 0:
        fit_src = _smooth_band(wb.ll, fit_smooth)
        fit_ref = _smooth_band(mb.ll, fit_smooth)
    else:
        fit_src, fit_ref = wb.ll, mb.ll
    t = fit_color_transform(fit_src, fit_ref, conf_ll, grid=grid, ridge=ridge)
    if t.warned:
        new_ll = wb.ll
    else:
        new_ll = apply_color_transform(t, wb.ll, value_range=(0.0, 2.0))
    out = WaveletBands(ll=new_ll, lh=wb.lh, hl=wb.hl, hh=wb.hh, parity=wb.parity)
    return out, t


def color_align(
    warped: Image,
    main: Image,
    conf: Image,
    grid: tuple[int, int] = (8, 8),
    ridge: float = 1e-3,
    fit_smooth: float = 4.0,
) -> Image:
    """Match ``warped`` to ``main`` photometrically on the low band only.

    With an all-zero confidence mask the input comes back unchanged.
    """
    bands, t = color_align_bands(warped, main, conf, grid=grid, ridge=ridge,
                                 fit_smooth=fit_smooth)
    if t.warned:
        return warped.copy()
    return idwt2(bands)


def transform_for_image_domain(t: ColorTransform) -> ColorTransform:
    """Rescale a low-band-fitted transform to act on [0, 1] image values.

    The orthonormal low band carries 2x the local image mean, so gains
    transfer unchanged and offsets halve.
    """
    nodes = t.nodes.copy()
    nodes[:, :, :, 3] *= 0.5
    return ColorTransform(t.grid_w, t.grid_h, nodes, t.ridge, t.warned)


# ---------------------------------------------------------------------------
# debug serialization
# ---------------------------------------------------------------------------

def save_transform(path: str | Path, t: ColorTransform) -> None:
    with open(path, "w") as f:
        f.write(f"{t.grid_w} {t.grid_h} {t.ridge!r} {int(t.warned)}\n")
        for ny in range(t.grid_h + 1):
            for nx in range(t.grid_w + 1):
                row = " ".join(repr(v) for v in t.nodes[ny, nx].ravel())
                f.write(row + "\n")


def load_transform(path: str | Path) -> ColorTransform:
    lines = Path(path).read_text().strip().splitlines()
    gw, gh, ridge, warned = lines[0].split()
    gw, gh = int(gw), int(gh)
    vals = [[float(v) for v in ln.split()] for ln in lines[1:]]
    nodes = np.asarray(vals, dtype=np.float64).reshape(gh + 1, gw + 1, 3, 4)
    return ColorTransform(gw, gh, nodes, float(ridge), bool(int(warned)))
