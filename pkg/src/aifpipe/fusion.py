"""Occlusion-aware synthesis: focus evidence, the three fusion masks,
occluded-region refinement, final blending, and multi-focus ground truth.

The three masks always form a convex partition (sum 1 per pixel). The
refined image is defined everywhere: pixels outside the refined region, or
with no usable search candidate, fall back to the main image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidArgumentError
from .filters import guided_filter
from .image import Image
from .wavelet import dwt2

_MASK_SUM_TOL = 1e-4


@dataclass
class FusionMaskTriple:
    m_main: np.ndarray
    m_refined: np.ndarray
    m_wide: np.ndarray

    def __post_init__(self):
        shapes = {self.m_main.shape, self.m_refined.shape, self.m_wide.shape}
        if len(shapes) != 1:
            raise InvalidArgumentError("mask planes must share dimensions")
        self.m_main = np.ascontiguousarray(self.m_main, dtype=np.float32)
        self.m_refined = np.ascontiguousarray(self.m_refined, dtype=np.float32)
        self.m_wide = np.ascontiguousarray(self.m_wide, dtype=np.float32)

    @property
    def shape(self) -> tuple[int, int]:
        return self.m_main.shape

    def partition_error(self) -> float:
        total = (self.m_main.astype(np.float64)
                 + self.m_refined.astype(np.float64)
                 + self.m_wide.astype(np.float64))
        return float(np.abs(total - 1.0).max())


def focus_measure(img: Image, radius: int = 4) -> np.ndarray:
    """Local sharpness: windowed sum of squared Haar detail energy.

    Detail bands are computed at half resolution, squared, replicated back
    to the source grid, and box-summed over (2*radius+1)^2 windows. Zero for
    constant images, non-negative everywhere.
    """
    if radius < 1:
        raise InvalidArgumentError("radius must be >= 1")
    bands = dwt2(img.to_gray())
    energy = (bands.lh.data[0].astype(np.float64) ** 2
              + bands.hl.data[0].astype(np.float64) ** 2
              + bands.hh.data[0].astype(np.float64) ** 2)
    up = np.repeat(np.repeat(energy, 2, axis=0), 2, axis=1)
    up = up[:img.height, :img.width]
    return kernels.box_sum(up, radius)


def compute_fusion_masks(
    f_main: np.ndarray,
    f_wide: np.ndarray,
    conf: Image,
    validity: Image,
    margin: float = 0.15,
    guide: Image | None = None,
    guided_radius: int = 8,
    guided_eps: float = 1e-3,
) -> FusionMaskTriple:
    """Route each pixel to main / wide / refined, then soften and renormalize.

    Main wins where its focus score beats the wide score by ``margin``;
    otherwise the wide image is used where the flow is confident and the
    pixel was covered, and the refined image everywhere else. When ``guide``
    (normally the main image) is given, the hard choice is smoothed by
    guided filtering before renormalization.
    """
    if not (f_main.shape == f_wide.shape == conf.shape == validity.shape):
        raise InvalidArgumentError("focus, confidence, and validity grids must match")
    f_main = np.asarray(f_main, dtype=np.float64)
    f_wide = np.asarray(f_wide, dtype=np.float64)
    take_main = f_main >= f_wide * (1.0 + margin)
    usable_wide = (conf.data[0] >= 0.5) & (validity.data[0] >= 0.5)
    take_wide = ~take_main & usable_wide
    take_refined = ~take_main & ~usable_wide

    hard = [take_main.astype(np.float64),
            take_refined.astype(np.float64),
            take_wide.astype(np.float64)]
    if guide is not None:
        g = guide.luma().astype(np.float64)
        hard = [np.clip(guided_filter(g, m, guided_radius, guided_eps), 0.0, 1.0)
                for m in hard]
    total = hard[0] + hard[1] + hard[2]
    fallback = total < 1e-6
    hard[0] = np.where(fallback, 1.0, hard[0])
    total = np.where(fallback, 1.0, total)
    return FusionMaskTriple(
        m_main=(hard[0] / total).astype(np.float32),
        m_refined=(hard[1] / total).astype(np.float32),
        m_wide=(hard[2] / total).astype(np.float32),
    )


def search_patch_offsets(
    main: Image,
    wide_r: Image,
    region: np.ndarray,
    patch: int = 7,
    search: int = 16,
    stride: int | None = None,
):
    """Low-band SSD search used by :func:`refine_occluded`.

    Anchors stride over ``region`` on the half-resolution grid; matching
    windows are ``patch`` x ``patch`` low-band pixels, offsets cover
    +-``search`` full-resolution pixels. Returns (ys, xs, dy, dx, cost) with
    everything except cost in full-resolution pixels.
    """
    main_ll = dwt2(main.to_gray()).ll.data[0]
    wide_ll = dwt2(wide_r.to_gray()).ll.data[0]

    reg = np.asarray(region, dtype=bool)
    if reg.shape != main.shape:
        raise InvalidArgumentError("region must match the image grid")
    # half-res region: any covered full-res pixel marks the cell
    pad_y = (-reg.shape[0]) % 2
    pad_x = (-reg.shape[1]) % 2
    reg_p = np.pad(reg, ((0, pad_y), (0, pad_x)))
    reg_half = (reg_p[0::2, 0::2] | reg_p[0::2, 1::2]
                | reg_p[1::2, 0::2] | reg_p[1::2, 1::2])

    p_r = max(1, patch // 2)
    s_r = max(1, (search + 1) // 2)
    if stride is None:
        stride = max(1, p_r)
    ys, xs = np.nonzero(reg_half)
    keep = (ys % stride == 0) & (xs % stride == 0)
    ys, xs = ys[keep], xs[keep]
    if ys.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty, empty, np.zeros(0)
    dy, dx, cost = kernels.patch_search_ssd(main_ll, wide_ll, ys, xs, p_r, s_r)
    return ys * 2, xs * 2, dy * 2, dx * 2, cost


def _hann2d(side: int) -> np.ndarray:
    t = (np.arange(side) + 0.5) / side
    w1 = 0.5 - 0.5 * np.cos(2.0 * np.pi * t)
    return np.outer(w1, w1)


def refine_occluded(
    main: Image,
    wide_r: Image,
    masks: FusionMaskTriple,
    patch: int = 7,
    search: int = 16,
) -> Image:
    """Rebuild the refined-mask region by patch copy from ``wide_r``.

    Each anchor's best offset is found on the low band; the corresponding
    full-resolution block of ``wide_r`` is pasted with a raised-cosine
    window, overlaps averaged. Everywhere else (and wherever no candidate
    existed) the main image passes through.
    """
    if main.shape != wide_r.shape:
        raise InvalidArgumentError("main and wide_r must share dimensions")
    if masks.shape != main.shape:
        raise InvalidArgumentError("masks must match the image grid")
    region = masks.m_refined > 0.5
    if not region.any():
        return main.copy()

    ys, xs, dys, dxs, costs = search_patch_offsets(
        main, wide_r, region, patch=patch, search=search
    )
    h, w = main.shape
    p_r = max(1, patch // 2)
    side = 2 * (2 * p_r + 1)
    win = _hann2d(side)
    half = side // 2

    acc = np.zeros((main.channels, h, w), dtype=np.float64)
    wsum = np.zeros((h, w), dtype=np.float64)
    wide = wide_r.data.astype(np.float64)
    for ay, ax, dy, dx, cost in zip(ys, xs, dys, dxs, costs):
        if not np.isfinite(cost):
            continue
        y0 = ay - half + 1
        x0 = ax - half + 1
        ty0, ty1 = max(0, y0), min(h, y0 + side)
        tx0, tx1 = max(0, x0), min(w, x0 + side)
        sy0, sy1 = ty0 + dy, ty1 + dy
        sx0, sx1 = tx0 + dx, tx1 + dx
        if sy0 < 0 or sx0 < 0 or sy1 > h or sx1 > w or ty1 <= ty0 or tx1 <= tx0:
            continue
        ww = win[ty0 - y0:ty1 - y0, tx0 - x0:tx1 - x0]
        acc[:, ty0:ty1, tx0:tx1] += ww * wide[:, sy0:sy1, sx0:sx1]
        wsum[ty0:ty1, tx0:tx1] += ww

    out = main.data.astype(np.float64).copy()
    covered = (wsum > 1e-8) & region
    for c in range(main.channels):
        out[c][covered] = acc[c][covered] / wsum[covered]
    return Image(out.astype(np.float32), main.color_space)


def fuse_aif(
    main: Image,
    refined: Image,
    wide_c: Image,
    masks: FusionMaskTriple,
) -> Image:
    """Per-pixel convex combination of the three candidates."""
    if not (main.shape == refined.shape == wide_c.shape == masks.shape):
        raise InvalidArgumentError("fusion inputs must share dimensions")
    if masks.partition_error() > _MASK_SUM_TOL:
        raise InvalidArgumentError(
            f"fusion masks do not sum to 1 (max error {masks.partition_error():.2e})"
        )
    out = (main.data.astype(np.float64) * masks.m_main
           + refined.data.astype(np.float64) * masks.m_refined
           + wide_c.data.astype(np.float64) * masks.m_wide)
    return Image(out.astype(np.float32), main.color_space)


def fuse_multifocus(
    fg: Image,
    bg: Image,
    radius: int = 4,
    guided_radius: int = 8,
    guided_eps: float = 1e-3,
) -> tuple[Image, Image]:
    """Fuse a foreground-focused / background-focused pair.

    The binary fusion mask takes the foreground frame wherever its focus
    score wins (ties included), smoothed by guided filtering and re-binarized
    at 0.5. Returns (fused, mask). Inputs must already be aligned.
    """
    if fg.shape != bg.shape or fg.channels != bg.channels:
        raise InvalidArgumentError("focus pair must share dimensions")
    f_fg = focus_measure(fg, radius)
    f_bg = focus_measure(bg, radius)
    m = (f_fg >= f_bg).astype(np.float64)
    m = guided_filter(fg.luma().astype(np.float64), m, guided_radius, guided_eps)
    m_bin = (m >= 0.5).astype(np.float32)
    gt = m_bin * fg.data + (1.0 - m_bin) * bg.data
    return Image(gt, fg.color_space), Image(m_bin[None])
