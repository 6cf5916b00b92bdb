"""End-to-end orchestration: spatial alignment, color alignment, and
occlusion-aware synthesis, plus ground-truth synthesis for dataset scenes.

Alignment fields are estimated at 1/scale resolution and upsampled; all
warping, color application, and fusion run at full resolution.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .color import (apply_color_transform, color_align_bands,
                    transform_for_image_domain)
from .config import PipelineConfig
from .errors import EstimationFailedError
from .filters import gaussian_blur
from .flow import consistency_map, estimate_flow, warp_by_flow
from .fusion import (FusionMaskTriple, compute_fusion_masks, focus_measure,
                     fuse_aif, fuse_multifocus, refine_occluded)
from .image import Image
from .registration import (Homography, compute_descriptors, detect_keypoints,
                           estimate_homography_ransac,
                           inverse_homography_sampler, match_descriptors,
                           warp_homography)
from .resample import resize_bilinear, resize_plane, warp_bilinear
from .wavelet import idwt2

log = logging.getLogger("aifpipe")


@dataclass
class FuseResult:
    aif: Image
    homography: Homography
    masks: FusionMaskTriple
    intermediates: dict[str, Image] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    correspondences: np.ndarray | None = None
    inlier_mask: np.ndarray | None = None


def _scaled_size(w: int, h: int, scale: int) -> tuple[int, int]:
    return max(32, round(w / scale)), max(32, round(h / scale))


def _clamped_levels(levels: int, w: int, h: int) -> int:
    max_levels = max(1, int(np.floor(np.log2(min(w, h)))))
    return min(levels, max_levels)


def register_pair(main: Image, wide: Image, cfg: PipelineConfig):
    """Keypoint registration of ``wide`` onto ``main``'s frame."""
    kp_m = detect_keypoints(main, cfg.max_count)
    kp_w = detect_keypoints(wide, cfg.max_count)
    kp_m, desc_m = compute_descriptors(main, kp_m)
    kp_w, desc_w = compute_descriptors(wide, kp_w)
    pairs_idx = match_descriptors(desc_w, desc_m, cfg.ratio)
    if len(pairs_idx) < 4:
        raise EstimationFailedError(
            f"only {len(pairs_idx)} descriptor matches; need >= 4"
        )
    corr = np.array(
        [[kp_w[i].x, kp_w[i].y, kp_m[j].x, kp_m[j].y] for i, j in pairs_idx]
    )
    h, inliers = estimate_homography_ransac(
        corr, iters=cfg.ransac_iters, inlier_px=cfg.inlier_px, seed=cfg.seed
    )
    log.info("registration: %d matches, %d inliers", len(pairs_idx), int(inliers.sum()))
    return h, corr, inliers


def estimate_alignment_flows(main: Image, wide_r: Image, cfg: PipelineConfig):
    """Both flow directions plus the confidence of their cycle.

    Fields are estimated at 1/scale resolution and upsampled; the forward
    field then gets a bounded full-resolution refinement pass so subpixel
    errors are not multiplied by the scale factor. The consistency test
    runs at the estimation resolution (where the residuals live) and the
    binary map is upsampled alongside the fields.
    """
    w, h = main.width, main.height
    wide_in = wide_r
    if cfg.flow_preblur > 0:
        wide_in = Image(np.stack([
            gaussian_blur(wide_r.data[c], cfg.flow_preblur)
            for c in range(wide_r.channels)
        ]).astype(np.float32), wide_r.color_space)
    sw, sh = _scaled_size(w, h, cfg.scale)
    levels = _clamped_levels(cfg.flow_levels, sw, sh)
    main_s = resize_bilinear(main, sw, sh)
    wide_s = resize_bilinear(wide_in, sw, sh)
    f_m2w = estimate_flow(main_s, wide_s, levels, cfg.flow_window, cfg.flow_iters)
    f_w2m = estimate_flow(wide_s, main_s, levels, cfg.flow_window, cfg.flow_iters)
    conf_s = consistency_map(fwd=f_w2m, bwd=f_m2w, tau=cfg.tau)
    conf = Image(
        (resize_plane(conf_s.data[0], w, h) >= 0.5).astype(np.float32)[None]
    )
    refine_iters = max(cfg.flow_iters // 3, 5)
    f_full = estimate_flow(main, wide_in, 1, cfg.flow_window, refine_iters,
                           init=f_m2w.resized(w, h))
    return f_full, f_w2m.resized(w, h), conf


def fuse_pair(main: Image, wide: Image, cfg: PipelineConfig) -> FuseResult:
    """Synthesize the all-in-focus image for one main/ultra-wide pair."""
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    h, corr, inliers = register_pair(main, wide, cfg)
    wide_r, valid_h = warp_homography(wide, h, main.width, main.height)
    timings["registration"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    f_m2w, f_w2m, conf = estimate_alignment_flows(main, wide_r, cfg)
    # compose flow and homography into one sampling of the original wide
    # frame: a single bilinear pass keeps fine texture sharper than
    # resampling the already-warped wide_r
    h_sampler = inverse_homography_sampler(h)
    u = f_m2w.u.astype(np.float64)
    v = f_m2w.v.astype(np.float64)

    def composed(xs, ys):
        return h_sampler(xs + u, ys + v)

    wide_f, validity = warp_bilinear(wide, composed)
    conf_eff = Image((conf.data[0] * validity.data[0])[None])
    timings["flow"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    bands, transform = color_align_bands(
        wide_f, main, conf_eff,
        grid=(cfg.color_grid, cfg.color_grid), ridge=cfg.color_ridge,
    )
    wide_c = wide_f.copy() if transform.warned else idwt2(bands)
    # the refinement source gets the same per-pair color map so occlusion
    # patches blend photometrically with the main frame
    if transform.warned:
        wide_r_c = wide_r
    else:
        wide_r_c = apply_color_transform(
            transform_for_image_domain(transform), wide_r
        )
    timings["color"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    f_main = focus_measure(main, cfg.focus_radius)
    f_wide = focus_measure(wide_c, cfg.focus_radius)
    masks = compute_fusion_masks(
        f_main, f_wide, conf_eff, validity,
        margin=cfg.margin, guide=main,
        guided_radius=cfg.guided_radius, guided_eps=cfg.guided_eps,
    )
    refined = refine_occluded(main, wide_r_c, masks,
                              patch=cfg.patch, search=cfg.search)
    aif = fuse_aif(main, refined, wide_c, masks)
    aif = Image(np.clip(aif.data, 0.0, 1.0), main.color_space)
    timings["fusion"] = time.perf_counter() - t0
    timings["total"] = sum(timings.values())

    intermediates = {
        "warped_h": wide_r,
        "warped_flow": wide_f,
        "conf": conf_eff,
        "color_aligned": wide_c,
        "refined": refined,
        "masks/m_main": Image(masks.m_main[None]),
        "masks/m_refined": Image(masks.m_refined[None]),
        "masks/m_wide": Image(masks.m_wide[None]),
    }
    return FuseResult(
        aif=aif,
        homography=h,
        masks=masks,
        intermediates=intermediates,
        timings=timings,
        correspondences=corr,
        inlier_mask=inliers,
    )


def synth_gt_pair(fg: Image, bg: Image, cfg: PipelineConfig):
    """Flow-align the background-focused frame to the foreground-focused one
    (focus breathing), then fuse. Returns (fused, mask, timings)."""
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    w, h = fg.width, fg.height
    sw, sh = _scaled_size(w, h, cfg.scale)
    levels = _clamped_levels(cfg.flow_levels, sw, sh)
    fg_s = resize_bilinear(fg, sw, sh)
    bg_s = resize_bilinear(bg, sw, sh)
    flow_s = estimate_flow(fg_s, bg_s, levels, cfg.flow_window, cfg.flow_iters)
    flow = flow_s.resized(w, h)
    bg_aligned, valid = warp_by_flow(bg, flow)
    # uncovered border pixels fall back to the reference frame
    mask = valid.data[0] >= 0.5
    data = np.where(mask[None], bg_aligned.data, fg.data)
    bg_aligned = Image(data, fg.color_space)
    timings["flow"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    gt, m_fuse = fuse_multifocus(
        fg, bg_aligned,
        radius=cfg.focus_radius,
        guided_radius=cfg.guided_radius,
        guided_eps=cfg.guided_eps,
    )
    timings["fusion"] = time.perf_counter() - t0
    timings["total"] = sum(timings.values())
    return gt, m_fuse, timings
