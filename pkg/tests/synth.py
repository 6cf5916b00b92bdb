"""Synthetic scene generators shared across the test suite.

Views are cropped out of oversized textures so that warped counterparts
stay valid everywhere (no dead borders leaking into pyramids).
"""

from __future__ import annotations

import numpy as np

from aifpipe.filters import gaussian_blur
from aifpipe.image import Image
from aifpipe.registration import Homography
from aifpipe.resample import warp_bilinear


def multiscale_texture(shape, seed, octaves=(1.0, 2.0, 4.0, 8.0, 16.0)):
    """Random texture with equal energy per octave, normalized to [0, 1]."""
    rng = np.random.default_rng(seed)
    out = np.zeros(shape)
    for sigma in octaves:
        layer = gaussian_blur(rng.standard_normal(shape), sigma)
        out += layer / max(layer.std(), 1e-9)
    out -= out.min()
    out /= max(out.max(), 1e-9)
    return out.astype(np.float32)


def rgb_texture(shape, seed, octaves=(1.0, 2.0, 4.0, 8.0, 16.0)):
    planes = [multiscale_texture(shape, seed + k, octaves) for k in range(3)]
    base = multiscale_texture(shape, seed + 99, octaves)
    # correlate channels so luma carries most of the structure
    data = np.stack([0.6 * base + 0.4 * p for p in planes])
    return Image(np.clip(data, 0.0, 1.0).astype(np.float32))


def translated_pair(size, t, seed, pad=32):
    """(a, b) where b's content is a's displaced by ``t``; both fully valid.

    True flow from a into b is exactly ``t`` everywhere (b(p + t) = a(p)).
    """
    h, w = size
    tx, ty = t
    big = Image(multiscale_texture((h + 2 * pad, w + 2 * pad), seed)[None])
    a, _ = warp_bilinear(big, lambda xs, ys: (xs + pad, ys + pad), out_shape=(h, w))
    b, vb = warp_bilinear(
        big, lambda xs, ys: (xs + pad - tx, ys + pad - ty), out_shape=(h, w)
    )
    assert float(vb.data.min()) == 1.0, "pad too small for the displacement"
    return a, b


def rotated_pair(size, degrees, seed, pad=32):
    """(a, b, flow_x, flow_y): b is a's content rotated about the center."""
    h, w = size
    big = Image(multiscale_texture((h + 2 * pad, w + 2 * pad), seed)[None])
    a, _ = warp_bilinear(big, lambda xs, ys: (xs + pad, ys + pad), out_shape=(h, w))
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    th = np.deg2rad(degrees)
    ct, st = np.cos(th), np.sin(th)

    def sampler(xs, ys):
        # b(p) = a(R^-1 (p - c) + c), so features rotate by +th
        dx, dy = xs - cx, ys - cy
        return ct * dx + st * dy + cx + pad, -st * dx + ct * dy + cy + pad

    b, vb = warp_bilinear(big, sampler, out_shape=(h, w))
    assert float(vb.data.min()) == 1.0
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    fx = ct * (xs - cx) - st * (ys - cy) + cx - xs
    fy = st * (xs - cx) + ct * (ys - cy) + cy - ys
    return a, b, fx, fy


def random_homography(rng, size, max_shift=12.0, max_proj=1e-4,
                      scale_range=(0.92, 1.08), max_angle=0.05):
    """A well-conditioned random projective map for ``size`` = (h, w)."""
    h, w = size
    m = np.eye(3)
    ang = rng.uniform(-max_angle, max_angle)
    scale = rng.uniform(*scale_range)
    ct, st = np.cos(ang), np.sin(ang)
    m[0, 0], m[0, 1] = scale * ct, -scale * st
    m[1, 0], m[1, 1] = scale * st, scale * ct
    m[0, 2] = rng.uniform(-max_shift, max_shift)
    m[1, 2] = rng.uniform(-max_shift, max_shift)
    m[2, 0] = rng.uniform(-max_proj, max_proj)
    m[2, 1] = rng.uniform(-max_proj, max_proj)
    return Homography(m)


def correspondence_set(rng, size, n=100, outlier_frac=0.3, noise=0.3):
    """(pairs, h_true): noisy inliers plus uniform outliers."""
    h, w = size
    h_true = random_homography(rng, size)
    src = np.column_stack([rng.uniform(0, w - 1, n), rng.uniform(0, h - 1, n)])
    dst = h_true.apply(src)
    dst += rng.normal(0.0, noise, dst.shape)
    n_out = int(round(outlier_frac * n))
    idx = rng.choice(n, size=n_out, replace=False)
    dst[idx] = np.column_stack(
        [rng.uniform(0, w - 1, n_out), rng.uniform(0, h - 1, n_out)]
    )
    pairs = np.hstack([src, dst])
    return pairs, h_true


def occlusion_pair(size=(256, 256), seed=7, fg_shift=12, bg_shift=2,
                   square=96):
    """Two-layer scene: textured background moving ``bg_shift`` px and a
    foreground square moving ``fg_shift`` px, both horizontal.

    Returns (a, b, occluded, flow_ab, flow_ba): ``occluded`` marks
    background pixels of ``a`` that the square covers in ``b``; the flow
    fields are the analytic visible-surface motions (hidden pixels carry
    their surface's motion).
    """
    from aifpipe.flow import FlowField

    h, w = size
    pad = max(fg_shift, bg_shift) + 24
    bg_big = multiscale_texture((h + 2 * pad, w + 2 * pad), seed)
    fg_tex = multiscale_texture((square, square), seed + 1)

    y0 = h // 2 - square // 2
    x0 = w // 2 - square // 2

    def compose(bg_dx, fg_dx):
        img, _ = warp_bilinear(
            Image(bg_big[None]),
            lambda xs, ys: (xs + pad - bg_dx, ys + pad),
            out_shape=(h, w),
        )
        frame = img.data[0].copy()
        fx = x0 + fg_dx
        frame[y0:y0 + square, fx:fx + square] = 0.15 + 0.7 * fg_tex
        return frame

    a = compose(0, 0)
    b = compose(bg_shift, fg_shift)

    # background pixels of a that the square hides in b: following the
    # background motion lands inside the displaced square
    ys, xs = np.mgrid[0:h, 0:w]
    in_square_b = (
        (ys >= y0) & (ys < y0 + square)
        & (xs + bg_shift >= x0 + fg_shift) & (xs + bg_shift < x0 + fg_shift + square)
    )
    in_square_a = (ys >= y0) & (ys < y0 + square) & (xs >= x0) & (xs < x0 + square)
    occluded = in_square_b & ~in_square_a

    u_ab = np.where(in_square_a, float(fg_shift), float(bg_shift)).astype(np.float32)
    square_in_b = ((ys >= y0) & (ys < y0 + square)
                   & (xs >= x0 + fg_shift) & (xs < x0 + fg_shift + square))
    u_ba = np.where(square_in_b, -float(fg_shift), -float(bg_shift)).astype(np.float32)
    zero = np.zeros((h, w), dtype=np.float32)
    flow_ab = FlowField(u_ab, zero.copy())
    flow_ba = FlowField(u_ba, zero.copy())
    return Image(a[None]), Image(b[None]), occluded, flow_ab, flow_ba


def two_plane_focus_pair(size=(320, 320), seed=11, blur_sigma=3.0):
    """(fg_focused, bg_focused, sharp, left_is_fg): left half sharp in the
    first frame and blurred in the second, right half reversed."""
    h, w = size
    sharp = rgb_texture((h, w), seed)
    blurred = Image(np.stack([
        gaussian_blur(sharp.data[c], blur_sigma) for c in range(3)
    ]).astype(np.float32))
    left = np.zeros((h, w), dtype=bool)
    left[:, : w // 2] = True
    fg_focused = np.where(left[None], sharp.data, blurred.data)
    bg_focused = np.where(left[None], blurred.data, sharp.data)
    return (Image(fg_focused.astype(np.float32)),
            Image(bg_focused.astype(np.float32)),
            sharp, left)


def aif_scene(size=(384, 384), seed=23, blur_sigma=3.0, disparity=6,
              color_gain=0.85, color_offset=0.03, square=120,
              octaves=(0.75, 1.5, 3.0, 6.0, 12.0)):
    """Full synthetic capture for the end-to-end pipeline test.

    Returns a dict with the sharp ground truth, a main frame whose
    background is defocused, an 'ultra-wide' frame seen through a known
    homography with extra foreground disparity and a global color shift,
    and the true homography.
    """
    h, w = size
    pad = 48
    rng = np.random.default_rng(seed)
    bg_big = rgb_texture((h + 2 * pad, w + 2 * pad), seed, octaves=octaves)
    fg_tex = rgb_texture((square, square), seed + 5,
                         octaves=(0.75, 1.5, 3.0))
    y0 = h // 2 - square // 2
    x0 = w // 2 - square // 2
    fg_mask = np.zeros((h, w), dtype=bool)
    fg_mask[y0:y0 + square, x0:x0 + square] = True

    def bg_view(sampler):
        img, valid = warp_bilinear(bg_big, sampler, out_shape=(h, w))
        return img, valid

    # ground truth: sharp background + sharp foreground, main-camera frame
    gt_bg, _ = bg_view(lambda xs, ys: (xs + pad, ys + pad))
    gt = gt_bg.data.copy()
    gt[:, fg_mask] = fg_tex.data.reshape(3, -1)[:, :]
    gt_img = Image(gt)

    # main camera: foreground in focus, background defocused
    blurred_bg = np.stack([gaussian_blur(gt_bg.data[c], blur_sigma)
                           for c in range(3)])
    main = blurred_bg.copy()
    main[:, fg_mask] = fg_tex.data.reshape(3, -1)[:, :]
    main_img = Image(main.astype(np.float32))

    # ultra-wide: known homography + foreground disparity + color shift;
    # the wide view zooms out slightly so it covers the whole main frame
    h_true = random_homography(rng, (h, w), max_shift=6.0, max_proj=3e-5,
                               scale_range=(0.88, 0.96), max_angle=0.03)
    m_center = np.array([[1, 0, w / 2.0], [0, 1, h / 2.0], [0, 0, 1.0]])
    m_uncenter = np.array([[1, 0, -w / 2.0], [0, 1, -h / 2.0], [0, 0, 1.0]])
    h_true = Homography(m_center @ h_true.m @ m_uncenter)
    hinv = np.linalg.inv(h_true.m)

    def wide_sampler(xs, ys):
        denom = hinv[2, 0] * xs + hinv[2, 1] * ys + hinv[2, 2]
        sx = (hinv[0, 0] * xs + hinv[0, 1] * ys + hinv[0, 2]) / denom
        sy = (hinv[1, 0] * xs + hinv[1, 1] * ys + hinv[1, 2]) / denom
        return sx, sy

    # main-frame coordinates seen by each wide pixel
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    mx, my = wide_sampler(xs, ys)
    wide_bg, wide_valid = bg_view(lambda xg, yg: (mx + pad, my + pad))
    wide = wide_bg.data.copy()
    # foreground plane sits closer: extra disparity in the wide view
    fg_x = mx + disparity
    fg_inside = ((fg_x >= x0) & (fg_x < x0 + square - 1)
                 & (my >= y0) & (my < y0 + square - 1))
    fyi = np.clip(my - y0, 0, square - 1)
    fxi = np.clip(fg_x - x0, 0, square - 1)
    y0i = np.floor(fyi).astype(np.int64)
    x0i = np.floor(fxi).astype(np.int64)
    y1i = np.minimum(y0i + 1, square - 1)
    x1i = np.minimum(x0i + 1, square - 1)
    fy = fyi - y0i
    fx = fxi - x0i
    for c in range(3):
        plane = fg_tex.data[c].astype(np.float64)
        val = (plane[y0i, x0i] * (1 - fx) * (1 - fy)
               + plane[y0i, x1i] * fx * (1 - fy)
               + plane[y1i, x0i] * (1 - fx) * fy
               + plane[y1i, x1i] * fx * fy)
        wide[c] = np.where(fg_inside, val, wide[c])
    wide = np.clip(wide * color_gain + color_offset, 0.0, 1.0)
    wide_img = Image(wide.astype(np.float32))

    return {
        "gt": gt_img,
        "main": main_img,
        "wide": wide_img,
        "homography": h_true,
        "fg_mask": fg_mask,
        "wide_valid": wide_valid,
    }
