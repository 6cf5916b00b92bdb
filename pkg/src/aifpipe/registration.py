"""Image-level alignment of the ultra-wide frame to the main frame.

Four stages: multi-scale difference-of-Gaussians keypoints, 128-D
gradient-histogram descriptors, ratio-tested mutual-nearest matching, and
RANSAC homography with Hartley-normalized DLT. Everything is deterministic
given the RANSAC seed.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EstimationFailedError, InvalidArgumentError
from .filters import gaussian_blur
from .image import Image
from .resample import resize_plane, warp_bilinear

log = logging.getLogger("aifpipe")

# Detector constants; the descriptor sampling below is tied to these.
_BASE_SIGMA = 1.6
_ASSUMED_INPUT_SIGMA = 0.5
_CONTRAST_THRESH = 0.01
_EDGE_RATIO = 10.0
_BUCKET_CELL = 64


@dataclass
class Keypoint:
    x: float
    y: float
    scale: float  # sigma in full-resolution pixels
    orientation: float  # radians
    score: float


@dataclass
class Homography:
    """3x3 projective matrix with m[2,2] normalized to 1."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise InvalidArgumentError("homography must be a finite 3x3 matrix")
        if abs(m[2, 2]) < 1e-12:
            raise InvalidArgumentError("homography has zero scale entry")
        m = m / m[2, 2]
        if abs(np.linalg.det(m[:2, :2])) < 1e-12:
            raise InvalidArgumentError("degenerate homography (2x2 block singular)")
        self.m = m

    def apply(self, pts: np.ndarray) -> np.ndarray:
        """Map (n, 2) points through the homography."""
        pts = np.asarray(pts, dtype=np.float64)
        ones = np.ones((pts.shape[0], 1))
        ph = np.hstack([pts, ones]) @ self.m.T
        return ph[:, :2] / ph[:, 2:3]

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.m))

    @staticmethod
    def identity() -> "Homography":
        return Homography(np.eye(3))


# ---------------------------------------------------------------------------
# Keypoint detection
# ---------------------------------------------------------------------------

def _build_octave(gray: np.ndarray, scales: int) -> tuple[list[np.ndarray], list[float]]:
    k = 2.0 ** (1.0 / scales)
    sigmas = [_BASE_SIGMA * k**i for i in range(scales + 3)]
    imgs = [gray]
    for i in range(1, scales + 3):
        delta = np.sqrt(max(sigmas[i] ** 2 - sigmas[i - 1] ** 2, 1e-8))
        imgs.append(gaussian_blur(imgs[-1], delta))
    return imgs, sigmas


def _local_extrema(d0, d1, d2, thresh):
    """Strict 26-neighborhood extrema of d1's interior."""
    center = d1[1:-1, 1:-1]
    strong = np.abs(center) > thresh
    is_max = strong.copy()
    is_min = strong.copy()
    for arr in (d0, d1, d2):
        for dy in (0, 1, 2):
            for dx in (0, 1, 2):
                if arr is d1 and dy == 1 and dx == 1:
                    continue
                nb = arr[dy:dy + center.shape[0], dx:dx + center.shape[1]]
                is_max &= center > nb
                is_min &= center < nb
    ys, xs = np.nonzero(is_max | is_min)
    return ys + 1, xs + 1


def _refine_point(dogs, s, y, x):
    """3-D quadratic subpixel refinement; returns None when rejected."""
    h, w = dogs[0].shape
    for _ in range(5):
        d = dogs[s]
        dx = (d[y, x + 1] - d[y, x - 1]) * 0.5
        dy = (d[y + 1, x] - d[y - 1, x]) * 0.5
        ds = (dogs[s + 1][y, x] - dogs[s - 1][y, x]) * 0.5
        dxx = d[y, x + 1] + d[y, x - 1] - 2 * d[y, x]
        dyy = d[y + 1, x] + d[y - 1, x] - 2 * d[y, x]
        dss = dogs[s + 1][y, x] + dogs[s - 1][y, x] - 2 * d[y, x]
        dxy = (d[y + 1, x + 1] - d[y + 1, x - 1] - d[y - 1, x + 1] + d[y - 1, x - 1]) * 0.25
        dxs = (dogs[s + 1][y, x + 1] - dogs[s + 1][y, x - 1]
               - dogs[s - 1][y, x + 1] + dogs[s - 1][y, x - 1]) * 0.25
        dys = (dogs[s + 1][y + 1, x] - dogs[s + 1][y - 1, x]
               - dogs[s - 1][y + 1, x] + dogs[s - 1][y - 1, x]) * 0.25
        hess = np.array([[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]])
        grad = np.array([dx, dy, ds])
        try:
            off = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            return None
        if np.all(np.abs(off[:2]) < 0.5) and abs(off[2]) < 0.5:
            val = d[y, x] + 0.5 * grad @ off
            if abs(val) < _CONTRAST_THRESH:
                return None
            # reject ridge-like responses
            tr = dxx + dyy
            det = dxx * dyy - dxy * dxy
            if det <= 0 or tr * tr * _EDGE_RATIO >= det * (_EDGE_RATIO + 1) ** 2:
                return None
            return x + off[0], y + off[1], s + off[2], abs(val)
        x = int(np.clip(x + round(off[0]), 1, w - 2))
        y = int(np.clip(y + round(off[1]), 1, h - 2))
        s = int(np.clip(s + round(off[2]), 1, len(dogs) - 2))
    return None


def _dominant_orientation(gx, gy, x, y, sigma):
    """Peak of the magnitude-weighted 36-bin gradient histogram."""
    h, w = gx.shape
    radius = max(2, int(round(3.0 * sigma)))
    x0, x1 = max(0, int(x) - radius), min(w, int(x) + radius + 1)
    y0, y1 = max(0, int(y) - radius), min(h, int(y) + radius + 1)
    px = gx[y0:y1, x0:x1]
    py = gy[y0:y1, x0:x1]
    yy, xx = np.mgrid[y0:y1, x0:x1]
    wgt = np.exp(-((xx - x) ** 2 + (yy - y) ** 2) / (2.0 * sigma**2))
    mag = np.hypot(px, py) * wgt
    ang = np.arctan2(py, px)
    bins = np.floor((ang + np.pi) / (2 * np.pi) * 36).astype(np.int64) % 36
    hist = np.bincount(bins.ravel(), weights=mag.ravel(), minlength=36)
    for _ in range(2):
        hist = (np.roll(hist, 1) + hist + np.roll(hist, -1)) / 3.0
    b = int(np.argmax(hist))
    left, mid, right = hist[(b - 1) % 36], hist[b], hist[(b + 1) % 36]
    denom = left - 2 * mid + right
    frac = 0.0 if abs(denom) < 1e-12 else 0.5 * (left - right) / denom
    return (b + 0.5 + frac) / 36.0 * 2 * np.pi - np.pi


def detect_keypoints(img: Image, max_count: int = 4000,
                     octaves: int = 4, scales: int = 3) -> list[Keypoint]:
    """Multi-scale DoG extrema with subpixel refinement.

    The strongest ``max_count`` survive, spatially bucketed so no 64x64 cell
    keeps more than 4x its fair share.
    """
    if min(img.height, img.width) < 32:
        raise InvalidArgumentError("image too small for keypoint detection (min dim 32)")
    gray = img.luma().astype(np.float64)
    base = gaussian_blur(
        gray, np.sqrt(max(_BASE_SIGMA**2 - _ASSUMED_INPUT_SIGMA**2, 1e-8))
    )
    candidates: list[Keypoint] = []
    octave_img = base
    for o in range(octaves):
        if min(octave_img.shape) < 16:
            break
        gauss, sigmas = _build_octave(octave_img, scales)
        dogs = [gauss[i + 1] - gauss[i] for i in range(len(gauss) - 1)]
        grads = {}
        for s in range(1, len(dogs) - 1):
            ys, xs = _local_extrema(dogs[s - 1], dogs[s], dogs[s + 1],
                                    0.5 * _CONTRAST_THRESH)
            for y, x in zip(ys, xs):
                ref = _refine_point(dogs, s, int(y), int(x))
                if ref is None:
                    continue
                rx, ry, rs, score = ref
                si = int(np.clip(round(rs), 1, len(gauss) - 2))
                if si not in grads:
                    gyo, gxo = np.gradient(gauss[si])
                    grads[si] = (gxo, gyo)
                gxo, gyo = grads[si]
                sigma_local = _BASE_SIGMA * 2.0 ** (rs / scales)
                ori = _dominant_orientation(gxo, gyo, rx, ry, 1.5 * sigma_local)
                step = 2.0**o
                candidates.append(Keypoint(
                    x=(rx + 0.5) * step - 0.5,
                    y=(ry + 0.5) * step - 0.5,
                    scale=sigma_local * step,
                    orientation=ori,
                    score=score,
                ))
        nh, nw = octave_img.shape[0] // 2, octave_img.shape[1] // 2
        if nh < 16 or nw < 16:
            break
        octave_img = resize_plane(gauss[scales], nw, nh)

    candidates = [
        k for k in candidates
        if 0 <= k.x <= img.width - 1 and 0 <= k.y <= img.height - 1
    ]
    candidates.sort(key=lambda k: (-k.score, k.y, k.x))
    cells_x = max(1, (img.width + _BUCKET_CELL - 1) // _BUCKET_CELL)
    cells_y = max(1, (img.height + _BUCKET_CELL - 1) // _BUCKET_CELL)
    fair = max(1, max_count // (cells_x * cells_y))
    cap = 4 * fair
    counts = np.zeros((cells_y, cells_x), dtype=np.int64)
    kept: list[Keypoint] = []
    for k in candidates:
        if len(kept) >= max_count:
            break
        cy, cx = int(k.y) // _BUCKET_CELL, int(k.x) // _BUCKET_CELL
        if counts[cy, cx] >= cap:
            continue
        counts[cy, cx] += 1
        kept.append(k)
    log.debug("detector: %d candidates -> %d kept", len(candidates), len(kept))
    return kept


# ---------------------------------------------------------------------------
# Descriptors
# ---------------------------------------------------------------------------

_DESC_GRID = 4       # 4x4 spatial cells
_DESC_BINS = 8       # orientation bins
_DESC_SAMPLES = 16   # 16x16 sample lattice
_DESC_CLIP = 0.2


def compute_descriptors(img: Image, kps: list[Keypoint]):
    """128-D gradient-histogram descriptors, L2-normalized.

    Keypoints whose support has no gradient energy are dropped; returns the
    kept keypoints and an (n, 128) float32 array.
    """
    if not kps:
        return [], np.zeros((0, _DESC_GRID * _DESC_GRID * _DESC_BINS), np.float32)
    gray = gaussian_blur(img.luma().astype(np.float64), 1.0)
    gy, gx = np.gradient(gray)
    h, w = gray.shape

    n = len(kps)
    cx = np.array([k.x for k in kps])
    cy = np.array([k.y for k in kps])
    ori = np.array([k.orientation for k in kps])
    spacing = np.maximum(0.5 * np.array([k.scale for k in kps]), 0.6)

    # rotated 16x16 sampling lattice around each keypoint
    lin = (np.arange(_DESC_SAMPLES) - (_DESC_SAMPLES - 1) / 2.0)
    uu, vv = np.meshgrid(lin, lin)  # (16,16) in keypoint frame
    cos_o, sin_o = np.cos(ori), np.sin(ori)
    sx = (cx[:, None, None]
          + spacing[:, None, None] * (cos_o[:, None, None] * uu - sin_o[:, None, None] * vv))
    sy = (cy[:, None, None]
          + spacing[:, None, None] * (sin_o[:, None, None] * uu + cos_o[:, None, None] * vv))

    ix = np.clip(sx, 0, w - 1)
    iy = np.clip(sy, 0, h - 1)
    x0 = np.floor(ix).astype(np.int64)
    y0 = np.floor(iy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = ix - x0
    fy = iy - y0

    def gather(plane):
        top = plane[y0, x0] * (1 - fx) + plane[y0, x1] * fx
        bot = plane[y1, x0] * (1 - fx) + plane[y1, x1] * fx
        return top * (1 - fy) + bot * fy

    gxs = gather(gx)
    gys = gather(gy)
    inside = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)

    # rotate gradients into the keypoint frame
    rgx = cos_o[:, None, None] * gxs + sin_o[:, None, None] * gys
    rgy = -sin_o[:, None, None] * gxs + cos_o[:, None, None] * gys
    mag = np.hypot(rgx, rgy)
    win_sigma = _DESC_SAMPLES / 2.0
    mag = mag * np.exp(-(uu**2 + vv**2) / (2 * win_sigma**2)) * inside
    ang = np.arctan2(rgy, rgx)

    # soft-assign: bilinear over cells, linear over orientation bins
    cell_pos_x = (uu + _DESC_SAMPLES / 2.0) / (_DESC_SAMPLES / _DESC_GRID) - 0.5
    cell_pos_y = (vv + _DESC_SAMPLES / 2.0) / (_DESC_SAMPLES / _DESC_GRID) - 0.5
    obin = (ang + np.pi) / (2 * np.pi) * _DESC_BINS

    desc = np.zeros((n, _DESC_GRID, _DESC_GRID, _DESC_BINS), dtype=np.float64)
    kidx = np.broadcast_to(np.arange(n)[:, None, None], sx.shape)
    cpx = np.broadcast_to(cell_pos_x, sx.shape)
    cpy = np.broadcast_to(cell_pos_y, sx.shape)
    for dcy in (0, 1):
        ycell = np.floor(cpy).astype(np.int64) + dcy
        wy = np.where(dcy == 0, 1 - (cpy - np.floor(cpy)), cpy - np.floor(cpy))
        oky = (ycell >= 0) & (ycell < _DESC_GRID)
        for dcx in (0, 1):
            xcell = np.floor(cpx).astype(np.int64) + dcx
            wx = np.where(dcx == 0, 1 - (cpx - np.floor(cpx)), cpx - np.floor(cpx))
            okx = (xcell >= 0) & (xcell < _DESC_GRID)
            for dob in (0, 1):
                ob = (np.floor(obin).astype(np.int64) + dob) % _DESC_BINS
                wo = np.where(dob == 0, 1 - (obin - np.floor(obin)), obin - np.floor(obin))
                wgt = mag * wy * wx * wo
                ok = oky & okx
                np.add.at(
                    desc,
                    (kidx[ok], ycell[ok], xcell[ok], ob[ok]),
                    wgt[ok],
                )

    flat = desc.reshape(n, -1)
    norms = np.linalg.norm(flat, axis=1)
    keep = norms > 1e-9
    flat = flat[keep] / norms[keep, None]
    flat = np.minimum(flat, _DESC_CLIP)
    flat /= np.linalg.norm(flat, axis=1, keepdims=True)
    kept_kps = [k for k, ok in zip(kps, keep) if ok]
    return kept_kps, flat.astype(np.float32)


# ---------------------------------------------------------------------------
# Matching
# ---------------------------------------------------------------------------

def match_descriptors(a: np.ndarray, b: np.ndarray, ratio: float = 0.8):
    """Mutual nearest neighbors passing the ratio test on both sides."""
    if not 0.0 < ratio <= 1.0:
        raise InvalidArgumentError(f"ratio must be in (0, 1], got {ratio}")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return []
    d2 = np.maximum(
        (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * (a @ b.T), 0.0
    )

    def nn12(dist):
        order = np.argsort(dist, axis=1, kind="stable")
        nn = order[:, 0]
        d1 = dist[np.arange(dist.shape[0]), nn]
        if dist.shape[1] > 1:
            d2nd = dist[np.arange(dist.shape[0]), order[:, 1]]
        else:
            d2nd = np.full(dist.shape[0], np.inf)
        return nn, np.sqrt(d1), np.sqrt(d2nd)

    nn_ab, d1_ab, d2_ab = nn12(d2)
    nn_ba, d1_ba, d2_ba = nn12(d2.T)

    pairs = []
    for i in range(a.shape[0]):
        j = nn_ab[i]
        if nn_ba[j] != i:
            continue
        if d1_ab[i] >= ratio * d2_ab[i]:
            continue
        if d1_ba[j] >= ratio * d2_ba[j]:
            continue
        pairs.append((i, int(j)))
    return pairs


# ---------------------------------------------------------------------------
# RANSAC homography
# ---------------------------------------------------------------------------

@dataclass
class RansacResult:
    homography: Homography
    inlier_mask: np.ndarray
    best_sample_inliers: int
    iterations: int


def _normalize_points(pts):
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    mean_dist = np.mean(np.linalg.norm(centered, axis=1))
    scale = np.sqrt(2.0) / max(mean_dist, 1e-12)
    t = np.array([
        [scale, 0.0, -scale * centroid[0]],
        [0.0, scale, -scale * centroid[1]],
        [0.0, 0.0, 1.0],
    ])
    return centered * scale, t


def _dlt(src, dst):
    """Direct linear transform with Hartley normalization; None if degenerate."""
    ns, ts = _normalize_points(src)
    nd, td = _normalize_points(dst)
    n = src.shape[0]
    a = np.zeros((2 * n, 9))
    a[0::2, 0:2] = -ns
    a[0::2, 2] = -1.0
    a[0::2, 6:8] = ns * nd[:, 0:1]
    a[0::2, 8] = nd[:, 0]
    a[1::2, 3:5] = -ns
    a[1::2, 5] = -1.0
    a[1::2, 6:8] = ns * nd[:, 1:2]
    a[1::2, 8] = nd[:, 1]
    try:
        _, _, vt = np.linalg.svd(a)
    except np.linalg.LinAlgError:
        return None
    h = vt[-1].reshape(3, 3)
    h = np.linalg.inv(td) @ h @ ts
    if abs(h[2, 2]) < 1e-12 or not np.all(np.isfinite(h)):
        return None
    return h / h[2, 2]


def _any_collinear(pts, tol=1e-6):
    for i in range(4):
        rest = np.delete(pts, i, axis=0)
        v1 = rest[1] - rest[0]
        v2 = rest[2] - rest[0]
        area = abs(v1[0] * v2[1] - v1[1] * v2[0])
        span = np.linalg.norm(v1) * np.linalg.norm(v2)
        if area <= tol * max(span, 1.0):
            return True
    return False


def _symmetric_errors(h, src, dst):
    fwd = Homography(h).apply(src)
    bwd = Homography(np.linalg.inv(h)).apply(dst)
    e_fwd = np.linalg.norm(fwd - dst, axis=1)
    e_bwd = np.linalg.norm(bwd - src, axis=1)
    return np.maximum(e_fwd, e_bwd)


def estimate_homography_ransac(
    pairs,
    iters: int = 2000,
    inlier_px: float = 3.0,
    seed: int = 0,
    details: bool = False,
):
    """Best 4-point DLT model by inlier count, refit on all inliers.

    ``pairs`` is (n, 4) rows of (x_src, y_src, x_dst, y_dst). Symmetric
    transfer error <= ``inlier_px`` defines inliers. Deterministic per seed;
    iterates at most ``iters`` times with standard adaptive early stopping.
    """
    arr = np.asarray(pairs, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 4 or arr.shape[0] < 4:
        raise EstimationFailedError(
            f"need >= 4 correspondences of (x1,y1,x2,y2), got shape {arr.shape}"
        )
    if inlier_px <= 0:
        raise InvalidArgumentError("inlier_px must be > 0")
    src, dst = arr[:, :2], arr[:, 2:]
    n = arr.shape[0]
    rng = np.random.default_rng(seed)

    best_mask = None
    best_count = 0
    best_h = None
    needed = iters
    it = 0
    while it < min(iters, needed):
        it += 1
        idx = rng.choice(n, size=4, replace=False)
        s4, d4 = src[idx], dst[idx]
        if _any_collinear(s4) or _any_collinear(d4):
            continue
        h = _dlt(s4, d4)
        if h is None:
            continue
        try:
            errs = _symmetric_errors(h, src, dst)
        except (InvalidArgumentError, np.linalg.LinAlgError):
            continue
        mask = errs <= inlier_px
        count = int(mask.sum())
        if count > best_count:
            best_count, best_mask, best_h = count, mask, h
            ratio = max(count / n, 1e-9)
            # 0.9999 confidence of having hit an all-inlier sample
            denom = np.log1p(-min(ratio**4, 1 - 1e-12))
            needed = int(np.ceil(np.log(1e-4) / denom)) if denom < 0 else iters
    if best_h is None or best_count < 4:
        raise EstimationFailedError(
            "RANSAC found no valid homography (degenerate or too few inliers)"
        )

    refit = _dlt(src[best_mask], dst[best_mask])
    h_final, mask_final = best_h, best_mask
    if refit is not None:
        try:
            errs = _symmetric_errors(refit, src, dst)
            mask = errs <= inlier_px
            if int(mask.sum()) >= best_count:
                h_final, mask_final = refit, mask
        except (InvalidArgumentError, np.linalg.LinAlgError):
            pass

    result = RansacResult(Homography(h_final), mask_final, best_count, it)
    if details:
        return result
    return result.homography, result.inlier_mask


def inverse_homography_sampler(h: Homography):
    """Sampler mapping target coordinates through h^-1 (for backward warps)."""
    try:
        hinv = np.linalg.inv(h.m)
    except np.linalg.LinAlgError as e:
        raise InvalidArgumentError("homography is not invertible") from e

    def sampler(xs, ys):
        denom = hinv[2, 0] * xs + hinv[2, 1] * ys + hinv[2, 2]
        safe = np.where(np.abs(denom) < 1e-12, 1.0, denom)
        sx = (hinv[0, 0] * xs + hinv[0, 1] * ys + hinv[0, 2]) / safe
        sy = (hinv[1, 0] * xs + hinv[1, 1] * ys + hinv[1, 2]) / safe
        bad = np.abs(denom) < 1e-12
        sx = np.where(bad, -1e9, sx)
        sy = np.where(bad, -1e9, sy)
        return sx, sy

    return sampler


def warp_homography(img: Image, h: Homography, target_w: int, target_h: int):
    """Backward-warp ``img`` into a ``target_w x target_h`` canvas.

    ``h`` maps source (img) coordinates into target coordinates; sampling
    runs through the shared bilinear warp, so uncovered pixels come back
    with validity 0.
    """
    sampler = inverse_homography_sampler(h)
    return warp_bilinear(img, sampler, out_shape=(target_h, target_w))


def dump_correspondences_csv(path: str | Path, pairs, inlier_mask) -> None:
    """Debug dump: one (x1,y1,x2,y2,inlier) row per correspondence."""
    arr = np.asarray(pairs, dtype=np.float64)
    mask = np.asarray(inlier_mask).astype(int)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["x1", "y1", "x2", "y2", "inlier"])
        for row, m in zip(arr, mask):
            writer.writerow([f"{row[0]:.4f}", f"{row[1]:.4f}",
                             f"{row[2]:.4f}", f"{row[3]:.4f}", m])
