"""Dense pixel-level alignment and the forward-backward confidence map.

``estimate_flow(a, b)`` returns displacements stored on ``a``'s grid that
point into ``b``: warping ``b`` by the field reproduces ``a``. The solver is
a coarse-to-fine Gaussian pyramid with iterative windowed least squares per
level, warm-started from the upsampled coarser field.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import median_filter

from . import kernels
from .errors import InvalidArgumentError
from .filters import gaussian_blur
from .image import Image
from .resample import resize_plane, warp_bilinear

_DAMPING = 1e-4
_MIN_DET = 1e-12
_STEP_CAP = 2.0     # max per-iteration update in pixels
_FREEZE_TOL = 0.01  # updates below this freeze the pixel for the level
_EIG_REL = 0.05     # min-eigenvalue gate relative to mean gradient energy


@dataclass
class FlowField:
    """Per-pixel displacement in pixels; u is along x, v along y."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.ascontiguousarray(self.u, dtype=np.float32)
        self.v = np.ascontiguousarray(self.v, dtype=np.float32)
        if self.u.shape != self.v.shape or self.u.ndim != 2:
            raise InvalidArgumentError("flow planes must be two equal (h, w) arrays")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise InvalidArgumentError("flow contains non-finite values")

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape

    @staticmethod
    def zeros(height: int, width: int) -> "FlowField":
        return FlowField(np.zeros((height, width), np.float32),
                         np.zeros((height, width), np.float32))

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u.astype(np.float64), self.v.astype(np.float64))

    def resized(self, new_w: int, new_h: int) -> "FlowField":
        """Resample the field and rescale displacements accordingly."""
        sx = new_w / self.u.shape[1]
        sy = new_h / self.u.shape[0]
        u = resize_plane(self.u, new_w, new_h) * sx
        v = resize_plane(self.v, new_w, new_h) * sy
        return FlowField(u, v)


def _pyramid(gray: np.ndarray, levels: int) -> list[np.ndarray]:
    pyr = [gray]
    for _ in range(levels - 1):
        blurred = gaussian_blur(pyr[-1], 1.0)
        h, w = blurred.shape
        pyr.append(resize_plane(blurred.astype(np.float32), max(w // 2, 1), max(h // 2, 1))
                   .astype(np.float64))
    return pyr


def _local_normalize(plane: np.ndarray, radius: int) -> np.ndarray:
    """Zero-mean unit-variance within a window; defuses inter-camera gain
    and offset differences that break brightness constancy."""
    counts = kernels.box_sum(np.ones(plane.shape), radius)
    mean = kernels.box_sum(plane, radius) / counts
    centered = plane - mean
    var = kernels.box_sum(centered * centered, radius) / counts
    return centered / np.sqrt(var + 1e-6)


def estimate_flow(
    src: Image,
    dst: Image,
    levels: int = 5,
    window: int = 21,
    iters: int = 30,
    init: FlowField | None = None,
) -> FlowField:
    """Coarse-to-fine windowed least-squares flow from ``src`` into ``dst``.

    ``init``, when given, warm-starts the coarsest level (resized and
    rescaled automatically); used for cross-resolution refinement.
    """
    if src.shape != dst.shape:
        raise InvalidArgumentError(
            f"flow inputs must share dimensions, got {src.shape} vs {dst.shape}"
        )
    if min(src.shape) < 2**levels:
        raise InvalidArgumentError(
            f"min dimension {min(src.shape)} < 2^levels = {2**levels}"
        )
    a_pyr = _pyramid(src.luma().astype(np.float64), levels)
    b_pyr = _pyramid(dst.luma().astype(np.float64), levels)
    radius = max(1, window // 2)

    norm_radius = max(3, radius // 2)
    u = v = None
    for lvl in range(levels - 1, -1, -1):
        a = _local_normalize(a_pyr[lvl], norm_radius)
        b = _local_normalize(b_pyr[lvl], norm_radius)
        h, w = a.shape
        if u is None:
            if init is not None:
                coarse = init.resized(w, h)
                u = coarse.u.astype(np.float64)
                v = coarse.v.astype(np.float64)
            else:
                u = np.zeros((h, w))
                v = np.zeros((h, w))
        else:
            scale_x = w / u.shape[1]
            scale_y = h / u.shape[0]
            u = resize_plane(u.astype(np.float32), w, h).astype(np.float64) * scale_x
            v = resize_plane(v.astype(np.float32), w, h).astype(np.float64) * scale_y

        gy, gx = np.gradient(a)
        ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
        # windows whose structure tensor is weak relative to the level's
        # texture keep their warm-started flow instead of stepping
        mean_grad2 = float(np.mean(gx * gx + gy * gy))
        eig_floor = _EIG_REL * (2 * radius + 1) ** 2 * mean_grad2

        def window_energy(residual, weight):
            num = kernels.box_sum(weight * residual * residual, radius)
            den = np.maximum(kernels.box_sum(weight, radius), 1.0)
            return num / den

        bw, valid = kernels.bilinear_sample(b, xs + u, ys + v)
        wgt = valid.astype(np.float64)
        energy = window_energy(bw - a, wgt)
        if lvl < levels - 1:
            # drop warm starts that match worse than no motion at all;
            # coarse levels smear motion boundaries far into still regions
            e0 = window_energy(b - a, np.ones((h, w)))
            keep = energy <= e0
            u = np.where(keep, u, 0.0)
            v = np.where(keep, v, 0.0)
            bw = np.where(keep, bw, b)
            wgt = np.where(keep, wgt, 1.0)
            energy = np.where(keep, energy, e0)
        diff = (bw - a) * wgt
        active = np.ones((h, w), dtype=bool)
        for _ in range(iters):
            if not active.any():
                break
            a11 = kernels.box_sum(wgt * gx * gx, radius) + _DAMPING
            a12 = kernels.box_sum(wgt * gx * gy, radius)
            a22 = kernels.box_sum(wgt * gy * gy, radius) + _DAMPING
            b1 = kernels.box_sum(gx * diff, radius)
            b2 = kernels.box_sum(gy * diff, radius)
            det = a11 * a22 - a12 * a12
            disc = np.sqrt(np.maximum((a11 - a22) ** 2 + 4.0 * a12 * a12, 0.0))
            lam_min = 0.5 * (a11 + a22 - disc)
            ok = (det > _MIN_DET) & (lam_min > eig_floor) & active
            inv_det = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
            du = np.clip(-(a22 * b1 - a12 * b2) * inv_det, -_STEP_CAP, _STEP_CAP)
            dv = np.clip(-(a11 * b2 - a12 * b1) * inv_det, -_STEP_CAP, _STEP_CAP)
            u_c = u + du
            v_c = v + dv
            # a step commits only where it lowers the window residual
            bw_c, valid_c = kernels.bilinear_sample(b, xs + u_c, ys + v_c)
            wgt_c = valid_c.astype(np.float64)
            energy_c = window_energy(bw_c - a, wgt_c)
            commit = ok & (energy_c < energy)
            u = np.where(commit, u_c, u)
            v = np.where(commit, v_c, v)
            bw = np.where(commit, bw_c, bw)
            wgt = np.where(commit, wgt_c, wgt)
            diff = (bw - a) * wgt
            energy = np.where(commit, energy_c, energy)
            active = commit & (np.hypot(du, dv) >= _FREEZE_TOL)
        # 3x3 median pass per level pulls stragglers toward their
        # neighborhood before the next warm start
        u = median_filter(u, size=3)
        v = median_filter(v, size=3)
    return FlowField(u.astype(np.float32), v.astype(np.float32))


def warp_by_flow(src: Image, flow: FlowField) -> tuple[Image, Image]:
    """Backward bilinear warp: out(p) = src(p + flow(p))."""
    if flow.shape != src.shape:
        raise InvalidArgumentError(
            f"flow {flow.shape} does not match image {src.shape}"
        )
    u = flow.u.astype(np.float64)
    v = flow.v.astype(np.float64)

    def sampler(xs, ys):
        return xs + u, ys + v

    return warp_bilinear(src, sampler)


def consistency_map(fwd: FlowField, bwd: FlowField, tau: float = 1.0) -> Image:
    """Binary confidence from the round-trip residual.

    ``bwd`` lives on the output grid and points into the other view; ``fwd``
    points back. A pixel is confident when following ``bwd`` and then the
    interpolated ``fwd`` lands within ``tau`` pixels of the start. Lookups
    outside the frame are not confident.
    """
    if fwd.shape != bwd.shape:
        raise InvalidArgumentError("flow fields must share dimensions")
    if tau <= 0:
        raise InvalidArgumentError("tau must be > 0")
    h, w = bwd.shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    lx = xs + bwd.u
    ly = ys + bwd.v
    fu, valid_u = kernels.bilinear_sample(fwd.u, lx, ly)
    fv, _ = kernels.bilinear_sample(fwd.v, lx, ly)
    resid = np.hypot(bwd.u.astype(np.float64) + fu, bwd.v.astype(np.float64) + fv)
    conf = (resid <= tau) & valid_u
    return Image(conf.astype(np.float32)[None])


def write_flow(path: str | Path, flow: FlowField) -> None:
    """Raw dump: two little-endian int32 (width, height), then u and v
    planes as little-endian float32."""
    h, w = flow.shape
    with open(path, "wb") as f:
        f.write(struct.pack("<ii", w, h))
        f.write(flow.u.astype("<f4").tobytes())
        f.write(flow.v.astype("<f4").tobytes())


def read_flow(path: str | Path) -> FlowField:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise InvalidArgumentError(f"flow file too short: {path}")
    w, h = struct.unpack("<ii", raw[:8])
    expect = 8 + 2 * 4 * w * h
    if w <= 0 or h <= 0 or len(raw) != expect:
        raise InvalidArgumentError(f"flow file has inconsistent size: {path}")
    planes = np.frombuffer(raw[8:], dtype="<f4").reshape(2, h, w)
    return FlowField(planes[0].copy(), planes[1].copy())
