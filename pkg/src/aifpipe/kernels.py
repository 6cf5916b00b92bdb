"""Hot inner-loop kernels, each with a numba and a pure-numpy implementation.

Every public function here dispatches on :func:`aifpipe.backend.active_backend`.
The two implementations of a kernel compute the same quantity; ``box_sum``
pairs are bitwise identical (same accumulation order), the others agree to
float rounding. All kernels are deterministic: parallel loops write disjoint
outputs, so results do not depend on the worker count.
"""

from __future__ import annotations

import numpy as np

from .backend import NUMBA_AVAILABLE, active_backend

if NUMBA_AVAILABLE:
    from numba import njit, prange
else:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap

    prange = range


# ---------------------------------------------------------------------------
# bilinear_sample: gather a 2-D plane at fractional coordinates
# ---------------------------------------------------------------------------

def _bilinear_sample_numpy(plane, xs, ys):
    h, w = plane.shape
    valid = (xs >= 0.0) & (xs <= w - 1.0) & (ys >= 0.0) & (ys <= h - 1.0)
    x = np.clip(xs, 0.0, w - 1.0)
    y = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    top = plane[y0, x0] * (1.0 - fx) + plane[y0, x1] * fx
    bot = plane[y1, x0] * (1.0 - fx) + plane[y1, x1] * fx
    out = top * (1.0 - fy) + bot * fy
    out[~valid] = 0.0
    return out.astype(plane.dtype), valid


@njit(parallel=True, cache=True)
def _bilinear_sample_numba(plane, xs, ys):  # pragma: no cover - jitted
    h, w = plane.shape
    oh, ow = xs.shape
    out = np.zeros((oh, ow), dtype=plane.dtype)
    valid = np.zeros((oh, ow), dtype=np.bool_)
    for r in prange(oh):
        for c in range(ow):
            x = xs[r, c]
            y = ys[r, c]
            if x < 0.0 or x > w - 1.0 or y < 0.0 or y > h - 1.0:
                continue
            x0 = int(np.floor(x))
            y0 = int(np.floor(y))
            x1 = min(x0 + 1, w - 1)
            y1 = min(y0 + 1, h - 1)
            fx = x - x0
            fy = y - y0
            top = plane[y0, x0] * (1.0 - fx) + plane[y0, x1] * fx
            bot = plane[y1, x0] * (1.0 - fx) + plane[y1, x1] * fx
            out[r, c] = top * (1.0 - fy) + bot * fy
            valid[r, c] = True
    return out, valid


def bilinear_sample(plane: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Sample ``plane`` at coordinates ``(xs, ys)``.

    Coordinates outside ``[0, w-1] x [0, h-1]`` yield 0 with validity False;
    everything else is standard bilinear interpolation (computed in float64,
    cast back to the plane dtype).
    """
    plane = np.ascontiguousarray(plane)
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    if active_backend() == "numba":
        return _bilinear_sample_numba(plane, xs, ys)
    return _bilinear_sample_numpy(plane, xs, ys)


# ---------------------------------------------------------------------------
# box_sum: windowed sum over (2r+1)^2 windows, truncated at the borders
# ---------------------------------------------------------------------------

def _integral_numpy(plane):
    s = np.cumsum(plane, axis=0, dtype=np.float64)
    s = np.cumsum(s, axis=1)
    out = np.zeros((plane.shape[0] + 1, plane.shape[1] + 1), dtype=np.float64)
    out[1:, 1:] = s
    return out


def _box_sum_numpy(plane, radius):
    h, w = plane.shape
    s = _integral_numpy(plane)
    ys = np.arange(h)
    xs = np.arange(w)
    y1 = np.maximum(ys - radius, 0)
    y2 = np.minimum(ys + radius + 1, h)
    x1 = np.maximum(xs - radius, 0)
    x2 = np.minimum(xs + radius + 1, w)
    a = s[np.ix_(y2, x2)]
    b = s[np.ix_(y1, x2)]
    c = s[np.ix_(y2, x1)]
    d = s[np.ix_(y1, x1)]
    return a - b - c + d


@njit(cache=True)
def _integral_numba(plane):  # pragma: no cover - jitted
    h, w = plane.shape
    out = np.zeros((h + 1, w + 1), dtype=np.float64)
    # cumsum along axis 0 then axis 1, matching np.cumsum order bitwise
    for r in range(h):
        for c in range(w):
            out[r + 1, c + 1] = out[r, c + 1] + plane[r, c]
    for r in range(h):
        for c in range(1, w):
            out[r + 1, c + 1] = out[r + 1, c] + out[r + 1, c + 1]
    return out


@njit(parallel=True, cache=True)
def _box_sum_numba(plane, radius):  # pragma: no cover - jitted
    h, w = plane.shape
    s = _integral_numba(plane)
    out = np.empty((h, w), dtype=np.float64)
    for r in prange(h):
        y1 = max(r - radius, 0)
        y2 = min(r + radius + 1, h)
        for c in range(w):
            x1 = max(c - radius, 0)
            x2 = min(c + radius + 1, w)
            out[r, c] = s[y2, x2] - s[y1, x2] - s[y2, x1] + s[y1, x1]
    return out


def box_sum(plane: np.ndarray, radius: int) -> np.ndarray:
    """Sum each (2*radius+1)^2 window, truncated at the image borders.

    Accumulates and returns float64.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    plane = np.ascontiguousarray(plane, dtype=np.float64)
    if active_backend() == "numba":
        return _box_sum_numba(plane, radius)
    return _box_sum_numpy(plane, radius)


# ---------------------------------------------------------------------------
# patch_search_ssd: exhaustive integer-offset SSD search around anchors
# ---------------------------------------------------------------------------

def _patch_search_numpy(ref, src, ys, xs, patch_r, search_r):
    h, w = ref.shape
    n = ys.shape[0]
    best_cost = np.full(n, np.inf, dtype=np.float64)
    best_dy = np.zeros(n, dtype=np.int64)
    best_dx = np.zeros(n, dtype=np.int64)

    full_cnt = _box_sum_numpy(np.ones((h, w)), patch_r)[ys, xs]
    ref64 = ref.astype(np.float64)
    src64 = src.astype(np.float64)
    for dy in range(-search_r, search_r + 1):
        ry1, ry2 = max(0, -dy), min(h, h - dy)
        if ry2 <= ry1:
            continue
        for dx in range(-search_r, search_r + 1):
            rx1, rx2 = max(0, -dx), min(w, w - dx)
            if rx2 <= rx1:
                continue
            d = np.zeros((h, w), dtype=np.float64)
            v = np.zeros((h, w), dtype=np.float64)
            diff = (
                ref64[ry1:ry2, rx1:rx2]
                - src64[ry1 + dy:ry2 + dy, rx1 + dx:rx2 + dx]
            )
            d[ry1:ry2, rx1:rx2] = diff * diff
            v[ry1:ry2, rx1:rx2] = 1.0
            cost = _box_sum_numpy(d, patch_r)[ys, xs]
            cnt = _box_sum_numpy(v, patch_r)[ys, xs]
            ok = cnt >= full_cnt - 0.5  # whole window must land inside src
            c_at = np.where(ok, cost / np.maximum(cnt, 1.0), np.inf)
            better = c_at < best_cost
            best_cost[better] = c_at[better]
            best_dy[better] = dy
            best_dx[better] = dx
    return best_dy, best_dx, best_cost


@njit(parallel=True, cache=True)
def _patch_search_numba(ref, src, ys, xs, patch_r, search_r):  # pragma: no cover
    h, w = ref.shape
    n = ys.shape[0]
    best_cost = np.full(n, np.inf, dtype=np.float64)
    best_dy = np.zeros(n, dtype=np.int64)
    best_dx = np.zeros(n, dtype=np.int64)
    for k in prange(n):
        ay = ys[k]
        ax = xs[k]
        y1 = max(ay - patch_r, 0)
        y2 = min(ay + patch_r + 1, h)
        x1 = max(ax - patch_r, 0)
        x2 = min(ax + patch_r + 1, w)
        cnt = (y2 - y1) * (x2 - x1)
        if cnt <= 0:
            continue
        for dy in range(-search_r, search_r + 1):
            if y1 + dy < 0 or y2 + dy > h:
                continue
            for dx in range(-search_r, search_r + 1):
                if x1 + dx < 0 or x2 + dx > w:
                    continue
                acc = 0.0
                for j in range(y1, y2):
                    for i in range(x1, x2):
                        diff = float(ref[j, i]) - float(src[j + dy, i + dx])
                        acc += diff * diff
                cost = acc / cnt
                if cost < best_cost[k]:
                    best_cost[k] = cost
                    best_dy[k] = dy
                    best_dx[k] = dx
    return best_dy, best_dx, best_cost


def patch_search_ssd(
    ref: np.ndarray,
    src: np.ndarray,
    ys: np.ndarray,
    xs: np.ndarray,
    patch_r: int,
    search_r: int,
):
    """For each anchor, find the integer offset into ``src`` minimizing the
    mean squared difference against the ``ref`` patch around the anchor.

    Patches are truncated at ``ref`` borders; an offset is a candidate only
    if the (truncated) window fits entirely inside ``src``. Anchors with no
    candidate get cost +inf and offset (0, 0). Ties resolve to the first
    offset in (dy, dx) scan order.
    """
    if ref.shape != src.shape:
        raise ValueError("ref and src must have the same shape")
    ref = np.ascontiguousarray(ref, dtype=np.float32)
    src = np.ascontiguousarray(src, dtype=np.float32)
    ys = np.ascontiguousarray(ys, dtype=np.int64)
    xs = np.ascontiguousarray(xs, dtype=np.int64)
    if active_backend() == "numba":
        return _patch_search_numba(ref, src, ys, xs, patch_r, search_r)
    return _patch_search_numpy(ref, src, ys, xs, patch_r, search_r)


def warmup() -> None:
    """Trigger JIT compilation of the numba kernels (no-op on numpy)."""
    if active_backend() != "numba":
        return
    plane = np.ones((8, 8), dtype=np.float32)
    coords = np.full((4, 4), 2.5)
    bilinear_sample(plane, coords, coords)
    box_sum(plane, 1)
    patch_search_ssd(plane, plane, np.array([4]), np.array([4]), 1, 1)
