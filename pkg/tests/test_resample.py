import numpy as np
import pytest

from aifpipe.errors import InvalidArgumentError
from aifpipe.image import Image
from aifpipe.resample import resize_bilinear, shift_sampler, warp_bilinear


def ramp_image(h, w):
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float32)
    return Image(((xs + 2 * ys) / (w + 2 * h))[None])


def test_identity_sampler():
    rng = np.random.default_rng(0)
    img = Image(rng.random((3, 20, 24), dtype=np.float32))
    out, valid = warp_bilinear(img, lambda xs, ys: (xs, ys))
    assert np.array_equal(out.data, img.data)
    assert valid.data.min() == 1.0


def test_integer_shift():
    img = ramp_image(16, 16)
    out, valid = warp_bilinear(img, shift_sampler(3, 0))
    assert np.allclose(out.data[0, :, :-3], img.data[0, :, 3:], atol=1e-7)
    assert np.all(valid.data[0, :, -3:] == 0.0)
    assert np.all(valid.data[0, :, :-3] == 1.0)
    assert np.all(out.data[0, :, -3:] == 0.0)


def test_half_pixel_shift_on_ramp():
    img = ramp_image(16, 32)
    out, valid = warp_bilinear(img, shift_sampler(0.5, 0.0))
    ys, xs = np.mgrid[0:16, 0:32].astype(np.float64)
    expected = (xs + 0.5 + 2 * ys) / (32 + 2 * 16)
    interior = valid.data[0] == 1.0
    assert np.abs(out.data[0][interior] - expected[interior]).max() <= 1e-6


def test_nonfinite_sampler_rejected():
    img = ramp_image(8, 8)
    with pytest.raises(InvalidArgumentError):
        warp_bilinear(img, lambda xs, ys: (xs * np.inf, ys))


def test_resize_identity():
    rng = np.random.default_rng(1)
    img = Image(rng.random((3, 12, 18), dtype=np.float32))
    out = resize_bilinear(img, 18, 12)
    assert np.array_equal(out.data, img.data)


def test_resize_constant():
    img = Image(np.full((1, 10, 10), 0.37, np.float32))
    for w, h in [(3, 7), (20, 20), (1, 1)]:
        out = resize_bilinear(img, w, h)
        assert np.allclose(out.data, 0.37, atol=1e-6)


def _scalar_resize_oracle(plane, new_w, new_h):
    """Straight-line interpolation reference, half-pixel centers, clamped."""
    old_h, old_w = plane.shape
    out = np.zeros((new_h, new_w))
    for j in range(new_h):
        sy = min(max((j + 0.5) * old_h / new_h - 0.5, 0.0), old_h - 1.0)
        y0 = int(np.floor(sy))
        y1 = min(y0 + 1, old_h - 1)
        fy = sy - y0
        for i in range(new_w):
            sx = min(max((i + 0.5) * old_w / new_w - 0.5, 0.0), old_w - 1.0)
            x0 = int(np.floor(sx))
            x1 = min(x0 + 1, old_w - 1)
            fx = sx - x0
            top = plane[y0, x0] * (1 - fx) + plane[y0, x1] * fx
            bot = plane[y1, x0] * (1 - fx) + plane[y1, x1] * fx
            out[j, i] = top * (1 - fy) + bot * fy
    return out


def test_resize_matches_scalar_oracle():
    ys, xs = np.mgrid[0:4, 0:4].astype(np.float64)
    ramp = (xs + ys) / 6.0
    expected = _scalar_resize_oracle(ramp, 2, 2)
    out = resize_bilinear(Image(ramp.astype(np.float32)[None]), 2, 2)
    assert np.abs(out.data[0] - expected).max() <= 1e-6

    rng = np.random.default_rng(2)
    plane = rng.random((9, 13))
    expected = _scalar_resize_oracle(plane, 5, 17)
    out = resize_bilinear(Image(plane.astype(np.float32)[None]), 5, 17)
    assert np.abs(out.data[0] - expected).max() <= 1e-5


def test_resize_zero_target_rejected():
    img = ramp_image(8, 8)
    with pytest.raises(InvalidArgumentError):
        resize_bilinear(img, 0, 4)
