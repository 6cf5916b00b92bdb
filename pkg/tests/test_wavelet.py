import numpy as np
import pytest

from aifpipe.errors import InvalidArgumentError
from aifpipe.image import Image
from aifpipe.wavelet import WaveletBands, dwt2, idwt2


def rand_image(rng, h, w, c=1):
    return Image(rng.random((c, h, w), dtype=np.float32))


def test_constant_block():
    bands = dwt2(Image(np.ones((1, 2, 2), np.float32)))
    assert bands.ll.data[0, 0, 0] == pytest.approx(2.0)
    for b in (bands.lh, bands.hl, bands.hh):
        assert b.data[0, 0, 0] == 0.0


def test_vertical_edge_block():
    img = Image(np.array([[[1.0, 0.0], [1.0, 0.0]]], np.float32))
    bands = dwt2(img)
    assert bands.ll.data[0, 0, 0] == pytest.approx(1.0)
    assert bands.lh.data[0, 0, 0] == pytest.approx(1.0)  # vertical-edge band
    assert bands.hl.data[0, 0, 0] == 0.0
    assert bands.hh.data[0, 0, 0] == 0.0


def test_energy_preservation():
    rng = np.random.default_rng(0)
    img = rand_image(rng, 64, 64, 3)
    bands = dwt2(img)
    e_in = np.sum(img.data.astype(np.float64) ** 2)
    e_out = sum(np.sum(b.data.astype(np.float64) ** 2)
                for b in (bands.ll, bands.lh, bands.hl, bands.hh))
    assert abs(e_in - e_out) / e_in <= 1e-6


def test_round_trip_even_and_odd():
    rng = np.random.default_rng(1)
    for h, w in [(16, 16), (65, 65), (17, 32), (32, 17), (1, 1), (3, 5)]:
        img = rand_image(rng, h, w, 3)
        rec = idwt2(dwt2(img))
        assert rec.shape == img.shape
        assert np.abs(rec.data - img.data).max() <= 1e-6


def test_round_trip_many_random():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(200):
        h = int(rng.integers(2, 40))
        w = int(rng.integers(2, 40))
        img = rand_image(rng, h, w)
        rec = idwt2(dwt2(img))
        worst = max(worst, float(np.abs(rec.data - img.data).max()))
    assert worst <= 1e-6


def test_inverse_of_constant():
    ll = Image(np.full((1, 1, 1), 2.0, np.float32))
    zero = Image(np.zeros((1, 1, 1), np.float32))
    bands = WaveletBands(ll, zero, zero, zero, parity=(2, 2))
    rec = idwt2(bands)
    assert np.allclose(rec.data, 1.0)


def test_band_dimensions_consistent():
    rng = np.random.default_rng(3)
    bands = dwt2(rand_image(rng, 33, 47))
    assert bands.ll.shape == bands.lh.shape == bands.hl.shape == bands.hh.shape
    assert bands.ll.shape == (17, 24)
    assert bands.parity == (47, 33)


def test_mismatched_bands_rejected():
    rng = np.random.default_rng(4)
    bands = dwt2(rand_image(rng, 16, 16))
    bad = WaveletBands(
        ll=bands.ll,
        lh=Image(np.zeros((1, 4, 4), np.float32)),
        hl=bands.hl,
        hh=bands.hh,
        parity=bands.parity,
    )
    with pytest.raises(InvalidArgumentError):
        idwt2(bad)


def test_zero_sized_rejected():
    with pytest.raises(InvalidArgumentError):
        Image(np.zeros((1, 0, 4), np.float32))


def test_nonfinite_rejected():
    data = np.ones((1, 4, 4), np.float32)
    data[0, 1, 1] = np.nan
    with pytest.raises(InvalidArgumentError):
        dwt2(Image(data))


def test_purity():
    rng = np.random.default_rng(5)
    img = rand_image(rng, 24, 24, 3)
    b1 = dwt2(img)
    b2 = dwt2(img)
    assert np.array_equal(b1.ll.data, b2.ll.data)
    assert np.array_equal(b1.hh.data, b2.hh.data)
