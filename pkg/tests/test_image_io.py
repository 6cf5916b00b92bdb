import numpy as np
import pytest

from aifpipe.errors import InvalidArgumentError
from aifpipe.image import Image, read_png, write_png


def test_round_trip_8bit(tmp_path):
    rng = np.random.default_rng(0)
    img = Image(rng.random((3, 12, 17), dtype=np.float32))
    path = tmp_path / "x.png"
    write_png(path, img)
    back = read_png(path)
    assert back.channels == 3 and back.shape == (12, 17)
    # quantization error bounded by half a code value
    assert np.abs(back.data - np.clip(img.data, 0, 1)).max() <= 0.5 / 255 + 1e-6


def test_round_trip_16bit(tmp_path):
    rng = np.random.default_rng(1)
    img = Image(rng.random((3, 9, 9), dtype=np.float32))
    path = tmp_path / "x16.png"
    write_png(path, img, bit_depth=16)
    back = read_png(path)
    assert np.abs(back.data - img.data).max() <= 0.5 / 65535 + 1e-6


def test_gray_round_trip(tmp_path):
    img = Image(np.linspace(0, 1, 64, dtype=np.float32).reshape(1, 8, 8))
    path = tmp_path / "g.png"
    write_png(path, img)
    back = read_png(path)
    assert back.channels == 1
    assert np.abs(back.data - img.data).max() <= 0.5 / 255 + 1e-6


def test_encode_clamps(tmp_path):
    img = Image(np.array([[[-0.5, 0.25], [0.75, 1.5]]], np.float32))
    path = tmp_path / "c.png"
    write_png(path, img)
    back = read_png(path)
    assert back.data[0, 0, 0] == 0.0
    assert back.data[0, 1, 1] == 1.0


def test_half_to_even_rounding(tmp_path):
    # 0.5/255 quantizes to code 0 (ties to even), 1.5/255 to code 2
    img = Image(np.array([[[0.5 / 255, 1.5 / 255]]], np.float32))
    path = tmp_path / "r.png"
    write_png(path, img)
    back = read_png(path)
    codes = np.round(back.data[0, 0] * 255).astype(int)
    assert codes.tolist() == [0, 2]


def test_missing_file():
    with pytest.raises(InvalidArgumentError):
        read_png("/nonexistent/nothing.png")


def test_deterministic_bytes(tmp_path):
    rng = np.random.default_rng(2)
    img = Image(rng.random((3, 16, 16), dtype=np.float32))
    p1, p2 = tmp_path / "a.png", tmp_path / "b.png"
    write_png(p1, img)
    write_png(p2, img)
    assert p1.read_bytes() == p2.read_bytes()


def test_luma_weights():
    img = Image(np.stack([np.full((4, 4), 1.0, np.float32),
                          np.zeros((4, 4), np.float32),
                          np.zeros((4, 4), np.float32)]))
    assert img.luma()[0, 0] == pytest.approx(0.299, abs=1e-6)


def test_invalid_channel_count():
    with pytest.raises(InvalidArgumentError):
        Image(np.zeros((2, 4, 4), np.float32))
