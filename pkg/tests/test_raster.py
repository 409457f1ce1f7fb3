import numpy as np
import pytest
from hypothesis import given, strategies as st

from shapelogic.raster import GrayImage, PGMError, dump_pgm, load_pgm, pixel


def test_load_2x2():
    img = load_pgm(b"P5 2 2 255\n" + bytes([0, 64, 128, 255]))
    assert (img.width, img.height) == (2, 2)
    assert pixel(img, 1, 1) == 255
    assert pixel(img, 0, 0) == 0
    assert pixel(img, 1, 0) == 64  # row-major


def test_load_smallest():
    img = load_pgm(b"P5 1 1 255\n" + bytes([7]))
    assert (img.width, img.height) == (1, 1)
    assert img.pixel(0, 0) == 7


def test_header_comments_skipped():
    data = b"P5\n# made by hand\n2 1\n# another\n255\n" + bytes([3, 4])
    img = load_pgm(data)
    assert img.pixel(0, 0) == 3 and img.pixel(1, 0) == 4


def test_ascii_pgm_rejected():
    with pytest.raises(PGMError, match="unsupported magic") as e:
        load_pgm(b"P2 1 1 255\n7\n")
    assert e.value.offset == 0


@pytest.mark.parametrize("data, fragment", [
    (b"P5 2 2 65535\n" + bytes(8), "maxval"),
    (b"P5 2 2 255\n" + bytes(3), "truncated pixel payload"),
    (b"P5 0 2 255\n", "zero width"),
    (b"P5 2 0 255\n", "zero height"),
    (b"P5 2", "truncated header"),
    (b"P5 2 x 255\n", "expected height"),
])
def test_malformed_inputs_report_offsets(data, fragment):
    with pytest.raises(PGMError, match=fragment) as e:
        load_pgm(data)
    assert 0 <= e.value.offset <= len(data)


def test_pixel_bounds():
    img = load_pgm(b"P5 2 2 255\n" + bytes([0, 64, 128, 255]))
    with pytest.raises(IndexError):
        pixel(img, 2, 0)
    with pytest.raises(IndexError):
        pixel(img, 0, -1)


def test_image_is_read_only():
    img = GrayImage(np.zeros((2, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        img.pixels[0, 0] = 1


@pytest.mark.parametrize("bad", [np.zeros((0, 3)), np.full((2, 2), 256), np.full((2, 2), -1)])
def test_invalid_construction(bad):
    with pytest.raises(ValueError):
        GrayImage(bad)


def test_from_sequence_length_checked():
    with pytest.raises(ValueError):
        GrayImage.from_sequence(2, 2, [1, 2, 3])
    assert GrayImage.from_sequence(2, 1, [5, 6]).pixel(1, 0) == 6


@given(st.integers(1, 12), st.integers(1, 12), st.data())
def test_round_trip_bit_exact(w, h, data):
    values = data.draw(st.lists(st.integers(0, 255), min_size=w * h, max_size=w * h))
    img = GrayImage.from_sequence(w, h, values)
    again = load_pgm(dump_pgm(img))
    assert again == img
    assert dump_pgm(again) == dump_pgm(img)
