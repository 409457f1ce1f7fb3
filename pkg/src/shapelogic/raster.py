"""Grayscale raster model and binary PGM (P5) reading/writing."""

from __future__ import annotations

import re
from pathlib import Path
from typing import NamedTuple

import numpy as np


class Point(NamedTuple):
    """Image coordinate, x rightward and y downward.

    Candidate points produced by the solver are integer pixel corners.
    """

    x: float
    y: float


class PGMError(ValueError):
    """Malformed PGM input. ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class GrayImage:
    """Immutable 8-bit grayscale image.

    Pixels are held as a read-only ``(height, width)`` uint8 array, so
    ``pixels[iy, ix]`` is the intensity at column ``ix`` and row ``iy``.
    """

    __slots__ = ("_pixels",)

    def __init__(self, pixels):
        arr = np.asarray(pixels)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D pixel array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image dimensions must be positive, got {arr.shape[1]}x{arr.shape[0]}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("intensity values must lie in [0, 255]")
            if np.issubdtype(arr.dtype, np.floating) and not np.all(arr == np.round(arr)):
                raise ValueError("intensity values must be integers")
        arr = np.array(arr, dtype=np.uint8, copy=True)
        arr.setflags(write=False)
        self._pixels = arr

    @classmethod
    def from_sequence(cls, width: int, height: int, values) -> "GrayImage":
        """Build from a flat row-major sequence of ``width * height`` values."""
        values = np.asarray(values)
        if width < 1 or height < 1:
            raise ValueError(f"image dimensions must be positive, got {width}x{height}")
        if values.size != width * height:
            raise ValueError(f"expected {width * height} pixels, got {values.size}")
        return cls(values.reshape(height, width))

    @property
    def width(self) -> int:
        return self._pixels.shape[1]

    @property
    def height(self) -> int:
        return self._pixels.shape[0]

    @property
    def pixels(self) -> np.ndarray:
        return self._pixels

    def pixel(self, ix: int, iy: int) -> int:
        if not (0 <= ix < self.width and 0 <= iy < self.height):
            raise IndexError(f"pixel ({ix}, {iy}) outside {self.width}x{self.height} image")
        return int(self._pixels[iy, ix])

    def contains(self, p: Point) -> bool:
        return 0 <= p[0] < self.width and 0 <= p[1] < self.height

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self._pixels, other._pixels)

    def __hash__(self):
        return hash((self._pixels.shape, self._pixels.tobytes()))

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


def pixel(img: GrayImage, ix: int, iy: int) -> int:
    return img.pixel(ix, iy)


_WS = b" \t\n\r\v\f"
_DIGITS = re.compile(rb"[0-9]+")


def _skip_ws(data: bytes, pos: int) -> int:
    while pos < len(data):
        c = data[pos:pos + 1]
        if c == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
        elif c in _WS:
            pos += 1
        else:
            break
    return pos


def _read_int(data: bytes, pos: int, what: str) -> tuple[int, int]:
    pos = _skip_ws(data, pos)
    m = _DIGITS.match(data, pos)
    if m is None:
        if pos >= len(data):
            raise PGMError(f"truncated header: missing {what}", pos)
        raise PGMError(f"expected {what}", pos)
    return int(m.group()), m.end()


def load_pgm(data: bytes) -> GrayImage:
    """Decode a binary 8-bit PGM (``P5``) byte string."""
    if data[:2] != b"P5":
        raise PGMError(f"unsupported magic {data[:2]!r}", 0)
    pos = 2
    if pos < len(data) and data[pos:pos + 1] not in _WS and data[pos:pos + 1] != b"#":
        raise PGMError("unsupported magic", 0)
    width, pos = _read_int(data, pos, "width")
    width_at = pos
    height, pos = _read_int(data, pos, "height")
    height_at = pos
    maxval, pos = _read_int(data, pos, "maxval")
    if width == 0:
        raise PGMError("zero width", width_at)
    if height == 0:
        raise PGMError("zero height", height_at)
    if maxval == 0 or maxval > 255:
        raise PGMError(f"unsupported maxval {maxval} (need 1..255)", pos)
    if pos >= len(data) or data[pos:pos + 1] not in _WS:
        raise PGMError("missing whitespace after maxval", pos)
    pos += 1
    need = width * height
    if len(data) - pos < need:
        raise PGMError(f"truncated pixel payload: need {need} bytes, have {len(data) - pos}", len(data))
    arr = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos)
    if maxval < 255 and arr.max() > maxval:
        bad = int(np.argmax(arr > maxval))
        raise PGMError(f"pixel value exceeds maxval {maxval}", pos + bad)
    return GrayImage(arr.reshape(height, width))


def dump_pgm(img: GrayImage) -> bytes:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def read_pgm(path) -> GrayImage:
    return load_pgm(Path(path).read_bytes())


def write_pgm(path, img: GrayImage) -> None:
    Path(path).write_bytes(dump_pgm(img))
