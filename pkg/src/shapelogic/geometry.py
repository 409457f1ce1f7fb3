"""Spatial predicates evaluated on an image: segment length, vertex angle and
border strength of a segment.

Border strength compares the intensity histograms of two thin rectangles
flanking the segment, one per side::

    strength = 1 - sum_i min(h1[i], h2[i]) / sum_i max(h1[i], h2[i])

It is 0 when both sides look alike and 1 when their histograms share no bin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .raster import GrayImage, Point

MIN_SEGMENT_LENGTH = 2.0


class DegenerateGeometryError(ValueError):
    """Raised when a segment or vertex is too short to define a direction."""


@dataclass(frozen=True)
class LineParams:
    """Analysis-rectangle geometry for :func:`line`.

    Attributes:
        width: Depth of each flanking rectangle, measured perpendicular to
            the segment, in pixels.
        bins: Number of equal intensity intervals over ``[0, 256)``.
        gap: Band either side of the segment excluded from both rectangles.
    """

    width: float = 3.0
    bins: int = 16
    gap: float = 0.5

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"rectangle width must be positive, got {self.width}")
        if self.bins < 2:
            raise ValueError(f"bin count must be at least 2, got {self.bins}")
        if not 0 <= self.gap < self.width:
            raise ValueError(f"gap must satisfy 0 <= gap < width, got {self.gap}")


@dataclass(frozen=True)
class Histogram:
    counts: tuple[int, ...]

    @property
    def bins(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return sum(self.counts)


def length(p1: Point, p2: Point) -> float:
    """Euclidean distance between two points."""
    return math.hypot(p1[0] - p2[0], p1[1] - p2[1])


def angle(p1: Point, p2: Point, p3: Point) -> float:
    """Angle at vertex ``p2`` from ray ``p2->p1`` to ray ``p2->p3``, in degrees.

    Measured counterclockwise in screen coordinates (y down) and normalized
    into ``[0, 360)``, so ``angle(a, b, c) + angle(c, b, a) == 360`` for
    non-collinear triples.
    """
    ux, uy = p1[0] - p2[0], p1[1] - p2[1]
    vx, vy = p3[0] - p2[0], p3[1] - p2[1]
    if (ux == 0 and uy == 0) or (vx == 0 and vy == 0):
        raise DegenerateGeometryError(f"degenerate vertex at {tuple(p2)}")
    deg = math.degrees(math.atan2(ux * vy - uy * vx, ux * vx + uy * vy))
    if deg < 0:
        deg += 360.0
    if deg >= 360.0:
        deg -= 360.0
    return deg


def _side_masks(img: GrayImage, p1: Point, p2: Point, params: LineParams):
    """Return the pixel window and the two rectangle masks for segment p1-p2.

    Masks are computed for the endpoint pair in canonical (sorted) order so
    that swapping the endpoints swaps the masks bit-exactly.
    """
    seg_len = length(p1, p2)
    if seg_len < MIN_SEGMENT_LENGTH:
        raise DegenerateGeometryError(
            f"segment {tuple(p1)}-{tuple(p2)} shorter than {MIN_SEGMENT_LENGTH} px")
    a, b = (p1, p2) if tuple(p1) <= tuple(p2) else (p2, p1)
    ax, ay = float(a[0]), float(a[1])
    dx, dy = float(b[0]) - ax, float(b[1]) - ay
    reach = params.gap + params.width

    x0 = max(0, math.floor(min(a[0], b[0]) - reach) - 1)
    x1 = min(img.width, math.ceil(max(a[0], b[0]) + reach) + 1)
    y0 = max(0, math.floor(min(a[1], b[1]) - reach) - 1)
    y1 = min(img.height, math.ceil(max(a[1], b[1]) + reach) + 1)
    if x0 >= x1 or y0 >= y1:
        empty = np.zeros((0, 0), dtype=bool)
        return None, empty, empty, True

    rx = (np.arange(x0, x1) + 0.5 - ax)[None, :]
    ry = (np.arange(y0, y1) + 0.5 - ay)[:, None]
    along = (rx * dx + ry * dy) / seg_len
    perp = (ry * dx - rx * dy) / seg_len
    inside = (along > 0) & (along < seg_len)
    hi = params.gap + params.width
    pos = inside & (perp >= params.gap) & (perp < hi)
    neg = inside & (-perp >= params.gap) & (-perp < hi)
    window = img.pixels[y0:y1, x0:x1]
    canonical = a is p1
    return window, pos, neg, canonical


def rect_pixels(img: GrayImage, p1: Point, p2: Point,
                side: Literal["left", "right"], params: LineParams = LineParams()) -> np.ndarray:
    """Intensities of the pixels in one flanking rectangle of segment p1->p2.

    A pixel belongs to a rectangle when its center ``(ix + 0.5, iy + 0.5)``
    projects strictly inside the segment span and lies at perpendicular
    offset in ``[gap, gap + width)`` on that side. ``"left"`` is the side the
    normal ``(-dy, dx)`` points to. Off-image parts are clipped.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    window, pos, neg, canonical = _side_masks(img, p1, p2, params)
    if window is None:
        return np.zeros(0, dtype=np.uint8)
    mask = pos if (side == "left") == canonical else neg
    return window[mask]


def histogram(values: Sequence[int], bins: int) -> Histogram:
    """Counts of ``values`` over ``bins`` equal intervals of ``[0, 256)``."""
    if bins < 2:
        raise ValueError(f"bin count must be at least 2, got {bins}")
    return Histogram(tuple(int(c) for c in _bin_counts(np.asarray(values), bins)))


def _bin_counts(values: np.ndarray, bins: int) -> np.ndarray:
    idx = (values.astype(np.int64) * bins) // 256
    return np.bincount(idx, minlength=bins)


def strength_from_counts(h1: Sequence[int], h2: Sequence[int]) -> float:
    """Apply the border-strength formula to two histograms of equal length."""
    w1 = np.asarray(h1)
    w2 = np.asarray(h2)
    if w1.shape != w2.shape:
        raise ValueError("histograms must have the same number of bins")
    denom = int(np.maximum(w1, w2).sum())
    if denom == 0:
        return 0.0
    return 1.0 - int(np.minimum(w1, w2).sum()) / denom


def line(img: GrayImage, p1: Point, p2: Point, params: LineParams = LineParams()) -> float:
    """Border strength in ``[0, 1]`` of the straight segment from p1 to p2.

    Each side's counts are scaled by the other side's pixel total before the
    formula is applied, so rectangles shortened by clipping are compared as
    distributions; with equally sized rectangles this is the plain formula.
    Returns 0 when either rectangle is empty.
    """
    window, pos, neg, _ = _side_masks(img, p1, p2, params)
    if window is None:
        return 0.0
    h1 = _bin_counts(window[pos], params.bins)
    h2 = _bin_counts(window[neg], params.bins)
    t1, t2 = int(h1.sum()), int(h2.sum())
    if t1 == 0 or t2 == 0:
        return 0.0
    return strength_from_counts(h1 * t2, h2 * t1)
