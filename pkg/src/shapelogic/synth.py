"""Synthetic scenes of rotated rectangles with known corners.

Noise is additive Gaussian drawn from numpy's PCG64 generator: uniform
doubles from ``Generator.random`` are turned into normal variates with the
Box-Muller transform (cosine branch for even indices, sine branch for odd),
then the noisy image is rounded half-to-even and clamped to ``[0, 255]``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

import numpy as np

from .raster import GrayImage, Point


class SceneError(ValueError):
    pass


@dataclass(frozen=True)
class RectShape:
    """Filled rectangle. ``rotation`` is in degrees; positive values turn the
    rectangle clockwise on screen (x right, y down)."""

    center: tuple[float, float]
    half_extents: tuple[float, float]
    rotation: float = 0.0
    fill: int = 255

    def corners(self) -> list[Point]:
        cx, cy = self.center
        hx, hy = self.half_extents
        t = math.radians(self.rotation)
        c, s = math.cos(t), math.sin(t)
        out = []
        for lx, ly in ((-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)):
            out.append(Point(cx + c * lx - s * ly, cy + s * lx + c * ly))
        return out


@dataclass(frozen=True)
class SynthScene:
    width: int
    height: int
    background: int = 0
    shapes: tuple[RectShape, ...] = field(default_factory=tuple)
    noise: float = 0.0
    seed: int = 0

    def validate(self):
        if self.width < 1 or self.height < 1:
            raise SceneError(f"scene size must be positive, got {self.width}x{self.height}")
        if not 0 <= self.background <= 255:
            raise SceneError(f"background {self.background} outside [0, 255]")
        if self.noise < 0:
            raise SceneError(f"noise sigma must be >= 0, got {self.noise}")
        for i, s in enumerate(self.shapes):
            if not 0 <= s.fill <= 255:
                raise SceneError(f"shape {i}: fill {s.fill} outside [0, 255]")
            if s.half_extents[0] <= 0 or s.half_extents[1] <= 0:
                raise SceneError(f"shape {i}: half extents must be positive")
            for p in s.corners():
                if not (0 <= p.x <= self.width and 0 <= p.y <= self.height):
                    raise SceneError(f"shape {i}: corner ({p.x:g}, {p.y:g}) out of bounds")


def gaussian_noise(n: int, seed: int) -> np.ndarray:
    """``n`` standard normal variates from the seeded PCG64 stream."""
    rng = np.random.Generator(np.random.PCG64(seed))
    pairs = (n + 1) // 2
    u = rng.random(2 * pairs)
    r = np.sqrt(-2.0 * np.log1p(-u[0::2]))
    theta = 2.0 * math.pi * u[1::2]
    z = np.empty(2 * pairs)
    z[0::2] = r * np.cos(theta)
    z[1::2] = r * np.sin(theta)
    return z[:n]


def render(scene: SynthScene) -> tuple[GrayImage, list[list[Point]]]:
    """Paint the scene and return the image with each rectangle's corners.

    A pixel takes a shape's fill when its center lies inside the shape
    (boundary inclusive); later shapes paint over earlier ones.
    """
    scene.validate()
    base = np.full((scene.height, scene.width), float(scene.background))
    cx = np.arange(scene.width) + 0.5
    cy = np.arange(scene.height) + 0.5
    X, Y = np.meshgrid(cx, cy)
    truth = []
    for s in scene.shapes:
        t = math.radians(s.rotation)
        c, sn = math.cos(t), math.sin(t)
        dx, dy = X - s.center[0], Y - s.center[1]
        lx = c * dx + sn * dy
        ly = -sn * dx + c * dy
        inside = (np.abs(lx) <= s.half_extents[0]) & (np.abs(ly) <= s.half_extents[1])
        base[inside] = s.fill
        truth.append(s.corners())
    if scene.noise > 0:
        base = base + scene.noise * gaussian_noise(base.size, scene.seed).reshape(base.shape)
    pixels = np.clip(np.rint(base), 0, 255).astype(np.uint8)
    return GrayImage(pixels), truth


def _pair(text: str, key: str) -> tuple[float, float]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 2:
        raise SceneError(f"{key}: expected two numbers, got {text!r}")
    try:
        return (float(parts[0]), float(parts[1]))
    except ValueError:
        raise SceneError(f"{key}: expected two numbers, got {text!r}") from None


def parse_scene(text: str) -> SynthScene:
    """Read a scene description in INI form.

    The ``[scene]`` section holds ``width``, ``height``, ``background``,
    ``noise`` and ``seed``; every section whose name starts with ``rect``
    adds one rectangle with ``center``, ``half_extents``, ``rotation`` and
    ``fill``::

        [scene]
        width = 64
        height = 64
        background = 60
        noise = 5
        seed = 1

        [rect]
        center = 32, 32
        half_extents = 10, 15
        fill = 160
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise SceneError(f"malformed scene file: {e}") from None
    if not cp.has_section("scene"):
        raise SceneError("missing [scene] section")
    sc = cp["scene"]
    try:
        width = sc.getint("width")
        height = sc.getint("height")
        background = sc.getint("background", 0)
        noise = sc.getfloat("noise", 0.0)
        seed = sc.getint("seed", 0)
        if width is None or height is None:
            raise SceneError("[scene] needs width and height")
        shapes = []
        for name in cp.sections():
            if not name.startswith("rect"):
                continue
            sec = cp[name]
            if "center" not in sec or "half_extents" not in sec:
                raise SceneError(f"[{name}] needs center and half_extents")
            shapes.append(RectShape(
                center=_pair(sec["center"], f"{name}.center"),
                half_extents=_pair(sec["half_extents"], f"{name}.half_extents"),
                rotation=sec.getfloat("rotation", 0.0),
                fill=sec.getint("fill", 255),
            ))
    except ValueError as e:
        if isinstance(e, SceneError):
            raise
        raise SceneError(f"bad value in scene file: {e}") from None
    scene = SynthScene(width, height, background, tuple(shapes), noise, seed)
    scene.validate()
    return scene
