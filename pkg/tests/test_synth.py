import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shapelogic.geometry import line
from shapelogic.synth import RectShape, SceneError, SynthScene, gaussian_noise, parse_scene, render

ONE_RECT = SynthScene(64, 64, 60, (RectShape((32, 32), (10, 15), 0, 160),))


def test_render_single_rectangle():
    img, truth = render(ONE_RECT)
    assert img.pixel(32, 32) == 160
    assert img.pixel(2, 2) == 60
    assert {tuple(p) for p in truth[0]} == {(22, 17), (42, 17), (42, 47), (22, 47)}
    # boundary pixels: centers 22.5 and 21.5 straddle the left edge
    assert img.pixel(22, 32) == 160 and img.pixel(21, 32) == 60
    assert int((img.pixels == 160).sum()) == 20 * 30


def test_no_shapes_is_constant():
    img, truth = render(SynthScene(9, 7, 33))
    assert truth == []
    assert (img.pixels == 33).all() and img.pixels.shape == (7, 9)


def test_render_deterministic():
    scene = SynthScene(40, 30, 50, (RectShape((20, 15), (8, 6), 20, 200),), noise=12.0, seed=7)
    a, _ = render(scene)
    b, _ = render(scene)
    assert a == b
    c, _ = render(SynthScene(40, 30, 50, scene.shapes, noise=12.0, seed=8))
    assert a != c


def test_out_of_bounds_rejected():
    with pytest.raises(SceneError, match="out of bounds"):
        render(SynthScene(64, 64, 0, (RectShape((5, 5), (10, 3)),)))
    with pytest.raises(SceneError):
        render(SynthScene(64, 64, 0, (RectShape((32, 32), (60, 3), 45),)))


def test_later_shapes_paint_over_earlier():
    scene = SynthScene(32, 32, 0, (RectShape((16, 16), (10, 10), 0, 100),
                                   RectShape((16, 16), (4, 4), 0, 200)))
    img, truth = render(scene)
    assert img.pixel(16, 16) == 200 and img.pixel(8, 8) == 100
    assert len(truth) == 2


def test_rotated_corners_clockwise_on_screen():
    corners = RectShape((0, 0), (2, 1), 90).corners()
    expected = [(1, -2), (1, 2), (-1, 2), (-1, -2)]
    for p, q in zip(corners, expected):
        assert p.x == pytest.approx(q[0], abs=1e-12) and p.y == pytest.approx(q[1], abs=1e-12)


def test_gaussian_noise_matches_box_muller_on_pcg64():
    u = np.random.Generator(np.random.PCG64(42)).random(6)
    expected = []
    for i in range(0, 6, 2):
        r = math.sqrt(-2.0 * math.log(1.0 - u[i]))
        t = 2.0 * math.pi * u[i + 1]
        expected += [r * math.cos(t), r * math.sin(t)]
    got = gaussian_noise(5, 42)
    assert got.shape == (5,)
    np.testing.assert_allclose(got, expected[:5], rtol=1e-12, atol=1e-15)


def test_gaussian_noise_reference_values():
    # frozen from the PCG64 stream so a generator change is caught
    np.testing.assert_allclose(
        gaussian_noise(4, 0), [-0.1765253, 1.4125624, 0.2877049, 0.0299849], atol=1e-6)


def test_gaussian_noise_moments():
    z = gaussian_noise(200_000, 3)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01


def test_noise_clamped():
    img, _ = render(SynthScene(32, 32, 250, noise=40.0, seed=1))
    assert img.pixels.max() == 255
    img, _ = render(SynthScene(32, 32, 5, noise=40.0, seed=1))
    assert img.pixels.min() == 0


def test_line_is_one_on_axis_aligned_edge():
    img, _ = render(ONE_RECT)
    assert line(img, (22, 20), (22, 44)) == 1.0
    assert line(img, (25, 17), (39, 17)) == 1.0


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 360), st.integers(0, 3), st.integers(20, 120))
def test_line_is_one_on_rotated_edge(rotation, edge, contrast):
    # contrast >= 2 * 256/16 keeps fill and background in different bins
    shape = RectShape((48, 48), (14, 10), rotation, 60 + contrast)
    img, truth = render(SynthScene(96, 96, 60, (shape,)))
    c = truth[0]
    a, b = c[edge], c[(edge + 1) % 4]
    # shorten the segment so neither rectangle reaches past a corner
    m = 4.0 / math.dist(a, b)
    p1 = (a[0] + (b[0] - a[0]) * m, a[1] + (b[1] - a[1]) * m)
    p2 = (b[0] + (a[0] - b[0]) * m, b[1] + (a[1] - b[1]) * m)
    assert line(img, p1, p2) == 1.0


def test_parse_scene_ini():
    scene = parse_scene("""
[scene]
width = 64
height = 48
background = 60
noise = 5   # sigma
seed = 3

[rect]
center = 32, 24
half_extents = 10 8
rotation = 30
fill = 160

[rect two]
center = 10, 10
half_extents = 3, 3
""")
    assert (scene.width, scene.height, scene.background, scene.noise, scene.seed) == (64, 48, 60, 5.0, 3)
    assert scene.shapes == (RectShape((32, 24), (10, 8), 30, 160), RectShape((10, 10), (3, 3), 0, 255))


@pytest.mark.parametrize("text", [
    "width = 3",
    "[scene]\nwidth = 4\n",
    "[scene]\nwidth = 4\nheight = x\n",
    "[scene]\nwidth = 8\nheight = 8\n[rect]\ncenter = 4\nhalf_extents = 1, 1\n",
    "[scene]\nwidth = 8\nheight = 8\n[rect]\ncenter = 4, 4\n",
    "[scene]\nwidth = 8\nheight = 8\n[rect]\ncenter = 4, 4\nhalf_extents = 9, 1\n",
    "[scene]\nwidth = 8\nheight = 8\nbackground = 300\n",
])
def test_parse_scene_errors(text):
    with pytest.raises(SceneError):
        parse_scene(text)
