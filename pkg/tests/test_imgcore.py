import math

import numpy as np
import pytest
from PIL import Image as PILImage

from srlab.imgcore import (
    CUBIC_A,
    DecodeError,
    Image,
    bicubic_resize,
    decode_jpeg,
    encode_jpeg,
    load_image,
    same_pixels,
    save_png,
    to_gray,
    to_uint8,
)
from srlab.metrics import psnr

from conftest import rand_image


# ---------------------------------------------------------------------------
# Reference implementations
# ---------------------------------------------------------------------------

def ref_cubic_kernel(t: float) -> float:
    a = CUBIC_A
    t = abs(t)
    if t <= 1.0:
        return (a + 2.0) * t**3 - (a + 3.0) * t**2 + 1.0
    if t < 2.0:
        return a * t**3 - 5.0 * a * t**2 + 8.0 * a * t - 4.0 * a
    return 0.0


def ref_bicubic_point(plane: np.ndarray, yo: int, xo: int, scale: float) -> float:
    """Direct 2-D evaluation of the 4x4 tap sum at one output pixel."""
    h, w = plane.shape
    sy = (yo + 0.5) / scale - 0.5
    sx = (xo + 0.5) / scale - 0.5
    by, bx = math.floor(sy), math.floor(sx)
    acc = 0.0
    for m in range(-1, 3):
        for n in range(-1, 3):
            wy = ref_cubic_kernel(sy - (by + m))
            wx = ref_cubic_kernel(sx - (bx + n))
            yy = min(max(by + m, 0), h - 1)
            xx = min(max(bx + n, 0), w - 1)
            acc += wy * wx * plane[yy, xx]
    return min(max(acc, 0.0), 1.0)


def ref_luma(r: float, g: float, b: float) -> float:
    return 0.299 * r + 0.587 * g + 0.114 * b


# ---------------------------------------------------------------------------
# Loading and PNG round trips
# ---------------------------------------------------------------------------

def test_load_1x1_rgb(tmp_path):
    path = tmp_path / "px.png"
    PILImage.fromarray(np.array([[[255, 0, 128]]], dtype=np.uint8), "RGB").save(path)
    img = load_image(path)
    assert img.channels == 3 and img.height == 1 and img.width == 1
    assert img.data[0, 0, 0] == 1.0
    assert img.data[1, 0, 0] == 0.0
    assert img.data[2, 0, 0] == 128 / 255


def test_load_gray_zeros(tmp_path):
    path = tmp_path / "z.png"
    PILImage.fromarray(np.zeros((2, 2), dtype=np.uint8), "L").save(path)
    img = load_image(path)
    assert img.channels == 1
    assert np.all(img.data == 0.0)


def test_load_drops_alpha(tmp_path):
    path = tmp_path / "a.png"
    rgba = np.random.default_rng(3).integers(0, 256, size=(4, 5, 4), dtype=np.uint8)
    PILImage.fromarray(rgba, "RGBA").save(path)
    img = load_image(path)
    assert img.channels == 3
    assert np.array_equal(to_uint8(img), rgba[:, :, :3])


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("mode", ["RGB", "L"])
def test_png_round_trip_bit_exact(tmp_path, seed, mode):
    rng = np.random.default_rng(seed)
    shape = (8, 8, 3) if mode == "RGB" else (8, 8)
    original = rng.integers(0, 256, size=shape, dtype=np.uint8)
    src = tmp_path / "src.png"
    PILImage.fromarray(original, mode).save(src)

    out = tmp_path / "out.png"
    save_png(load_image(src), out)
    redecoded = np.asarray(PILImage.open(out))
    assert np.array_equal(redecoded, original)


def test_load_missing_file_names_path(tmp_path):
    with pytest.raises(DecodeError, match="nope.png"):
        load_image(tmp_path / "nope.png")


def test_load_garbage_fails(tmp_path):
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"this is not an image")
    with pytest.raises(DecodeError, match="bad.png"):
        load_image(bad)


def test_image_invariants():
    with pytest.raises(ValueError):
        Image(np.full((2, 4, 4), 1.5))
    with pytest.raises(ValueError):
        Image(np.full((3, 4, 4), np.nan))
    with pytest.raises(ValueError):
        Image(np.zeros((4, 4)))


# ---------------------------------------------------------------------------
# JPEG
# ---------------------------------------------------------------------------

def textured_image(seed=7, size=48) -> Image:
    """Sinusoid plus noise; enough structure for quality comparisons."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / size
    base = 0.5 + 0.25 * np.sin(9.0 * xx + 3.0 * yy) * np.cos(7.0 * yy)
    stack = np.stack([base, base**2, 1.0 - base])
    return Image(np.clip(stack + rng.standard_normal(stack.shape) * 0.03, 0, 1))


@pytest.mark.parametrize("channels", [1, 3])
@pytest.mark.parametrize("hw", [(17, 23), (32, 32), (11, 64)])
def test_jpeg_preserves_dims_and_channels(channels, hw):
    img = rand_image(5, hw[0], hw[1], channels)
    decoded = decode_jpeg(encode_jpeg(img, 30))
    assert (decoded.height, decoded.width) == hw
    assert decoded.channels == channels


def test_jpeg_quality_monotonic_size():
    img = textured_image()
    assert len(encode_jpeg(img, 10)) <= len(encode_jpeg(img, 90))


def test_jpeg_quality_monotonic_fidelity():
    img = textured_image()
    hi = psnr(decode_jpeg(encode_jpeg(img, 90)), img)
    lo = psnr(decode_jpeg(encode_jpeg(img, 10)), img)
    assert hi > lo


@pytest.mark.parametrize("quality", [0, 101, -3])
def test_jpeg_invalid_quality(quality):
    with pytest.raises(ValueError):
        encode_jpeg(rand_image(0, 8, 8), quality)


def test_jpeg_deterministic():
    img = textured_image(seed=2)
    assert encode_jpeg(img, 30) == encode_jpeg(img, 30)


# ---------------------------------------------------------------------------
# Bicubic resize
# ---------------------------------------------------------------------------

def test_bicubic_identity():
    img = rand_image(11, 9, 13)
    out = bicubic_resize(img, 1.0)
    assert out.data.shape == img.data.shape
    assert np.abs(out.data - img.data).max() < 1e-6


@pytest.mark.parametrize("scale", [0.25, 0.5, 0.75, 1.0, 1.5, 2.0])
@pytest.mark.parametrize("value", [0.0, 0.37, 1.0])
def test_bicubic_constant_preserved(scale, value):
    img = Image(np.full((3, 16, 16), value))
    out = bicubic_resize(img, scale)
    assert np.abs(out.data - value).max() < 1e-12


def test_bicubic_ramp_matches_pointwise_oracle():
    ramp = np.linspace(0.0, 1.0, 64).reshape(8, 8)
    img = Image(ramp[None])
    out = bicubic_resize(img, 0.5)
    assert out.data.shape == (1, 4, 4)
    for yo in range(4):
        for xo in range(4):
            want = ref_bicubic_point(ramp, yo, xo, 0.5)
            assert out.data[0, yo, xo] == pytest.approx(want, abs=1e-9)


@pytest.mark.parametrize("seed", [0, 1])
@pytest.mark.parametrize("scale", [0.5, 0.75, 1.6])
def test_bicubic_random_matches_pointwise_oracle(seed, scale):
    img = rand_image(seed, 10, 7, 3)
    out = bicubic_resize(img, scale)
    rng = np.random.default_rng(seed + 99)
    for _ in range(12):
        c = int(rng.integers(0, 3))
        yo = int(rng.integers(0, out.height))
        xo = int(rng.integers(0, out.width))
        want = ref_bicubic_point(img.data[c], yo, xo, scale)
        assert out.data[c, yo, xo] == pytest.approx(want, abs=1e-9)


@pytest.mark.parametrize("scale", [0.0, -0.5])
def test_bicubic_bad_scale(scale):
    with pytest.raises(ValueError):
        bicubic_resize(rand_image(0, 8, 8), scale)


def test_bicubic_collapse_to_zero_rejected():
    with pytest.raises(ValueError):
        bicubic_resize(rand_image(0, 8, 8), 0.01)


# ---------------------------------------------------------------------------
# Grayscale conversion
# ---------------------------------------------------------------------------

def test_to_gray_primaries():
    white = Image(np.ones((3, 2, 2)))
    assert np.allclose(to_gray(white).data, 1.0, atol=1e-12)
    red = np.zeros((3, 2, 2))
    red[0] = 1.0
    assert np.allclose(to_gray(Image(red)).data, 0.299, atol=1e-12)


def test_to_gray_passthrough():
    img = rand_image(4, 6, 6, channels=1)
    assert same_pixels(to_gray(img), img)


def test_to_gray_matches_weighted_sum_oracle():
    img = rand_image(8, 5, 9)
    gray = to_gray(img)
    assert gray.channels == 1
    for y in range(img.height):
        for x in range(img.width):
            want = ref_luma(img.data[0, y, x], img.data[1, y, x], img.data[2, y, x])
            assert gray.data[0, y, x] == pytest.approx(want, abs=1e-7)
