"""Image container, PNG/JPEG codec I/O, color conversion, and bicubic resampling.

Pixels live in floating point in [0, 1]; 8-bit integers appear only at the
codec boundaries. Layout is planar channel-major: an ``Image`` wraps an array
of shape ``(channels, height, width)``.
"""
from __future__ import annotations

import io
import math
import operator
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from .fsutil import atomic_write_bytes

# Catmull-Rom cubic; fixed so resampling is reproducible everywhere.
CUBIC_A = -0.5

# Rec. 601 luma coefficients.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class DecodeError(Exception):
    """An image file or byte stream could not be decoded."""


@dataclass(frozen=True)
class Image:
    """Immutable float raster in [0, 1], planar (channels, height, width)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, order="C", copy=True)
        if arr.ndim != 3:
            raise ValueError(f"image data must be 3-D (c, h, w), got shape {arr.shape}")
        if arr.shape[0] not in (1, 3):
            raise ValueError(f"channel count must be 1 or 3, got {arr.shape[0]}")
        if arr.shape[1] < 1 or arr.shape[2] < 1:
            raise ValueError(f"empty image: shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("image data contains non-finite samples")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("image data outside [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


def same_pixels(a: Image, b: Image) -> bool:
    """Bit-exact equality of two images."""
    return a.data.shape == b.data.shape and np.array_equal(a.data, b.data)


def to_uint8(img: Image) -> np.ndarray:
    """Quantize to 8 bit, (h, w) for gray or (h, w, 3) for RGB."""
    arr = np.rint(np.clip(img.data, 0.0, 1.0) * 255.0).astype(np.uint8)
    if arr.shape[0] == 1:
        return arr[0]
    return np.moveaxis(arr, 0, 2)


def from_uint8(arr: np.ndarray) -> Image:
    """Wrap an 8-bit (h, w) or (h, w, c) array, mapping v -> v/255."""
    a = np.asarray(arr)
    if a.ndim == 2:
        a = a[None, :, :]
    elif a.ndim == 3:
        a = np.moveaxis(a, 2, 0)
    else:
        raise ValueError(f"expected 2-D or 3-D uint8 array, got shape {a.shape}")
    return Image(a.astype(np.float64) / 255.0)


def _pil_to_image(pil: PILImage.Image, origin: str) -> Image:
    if pil.mode in ("RGBA", "P", "CMYK", "YCbCr"):
        pil = pil.convert("RGB")
    elif pil.mode in ("LA", "1"):
        pil = pil.convert("L")
    if pil.mode not in ("L", "RGB"):
        raise DecodeError(f"unsupported bit depth or colorspace ({pil.mode!r}) in {origin}")
    return from_uint8(np.asarray(pil, dtype=np.uint8))


def load_image(path: str | Path) -> Image:
    """Load a PNG or JPEG file; gray stays 1-channel, RGB(A) becomes 3 (alpha dropped)."""
    path = Path(path)
    try:
        with PILImage.open(path) as pil:
            pil.load()
            return _pil_to_image(pil, str(path))
    except (UnidentifiedImageError, OSError) as exc:
        raise DecodeError(f"cannot decode image {path}: {exc}") from exc


def save_png(img: Image, path: str | Path) -> None:
    """Write an 8-bit PNG atomically."""
    arr = to_uint8(img)
    mode = "L" if arr.ndim == 2 else "RGB"
    buf = io.BytesIO()
    PILImage.fromarray(arr, mode).save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def encode_jpeg(img: Image, quality: int) -> bytes:
    """Encode as baseline JPEG (4:2:0 subsampling for RGB) at the given quality."""
    try:
        quality = operator.index(quality)
    except TypeError:
        raise ValueError(f"jpeg quality must be an integer, got {quality!r}") from None
    if not 1 <= quality <= 100:
        raise ValueError(f"jpeg quality must be in [1, 100], got {quality}")
    arr = to_uint8(img)
    buf = io.BytesIO()
    if arr.ndim == 2:
        PILImage.fromarray(arr, "L").save(buf, format="JPEG", quality=quality)
    else:
        PILImage.fromarray(arr, "RGB").save(buf, format="JPEG", quality=quality, subsampling=2)
    return buf.getvalue()


def decode_jpeg(data: bytes) -> Image:
    """Decode a JPEG byte stream produced by encode_jpeg (or any baseline JPEG)."""
    try:
        with PILImage.open(io.BytesIO(data)) as pil:
            pil.load()
            return _pil_to_image(pil, "<jpeg stream>")
    except (UnidentifiedImageError, OSError) as exc:
        raise DecodeError(f"cannot decode JPEG stream: {exc}") from exc


def to_gray(img: Image) -> Image:
    """Rec. 601 luminance; 1-channel input passes through unchanged."""
    if img.channels == 1:
        return img
    r, g, b = img.data[0], img.data[1], img.data[2]
    y = LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b
    return Image(np.clip(y, 0.0, 1.0)[None, :, :])


def _cubic_weights(frac: np.ndarray) -> np.ndarray:
    """Catmull-Rom tap weights for the 4 neighbours at distances 1+f, f, 1-f, 2-f."""
    a = CUBIC_A

    def near(t):  # |t| <= 1
        return (a + 2.0) * t**3 - (a + 3.0) * t**2 + 1.0

    def far(t):  # 1 < |t| < 2
        return a * t**3 - 5.0 * a * t**2 + 8.0 * a * t - 4.0 * a

    return np.stack([far(1.0 + frac), near(frac), near(1.0 - frac), far(2.0 - frac)])


def _resample_1d(data: np.ndarray, axis: int, scale: float) -> np.ndarray:
    n_in = data.shape[axis]
    n_out = int(math.floor(n_in * scale + 0.5))
    if n_out < 1:
        raise ValueError(f"scale {scale} collapses axis of length {n_in} to zero")
    # Half-pixel-centre mapping; matches the usual resize convention.
    x = (np.arange(n_out) + 0.5) / scale - 0.5
    base = np.floor(x).astype(np.int64)
    frac = x - base
    weights = _cubic_weights(frac)  # (4, n_out)
    moved = np.moveaxis(data, axis, -1)
    out = np.zeros(moved.shape[:-1] + (n_out,), dtype=np.float64)
    for t in range(4):
        idx = np.clip(base - 1 + t, 0, n_in - 1)
        out += weights[t] * moved[..., idx]
    return np.moveaxis(out, -1, axis)


def bicubic_resize(img: Image, scale: float) -> Image:
    """Catmull-Rom bicubic resample (both axes) with edge-clamped sampling.

    Output size per axis is round(size * scale); samples are clamped to [0, 1].
    """
    if not (scale > 0) or not math.isfinite(scale):
        raise ValueError(f"scale must be positive and finite, got {scale!r}")
    out = _resample_1d(img.data, axis=1, scale=scale)
    out = _resample_1d(out, axis=2, scale=scale)
    return Image(np.clip(out, 0.0, 1.0))
