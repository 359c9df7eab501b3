"""Sensor-noise harvesting from smooth regions and tile-wise noise injection.

A window qualifies as smooth when every one of its sub-windows stays within a
relative band of the window's own mean and variance, and the window variance
clears a floor that rejects saturated/flat regions. Statistics are evaluated
on 8-bit-scaled luminance (samples x 255), so the variance floor is expressed
in squared 8-bit intensity units.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fsutil import atomic_write_bytes, sha256_bytes
from .imgcore import Image, to_gray

NOISE_POOL_MAGIC = b"NPOL1"
ZERO_MEAN_TOLERANCE = 1e-6


class NoisePoolFormatError(Exception):
    """A noise pool file is malformed."""


@dataclass(frozen=True)
class NoiseScanParams:
    """Knobs of the smooth-patch scan.

    phi is in squared 8-bit intensity units; stride defaults to patch_size
    (non-overlapping windows) when left as None.
    """

    patch_size: int = 32
    sub_size: int = 8
    mu: float = 0.1
    gamma: float = 0.25
    phi: float = 0.5
    stride: int | None = None

    def __post_init__(self):
        if not (0 < self.sub_size <= self.patch_size):
            raise ValueError(
                f"sub_size must satisfy 0 < q <= patch_size, got q={self.sub_size} p={self.patch_size}"
            )
        if self.mu <= 0 or self.gamma <= 0:
            raise ValueError("mu and gamma must be positive")
        if self.phi < 0:
            raise ValueError("phi must be >= 0")
        if self.stride is not None and self.stride < 1:
            raise ValueError("stride must be >= 1")

    @property
    def effective_stride(self) -> int:
        return self.patch_size if self.stride is None else self.stride


@dataclass(frozen=True)
class NoisePatch:
    """Zero-mean signed residual patch in image units.

    channel_means keeps the per-channel means subtracted at harvest time so a
    source window can be reconstructed; it is not persisted in pool files.
    """

    residuals: np.ndarray  # (channels, size, size)
    channel_means: tuple[float, ...] | None = None

    def __post_init__(self):
        arr = np.array(self.residuals, dtype=np.float64, order="C", copy=True)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ValueError(f"residuals must be (channels, size, size), got {arr.shape}")
        if arr.shape[0] not in (1, 3):
            raise ValueError(f"channel count must be 1 or 3, got {arr.shape[0]}")
        if not np.isfinite(arr).all():
            raise ValueError("residuals contain non-finite values")
        means = arr.mean(axis=(1, 2))
        if np.abs(means).max() > ZERO_MEAN_TOLERANCE:
            raise ValueError(f"residuals are not per-channel zero-mean: {means}")
        arr.setflags(write=False)
        object.__setattr__(self, "residuals", arr)

    @property
    def size(self) -> int:
        return self.residuals.shape[1]

    @property
    def channels(self) -> int:
        return self.residuals.shape[0]


@dataclass(frozen=True)
class NoisePool:
    """Ordered collection of same-shaped noise patches."""

    patches: tuple[NoisePatch, ...]

    def __post_init__(self):
        ps = tuple(self.patches)
        if ps:
            size, chans = ps[0].size, ps[0].channels
            for i, p in enumerate(ps):
                if p.size != size or p.channels != chans:
                    raise ValueError(
                        f"patch {i} shape ({p.channels},{p.size}) differs from pool shape ({chans},{size})"
                    )
        object.__setattr__(self, "patches", ps)

    @property
    def count(self) -> int:
        return len(self.patches)

    @property
    def patch_size(self) -> int:
        if not self.patches:
            raise ValueError("empty pool has no patch size")
        return self.patches[0].size

    @property
    def channels(self) -> int:
        if not self.patches:
            raise ValueError("empty pool has no channel count")
        return self.patches[0].channels

    def digest(self) -> str:
        """Content hash of the pool (its binary serialization)."""
        return sha256_bytes(serialize_noise_pool(self))


def patch_stats(window: np.ndarray) -> tuple[float, float]:
    """Arithmetic mean and population variance (divide by N) of a sample window."""
    w = np.asarray(window, dtype=np.float64)
    if w.size == 0:
        raise ValueError("empty window")
    return float(w.mean()), float(w.var())


def is_smooth(window: np.ndarray, params: NoiseScanParams) -> bool:
    """Smoothness test on a luminance window in [0, 1] units.

    The window is scaled by 255 before the statistics; sub-windows are tiled
    at stride sub_size. Every sub-window must stay within mu/gamma of the
    window mean/variance, and the window variance must reach phi.
    """
    p = params.patch_size
    w = np.asarray(window, dtype=np.float64)
    if w.shape != (p, p):
        raise ValueError(f"window must be {p}x{p}, got {w.shape}")
    w8 = w * 255.0
    mean_p, var_p = patch_stats(w8)
    if var_p < params.phi:
        return False
    q = params.sub_size
    for y in range(0, p - q + 1, q):
        for x in range(0, p - q + 1, q):
            mean_q, var_q = patch_stats(w8[y : y + q, x : x + q])
            if abs(mean_q - mean_p) > params.mu * mean_p:
                return False
            if abs(var_q - var_p) > params.gamma * var_p:
                return False
    return True


def scan_noise_patches(img: Image, params: NoiseScanParams | None = None) -> list[NoisePatch]:
    """Harvest zero-mean residual patches from every smooth window of the image.

    Windows are visited in row-major scan order at the configured stride;
    smoothness is judged on luminance, mean subtraction is per channel.
    """
    params = params or NoiseScanParams()
    p = params.patch_size
    if img.height < p or img.width < p:
        return []
    lum = to_gray(img).data[0]
    stride = params.effective_stride
    out: list[NoisePatch] = []
    for y in range(0, img.height - p + 1, stride):
        for x in range(0, img.width - p + 1, stride):
            if not is_smooth(lum[y : y + p, x : x + p], params):
                continue
            window = img.data[:, y : y + p, x : x + p]
            means = window.mean(axis=(1, 2))
            out.append(
                NoisePatch(window - means[:, None, None], channel_means=tuple(float(m) for m in means))
            )
    return out


def draw_noise_indices(
    height: int, width: int, patch_size: int, pool_count: int, rng: np.random.Generator
) -> np.ndarray:
    """One uniform pool index per patch_size tile, drawn in row-major tile order."""
    if pool_count < 1:
        raise ValueError("noise pool is empty")
    ty = -(-height // patch_size)
    tx = -(-width // patch_size)
    return rng.integers(0, pool_count, size=(ty, tx))


def add_noise_tiles(img: Image, pool: NoisePool, indices: np.ndarray) -> Image:
    """Add the indexed patch to each tile (cropped at right/bottom borders), clamp to [0, 1]."""
    if pool.count < 1:
        raise ValueError("noise pool is empty")
    if pool.channels != img.channels:
        raise ValueError(
            f"pool has {pool.channels} channels but image has {img.channels}"
        )
    ps = pool.patch_size
    idx = np.asarray(indices)
    ty = -(-img.height // ps)
    tx = -(-img.width // ps)
    if idx.shape != (ty, tx):
        raise ValueError(f"expected {ty}x{tx} tile indices, got {idx.shape}")
    out = img.data.copy()
    for ti in range(ty):
        for tj in range(tx):
            patch = pool.patches[int(idx[ti, tj])]
            y0, x0 = ti * ps, tj * ps
            y1, x1 = min(y0 + ps, img.height), min(x0 + ps, img.width)
            out[:, y0:y1, x0:x1] += patch.residuals[:, : y1 - y0, : x1 - x0]
    return Image(np.clip(out, 0.0, 1.0))


def inject_noise(img: Image, pool: NoisePool, rng: np.random.Generator) -> Image:
    """Add an independently drawn random pool patch to every patch-size tile."""
    indices = draw_noise_indices(img.height, img.width, pool.patch_size, pool.count, rng)
    return add_noise_tiles(img, pool, indices)


def serialize_noise_pool(pool: NoisePool) -> bytes:
    """Binary pool format: magic, u32 count, then per patch u16 size / u8 channels / f32 residuals."""
    parts = [NOISE_POOL_MAGIC, struct.pack("<I", pool.count)]
    for p in pool.patches:
        parts.append(struct.pack("<HB", p.size, p.channels))
        parts.append(p.residuals.astype("<f4").tobytes())
    return b"".join(parts)


def save_noise_pool(pool: NoisePool, path: str | Path) -> None:
    atomic_write_bytes(path, serialize_noise_pool(pool))


def load_noise_pool(path: str | Path) -> NoisePool:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 9 or data[:5] != NOISE_POOL_MAGIC:
        raise NoisePoolFormatError(f"{path}: bad magic, not a noise pool file")
    (count,) = struct.unpack_from("<I", data, 5)
    offset = 9
    patches = []
    for i in range(count):
        if offset + 3 > len(data):
            raise NoisePoolFormatError(f"{path}: truncated header for patch {i}")
        size, channels = struct.unpack_from("<HB", data, offset)
        offset += 3
        n = size * size * channels
        end = offset + 4 * n
        if end > len(data):
            raise NoisePoolFormatError(f"{path}: truncated residual data for patch {i}")
        flat = np.frombuffer(data, dtype="<f4", count=n, offset=offset)
        offset = end
        try:
            patches.append(NoisePatch(flat.astype(np.float64).reshape(channels, size, size)))
        except ValueError as exc:
            raise NoisePoolFormatError(f"{path}: invalid patch {i}: {exc}") from exc
    if offset != len(data):
        raise NoisePoolFormatError(f"{path}: {len(data) - offset} trailing bytes")
    return NoisePool(tuple(patches))
