"""Blur-kernel pool: synthesis, persistence, and stride-subsampled cross-correlation."""
from __future__ import annotations

import math
import operator
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .fsutil import atomic_write_text, sha256_bytes
from .imgcore import Image

KERNEL_MAGIC = "KERN1"
SUM_TOLERANCE = 1e-6
RENORM_FLAG_THRESHOLD = 1e-3

# Pool defaults; the spatial support and pool size are configuration, not physics.
DEFAULT_POOL_SIZE = 64
DEFAULT_KERNEL_SIZE = 11
DEFAULT_SIGMA_RANGE = (0.5, 3.0)


class KernelParseError(Exception):
    """A kernel file is malformed; message carries the 1-based line number."""


def _odd_size(size) -> int:
    try:
        size = operator.index(size)
    except TypeError:
        raise ValueError(f"size must be an integer, got {size!r}") from None
    if size < 1 or size % 2 == 0:
        raise ValueError(f"size must be an odd integer >= 1, got {size}")
    return size


@dataclass(frozen=True)
class Kernel:
    """Square 2-D weight matrix with odd side length, normalized to sum 1."""

    weights: np.ndarray
    renormalized: bool = False  # set by load_kernel when the file sum was off by > 1e-3

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, order="C", copy=True)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"kernel must be square, got shape {w.shape}")
        if w.shape[0] % 2 == 0 or w.shape[0] < 1:
            raise ValueError(f"kernel side length must be odd and >= 1, got {w.shape[0]}")
        if not np.isfinite(w).all():
            raise ValueError("kernel contains non-finite weights")
        if abs(float(w.sum()) - 1.0) > SUM_TOLERANCE:
            raise ValueError(f"kernel weights must sum to 1 within {SUM_TOLERANCE}, got {w.sum()!r}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class KernelPool:
    """Ordered, immutable collection of blur kernels."""

    kernels: tuple[Kernel, ...]

    def __post_init__(self):
        ks = tuple(self.kernels)
        if len(ks) < 1:
            raise ValueError("kernel pool must contain at least one kernel")
        object.__setattr__(self, "kernels", ks)

    @property
    def count(self) -> int:
        return len(self.kernels)

    @property
    def max_size(self) -> int:
        return max(k.size for k in self.kernels)

    def digest(self) -> str:
        """Content hash of the pool (its canonical text serialization)."""
        return sha256_bytes(_serialize_pool(self).encode("utf-8"))


def gaussian_aniso_kernel(sigma_x: float, sigma_y: float, theta: float, size: int) -> Kernel:
    """Rotated anisotropic Gaussian sampled at integer offsets, normalized to sum 1.

    sigma_x is the spread along the x axis before rotation by theta
    (counter-clockwise, radians).
    """
    if sigma_x <= 0 or sigma_y <= 0:
        raise ValueError(f"sigmas must be positive, got ({sigma_x}, {sigma_y})")
    size = _odd_size(size)
    r = size // 2
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1].astype(np.float64)
    ct, st = math.cos(theta), math.sin(theta)
    u = ct * xx + st * yy
    v = -st * xx + ct * yy
    w = np.exp(-0.5 * ((u / sigma_x) ** 2 + (v / sigma_y) ** 2))
    return Kernel(w / w.sum())


def delta_kernel(size: int = 1) -> Kernel:
    """Identity kernel: centre weight 1, everything else 0."""
    size = _odd_size(size)
    w = np.zeros((size, size))
    w[size // 2, size // 2] = 1.0
    return Kernel(w)


def synth_kernel_pool(
    count: int = DEFAULT_POOL_SIZE,
    size: int = DEFAULT_KERNEL_SIZE,
    sigma_range: tuple[float, float] = DEFAULT_SIGMA_RANGE,
    seed: int = 0,
) -> KernelPool:
    """Pool of random anisotropic Gaussians: sigmas uniform in range, angle uniform in [0, pi)."""
    lo, hi = sigma_range
    if not (0 < lo <= hi):
        raise ValueError(f"invalid sigma range {sigma_range!r}")
    if count < 1:
        raise ValueError("pool size must be >= 1")
    rng = np.random.default_rng(seed)
    kernels = []
    for _ in range(count):
        sx = lo + (hi - lo) * rng.random()
        sy = lo + (hi - lo) * rng.random()
        theta = math.pi * rng.random()
        kernels.append(gaussian_aniso_kernel(sx, sy, theta, size))
    return KernelPool(tuple(kernels))


def downsample(img: Image, k: Kernel, s: int) -> Image:
    """Cross-correlate with the kernel (edge-clamped borders) and subsample at stride s.

    Subsampling starts at offset 0 (top-left); output dims are ceil(dims / s).
    """
    try:
        s = operator.index(s)
    except TypeError:
        raise ValueError(f"stride must be an integer, got {s!r}") from None
    if s < 1:
        raise ValueError(f"stride must be a positive integer, got {s}")
    if img.height < k.size or img.width < k.size:
        raise ValueError(
            f"image {img.height}x{img.width} smaller than kernel size {k.size}"
        )
    pad = k.size // 2
    padded = np.pad(img.data, ((0, 0), (pad, pad), (pad, pad)), mode="edge")
    windows = sliding_window_view(padded, (k.size, k.size), axis=(1, 2))
    out = np.einsum("chwij,ij->chw", windows[:, ::s, ::s], k.weights)
    return Image(np.clip(out, 0.0, 1.0))


def _serialize_kernel(k: Kernel) -> str:
    lines = [f"{KERNEL_MAGIC} {k.size}"]
    for row in k.weights:
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def _serialize_pool(pool: KernelPool) -> str:
    return "".join(_serialize_kernel(k) for k in pool.kernels)


def save_kernel(k: Kernel, path: str | Path) -> None:
    atomic_write_text(path, _serialize_kernel(k))


def save_kernel_pool(pool: KernelPool, path: str | Path) -> None:
    """Write a pool file: concatenated kernel records in the single-kernel text format."""
    atomic_write_text(path, _serialize_pool(pool))


def _parse_records(text: str, origin: str) -> list[Kernel]:
    lines = text.splitlines()
    kernels: list[Kernel] = []
    i = 0
    n = len(lines)
    while True:
        while i < n and (not lines[i].strip() or lines[i].lstrip().startswith("#")):
            i += 1
        if i >= n:
            break
        header = lines[i].split()
        if len(header) != 2 or header[0] != KERNEL_MAGIC:
            raise KernelParseError(f"{origin}:{i + 1}: expected '{KERNEL_MAGIC} <size>' header")
        try:
            size = int(header[1])
        except ValueError:
            raise KernelParseError(f"{origin}:{i + 1}: non-integer size {header[1]!r}") from None
        if size < 1 or size % 2 == 0:
            raise KernelParseError(f"{origin}:{i + 1}: size must be odd and >= 1, got {size}")
        i += 1
        rows = []
        for r in range(size):
            if i >= n:
                raise KernelParseError(f"{origin}:{i + 1}: unexpected end of file in kernel data")
            parts = lines[i].split()
            if len(parts) != size:
                raise KernelParseError(
                    f"{origin}:{i + 1}: expected {size} values, found {len(parts)}"
                )
            try:
                row = [float(p) for p in parts]
            except ValueError:
                raise KernelParseError(f"{origin}:{i + 1}: non-numeric kernel value") from None
            if any(math.isnan(v) or math.isinf(v) for v in row):
                raise KernelParseError(f"{origin}:{i + 1}: non-finite kernel value")
            rows.append(row)
            i += 1
        w = np.array(rows, dtype=np.float64)
        total = float(w.sum())
        if total == 0.0:
            raise KernelParseError(f"{origin}:{i}: kernel sums to zero, cannot normalize")
        flagged = abs(total - 1.0) > RENORM_FLAG_THRESHOLD
        kernels.append(Kernel(w / total, renormalized=flagged))
    return kernels


def load_kernel(path: str | Path) -> Kernel:
    """Read a single kernel; weights are renormalized to sum 1 on load.

    ``Kernel.renormalized`` records whether the stored sum was off by more
    than 1e-3.
    """
    path = Path(path)
    kernels = _parse_records(path.read_text(), str(path))
    if len(kernels) != 1:
        raise KernelParseError(f"{path}: expected exactly 1 kernel record, found {len(kernels)}")
    return kernels[0]


def load_kernel_pool(path: str | Path) -> KernelPool:
    path = Path(path)
    kernels = _parse_records(path.read_text(), str(path))
    if not kernels:
        raise KernelParseError(f"{path}: no kernel records found")
    return KernelPool(tuple(kernels))
