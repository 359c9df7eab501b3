"""Forward values of the generator training-loss components and their combination.

Only values, no gradients: backprop belongs to whatever training framework
consumes these.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imgcore import Image


@dataclass(frozen=True)
class LossWeights:
    lambda_pix: float = 0.01
    lambda_adv: float = 0.005
    lambda_lpips: float = 0.001

    def __post_init__(self):
        if self.lambda_pix < 0 or self.lambda_adv < 0 or self.lambda_lpips < 0:
            raise ValueError("loss weights must be non-negative")


def pixel_loss(gen: Image, gt: Image) -> float:
    """Mean absolute difference (L1) over all samples."""
    if gen.data.shape != gt.data.shape:
        raise ValueError(f"shape mismatch: {gen.data.shape} vs {gt.data.shape}")
    return float(np.mean(np.abs(gen.data - gt.data)))


def _check_grid(name: str, grid: np.ndarray) -> np.ndarray:
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 2 or g.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D logit grid, got shape {g.shape}")
    if not np.isfinite(g).all():
        raise ValueError(f"{name} contains non-finite logits")
    return g


def adv_gen_loss(fake: np.ndarray, real: np.ndarray) -> float:
    """Relativistic-average generator loss over a grid of patch logits.

    Per patch: softplus(-(fake - mean(real))) + softplus(real - mean(fake)),
    averaged over the grid. Softplus is computed overflow-safely.
    """
    f = _check_grid("fake", fake)
    r = _check_grid("real", real)
    if f.shape != r.shape:
        raise ValueError(f"grid shape mismatch: {f.shape} vs {r.shape}")

    def softplus(x):
        return np.logaddexp(0.0, x)

    per_patch = softplus(-(f - r.mean())) + softplus(r - f.mean())
    return float(per_patch.mean())


def generator_loss(l_pix: float, l_adv: float, l_lpips: float, w: LossWeights = LossWeights()) -> float:
    """Weighted sum of the three loss components."""
    for name, v in ("l_pix", l_pix), ("l_adv", l_adv), ("l_lpips", l_lpips):
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")
    return w.lambda_pix * l_pix + w.lambda_adv * l_adv + w.lambda_lpips * l_lpips
