"""Full-reference image quality metrics and the composite perceptual index.

PSNR/SSIM/MS-SSIM follow their standard definitions on luminance with a
dynamic range of 1.0. The pyramid distance normalizes each band by a local
average of its magnitudes before comparing. The patch-similarity distance
works on any deterministic multi-layer feature extractor; a seed-fixed random
convolution bank ships as the default, and real pretrained filters can be
loaded from an .npz file.
"""
from __future__ import annotations

import abc
import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .fsutil import atomic_write_bytes
from .imgcore import Image, load_image, to_gray

SSIM_WINDOW_SIZE = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)

# Pyramid band-normalization constants, one per level; the last belongs to the
# low-pass residual.
NLPD_LEVEL_CONSTANTS = (0.0248, 0.0185, 0.0179, 0.0191, 0.0220, 0.2782)
NLPD_MAX_LEVELS = 6

_PYR_1D = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
PYRAMID_FILTER = np.outer(_PYR_1D, _PYR_1D)

LPIPS_NORM_EPS = 1e-10


def _require_same_shape(a: Image, b: Image) -> None:
    if a.data.shape != b.data.shape:
        raise ValueError(
            f"image shape mismatch: {a.data.shape} vs {b.data.shape}"
        )


# ---------------------------------------------------------------------------
# PSNR
# ---------------------------------------------------------------------------

def psnr(a: Image, b: Image) -> float:
    """10*log10(1/MSE) over all samples with peak 1.0; +inf for identical images."""
    _require_same_shape(a, b)
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


# ---------------------------------------------------------------------------
# SSIM / MS-SSIM
# ---------------------------------------------------------------------------

def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = size // 2
    g = np.exp(-0.5 * ((np.arange(size) - r) / sigma) ** 2)
    w = np.outer(g, g)
    return w / w.sum()

_SSIM_WINDOW = _gaussian_window(SSIM_WINDOW_SIZE, SSIM_SIGMA)


def _filter_valid(x: np.ndarray, win: np.ndarray) -> np.ndarray:
    return np.einsum("hwij,ij->hw", sliding_window_view(x, win.shape), win)


def _ssim_maps(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-window luminance*contrast-structure map and contrast-structure map."""
    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2
    w = _SSIM_WINDOW
    mux = _filter_valid(x, w)
    muy = _filter_valid(y, w)
    sxx = _filter_valid(x * x, w) - mux * mux
    syy = _filter_valid(y * y, w) - muy * muy
    sxy = _filter_valid(x * y, w) - mux * muy
    cs = (2.0 * sxy + c2) / (sxx + syy + c2)
    lum = (2.0 * mux * muy + c1) / (mux * mux + muy * muy + c1)
    return lum * cs, cs


def _luminance_2d(img: Image) -> np.ndarray:
    return to_gray(img).data[0]


def ssim(a: Image, b: Image) -> float:
    """Mean structural similarity over valid 11x11 Gaussian windows on luminance."""
    _require_same_shape(a, b)
    if min(a.height, a.width) < SSIM_WINDOW_SIZE:
        raise ValueError(
            f"image {a.height}x{a.width} smaller than the {SSIM_WINDOW_SIZE}x{SSIM_WINDOW_SIZE} window"
        )
    full, _ = _ssim_maps(_luminance_2d(a), _luminance_2d(b))
    return float(full.mean())


def _halve(x: np.ndarray) -> np.ndarray:
    """Dyadic low-pass downsampling: 2x2 average pooling, odd edge cropped."""
    h, w = (x.shape[0] // 2) * 2, (x.shape[1] // 2) * 2
    c = x[:h, :w]
    return 0.25 * (c[0::2, 0::2] + c[0::2, 1::2] + c[1::2, 0::2] + c[1::2, 1::2])


def ms_ssim_max_scales(height: int, width: int) -> int:
    """Largest usable scale count (capped at 5) for the given dimensions."""
    n = 1
    while n < 5 and min(height, width) >= SSIM_WINDOW_SIZE * (2 ** n):
        n += 1
    return n


def ms_ssim(a: Image, b: Image, scales: int = 5) -> float:
    """Multi-scale SSIM with the standard exponents, renormalized for fewer scales.

    Contrast-structure means weigh the finer scales; the full SSIM term enters
    only at the coarsest scale. Negative per-scale means are clamped to zero
    before exponentiation (fractional powers are otherwise undefined). With
    one scale the value is exactly the single-scale index.
    """
    _require_same_shape(a, b)
    if not 1 <= scales <= 5:
        raise ValueError(f"scales must be in [1, 5], got {scales}")
    need = SSIM_WINDOW_SIZE * (2 ** (scales - 1))
    if min(a.height, a.width) < need:
        raise ValueError(
            f"image {a.height}x{a.width} too small for {scales} scales (needs >= {need})"
        )
    x, y = _luminance_2d(a), _luminance_2d(b)
    if scales == 1:
        full, _ = _ssim_maps(x, y)
        return float(full.mean())
    weights = np.array(MS_SSIM_WEIGHTS[:scales])
    weights = weights / weights.sum()
    result = 1.0
    for level in range(scales - 1):
        _, cs = _ssim_maps(x, y)
        result *= max(0.0, float(cs.mean())) ** weights[level]
        x, y = _halve(x), _halve(y)
    full, _ = _ssim_maps(x, y)
    result *= max(0.0, float(full.mean())) ** weights[scales - 1]
    return float(result)


# ---------------------------------------------------------------------------
# Normalized Laplacian pyramid distance
# ---------------------------------------------------------------------------

def _correlate2d(x: np.ndarray, k: np.ndarray, pad_mode: str) -> np.ndarray:
    ph, pw = k.shape[0] // 2, k.shape[1] // 2
    padded = np.pad(x, ((ph, ph), (pw, pw)), mode=pad_mode)
    return np.einsum("hwij,ij->hw", sliding_window_view(padded, k.shape), k)


def _pyr_down(x: np.ndarray) -> np.ndarray:
    return _correlate2d(x, PYRAMID_FILTER, "reflect")[::2, ::2]


def _pyr_up(x: np.ndarray, target_shape: tuple[int, int]) -> np.ndarray:
    stuffed = np.zeros((x.shape[0] * 2, x.shape[1] * 2))
    stuffed[::2, ::2] = x
    up = _correlate2d(stuffed, 4.0 * PYRAMID_FILTER, "reflect")
    return up[: target_shape[0], : target_shape[1]]


def nlpd_levels(height: int, width: int, max_levels: int = NLPD_MAX_LEVELS) -> int:
    """Number of pyramid levels (band-pass plus one low-pass residual)."""
    levels, h, w = 1, height, width
    while levels < max_levels and min(h, w) >= 8:
        h, w = (h + 1) // 2, (w + 1) // 2
        levels += 1
    return levels


def _normalized_pyramid(x: np.ndarray, levels: int) -> list[np.ndarray]:
    bands = []
    current = x
    for _ in range(levels - 1):
        down = _pyr_down(current)
        bands.append(current - _pyr_up(down, current.shape))
        current = down
    bands.append(current)  # low-pass residual
    out = []
    for i, band in enumerate(bands):
        sigma = NLPD_LEVEL_CONSTANTS[i] if i < levels - 1 else NLPD_LEVEL_CONSTANTS[-1]
        local = _correlate2d(np.abs(band), np.full((3, 3), 1.0 / 9.0), "edge")
        out.append(band / (sigma + local))
    return out


def nlpd(a: Image, b: Image) -> float:
    """Laplacian-pyramid distance with divisively normalized bands on luminance.

    Six levels, or as many as the image size supports; per level the RMS band
    difference, averaged across levels.
    """
    _require_same_shape(a, b)
    levels = nlpd_levels(a.height, a.width)
    pa = _normalized_pyramid(_luminance_2d(a), levels)
    pb = _normalized_pyramid(_luminance_2d(b), levels)
    per_level = [math.sqrt(float(np.mean((na - nb) ** 2))) for na, nb in zip(pa, pb)]
    return float(np.mean(per_level))


# ---------------------------------------------------------------------------
# Feature-space patch similarity
# ---------------------------------------------------------------------------

class FeatureExtractor(abc.ABC):
    """Deterministic multi-layer feature maps with per-layer channel weights."""

    @property
    @abc.abstractmethod
    def num_layers(self) -> int: ...

    @abc.abstractmethod
    def features(self, img: Image) -> list[np.ndarray]:
        """Per-layer feature stacks, each shaped (channels, height, width)."""

    @abc.abstractmethod
    def layer_weights(self) -> list[np.ndarray]:
        """Per-layer non-negative channel weight vectors."""


class IdentityExtractor(FeatureExtractor):
    """Single layer whose features are the raw pixels; weights all ones."""

    def __init__(self, channels: int = 3):
        self._channels = channels

    @property
    def num_layers(self) -> int:
        return 1

    def features(self, img: Image) -> list[np.ndarray]:
        if img.channels != self._channels:
            raise ValueError(f"extractor expects {self._channels}-channel images")
        return [img.data]

    def layer_weights(self) -> list[np.ndarray]:
        return [np.ones(self._channels)]


def _avg_pool2_chw(x: np.ndarray) -> np.ndarray:
    h, w = (x.shape[1] // 2) * 2, (x.shape[2] // 2) * 2
    c = x[:, :h, :w]
    return 0.25 * (c[:, 0::2, 0::2] + c[:, 0::2, 1::2] + c[:, 1::2, 0::2] + c[:, 1::2, 1::2])


class ConvBankExtractor(FeatureExtractor):
    """Fixed convolution filter banks applied at successive dyadic scales.

    Gray inputs are replicated to 3 channels so one bank serves both kinds.
    """

    def __init__(self, banks: list[np.ndarray], taus: list[np.ndarray]):
        if len(banks) != len(taus) or not banks:
            raise ValueError("need one tau vector per filter bank")
        self._banks = []
        self._taus = []
        for i, (bank, tau) in enumerate(zip(banks, taus)):
            bank = np.asarray(bank, dtype=np.float64)
            tau = np.asarray(tau, dtype=np.float64)
            if bank.ndim != 4 or bank.shape[1] != 3:
                raise ValueError(f"bank {i} must be (filters, 3, kh, kw), got {bank.shape}")
            if bank.shape[2] % 2 == 0 or bank.shape[3] % 2 == 0:
                raise ValueError(f"bank {i} filter size must be odd, got {bank.shape[2:]}")
            if tau.shape != (bank.shape[0],):
                raise ValueError(f"tau {i} must have one weight per filter")
            if (tau < 0).any():
                raise ValueError(f"tau {i} contains negative weights")
            self._banks.append(bank)
            self._taus.append(tau)

    @property
    def num_layers(self) -> int:
        return len(self._banks)

    def features(self, img: Image) -> list[np.ndarray]:
        x = img.data if img.channels == 3 else np.repeat(img.data, 3, axis=0)
        feats = []
        for level, bank in enumerate(self._banks):
            if level > 0:
                if min(x.shape[1], x.shape[2]) < 2:
                    raise ValueError("image too small for the extractor's scale count")
                x = _avg_pool2_chw(x)
            kh, kw = bank.shape[2], bank.shape[3]
            if x.shape[1] < kh or x.shape[2] < kw:
                raise ValueError("image too small for the extractor's filters")
            padded = np.pad(x, ((0, 0), (kh // 2, kh // 2), (kw // 2, kw // 2)), mode="reflect")
            windows = sliding_window_view(padded, (kh, kw), axis=(1, 2))
            feats.append(np.einsum("chwij,fcij->fhw", windows, bank))
        return feats

    def layer_weights(self) -> list[np.ndarray]:
        return [t.copy() for t in self._taus]


def default_feature_extractor(
    layers: int = 3, filters: int = 8, ksize: int = 5, seed: int = 0x5EEDF00D
) -> ConvBankExtractor:
    """Seed-fixed random filter banks: a deterministic desk-scale feature extractor."""
    rng = np.random.default_rng(seed)
    scale = 1.0 / math.sqrt(3 * ksize * ksize)
    banks = [rng.standard_normal((filters, 3, ksize, ksize)) * scale for _ in range(layers)]
    taus = [np.ones(filters) for _ in range(layers)]
    return ConvBankExtractor(banks, taus)


def save_feature_extractor(fx: ConvBankExtractor, path: str | Path) -> None:
    arrays = {"num_layers": np.array(fx.num_layers)}
    for i, (bank, tau) in enumerate(zip(fx._banks, fx._taus)):
        arrays[f"layer{i}_filters"] = bank
        arrays[f"layer{i}_tau"] = tau
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    atomic_write_bytes(path, buf.getvalue())


def load_feature_extractor(path: str | Path) -> ConvBankExtractor:
    """Load substitute filter banks (e.g. exported pretrained weights) from .npz."""
    with np.load(path) as z:
        n = int(z["num_layers"])
        banks = [z[f"layer{i}_filters"] for i in range(n)]
        taus = [z[f"layer{i}_tau"] for i in range(n)]
    return ConvBankExtractor(banks, taus)


def lpips(a: Image, b: Image, fx: FeatureExtractor | None = None, literal: bool = False) -> float:
    """Feature-space patch distance, averaged over extractor layers.

    Default form: channel-unit-normalize each layer's features at every
    spatial position, take the tau-weighted sum of squared differences, and
    average spatially. ``literal=True`` skips normalization and squaring and
    compares raw feature differences instead.
    """
    _require_same_shape(a, b)
    fx = fx or default_feature_extractor()
    fa = fx.features(a)
    fb = fx.features(b)
    taus = fx.layer_weights()
    total = 0.0
    for xa, xb, tau in zip(fa, fb, taus):
        if literal:
            diff = xa - xb
        else:
            na = xa / (np.sqrt((xa * xa).sum(axis=0, keepdims=True)) + LPIPS_NORM_EPS)
            nb = xb / (np.sqrt((xb * xb).sum(axis=0, keepdims=True)) + LPIPS_NORM_EPS)
            diff = (na - nb) ** 2
        weighted = np.tensordot(tau, diff, axes=(0, 0))
        total += float(weighted.mean())
    return total / fx.num_layers


# ---------------------------------------------------------------------------
# Composite perceptual index over external no-reference scores
# ---------------------------------------------------------------------------

def perceptual_index(niqe: float, nrqm: float) -> float:
    """((10 - nrqm) + niqe) / 2; lower is better."""
    if not (math.isfinite(niqe) and math.isfinite(nrqm)):
        raise ValueError(f"scores must be finite, got niqe={niqe!r} nrqm={nrqm!r}")
    return ((10.0 - nrqm) + niqe) / 2.0


# ---------------------------------------------------------------------------
# Report assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricReport:
    """Per-image metric scores plus per-metric mean and standard deviation."""

    per_image: dict
    means: dict
    stds: dict

    @staticmethod
    def from_scores(per_image: dict) -> "MetricReport":
        metric_names: list[str] = []
        for scores in per_image.values():
            for name in scores:
                if name not in metric_names:
                    metric_names.append(name)
        means, stds = {}, {}
        for name in metric_names:
            vals = np.array([scores[name] for scores in per_image.values()])
            means[name] = float(vals.mean())
            with np.errstate(invalid="ignore"):  # std over +inf sentinels is nan
                stds[name] = float(vals.std())
        return MetricReport(per_image=dict(per_image), means=means, stds=stds)

    @property
    def metric_names(self) -> list[str]:
        return list(self.means.keys())


def read_nr_scores(path: str | Path) -> dict:
    """CSV with header image,niqe,nrqm -> {image: (niqe, nrqm)}."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["image", "niqe", "nrqm"]:
            raise ValueError(f"{path}: expected header 'image,niqe,nrqm', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            try:
                out[row[0]] = (float(row[1]), float(row[2]))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric score") from None
    return out


def _stems(directory: Path) -> dict:
    mapping = {}
    for p in sorted(directory.iterdir()):
        if p.is_file() and p.suffix.lower() in (".png", ".jpg", ".jpeg"):
            if p.stem in mapping:
                raise ValueError(f"duplicate stem {p.stem!r} in {directory}")
            mapping[p.stem] = p
    return mapping


def evaluate_directories(
    sr_dir: str | Path,
    gt_dir: str | Path,
    fx: FeatureExtractor | None = None,
    nr_scores: dict | None = None,
) -> MetricReport:
    """Score every SR image against the GT image with the same filename stem."""
    sr_map = _stems(Path(sr_dir))
    gt_map = _stems(Path(gt_dir))
    if not sr_map:
        raise ValueError(f"no images in {sr_dir}")
    missing = sorted(set(sr_map) ^ set(gt_map))
    if missing:
        raise ValueError(f"stems not present in both directories: {missing}")
    fx = fx or default_feature_extractor()

    pairs = {stem: (load_image(sr_map[stem]), load_image(gt_map[stem])) for stem in sorted(sr_map)}
    scales = min(ms_ssim_max_scales(a.height, a.width) for a, _ in pairs.values())

    per_image = {}
    for stem, (sr, gt) in pairs.items():
        scores = {
            "psnr": psnr(sr, gt),
            "ssim": ssim(sr, gt),
            "ms_ssim": ms_ssim(sr, gt, scales=scales),
            "nlpd": nlpd(sr, gt),
            "lpips": lpips(sr, gt, fx),
        }
        if nr_scores is not None:
            if stem not in nr_scores:
                raise ValueError(f"no-reference scores missing entry for {stem!r}")
            scores["pi"] = perceptual_index(*nr_scores[stem])
        per_image[stem] = scores
    return MetricReport.from_scores(per_image)


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return f"{v:.6f}"


def write_report_csv(report: MetricReport, path: str | Path) -> None:
    """One row per image plus a trailing mean row."""
    names = report.metric_names
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["image"] + names)
    for stem in sorted(report.per_image):
        writer.writerow([stem] + [_fmt(report.per_image[stem][n]) for n in names])
    writer.writerow(["mean"] + [_fmt(report.means[n]) for n in names])
    atomic_write_bytes(path, buf.getvalue().encode("utf-8"))
