"""End-to-end degradation pipeline: blur+subsample, noise injection, JPEG artifacts.

Stages compose in that fixed order. Every random draw is taken from a
per-image generator seeded by a stable hash, so dataset generation is
reproducible and independent of traversal or parallelization order.
"""
from __future__ import annotations

import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .fsutil import atomic_write_text
from .imgcore import (
    DecodeError,
    Image,
    bicubic_resize,
    decode_jpeg,
    encode_jpeg,
    from_uint8,
    load_image,
    save_png,
    to_uint8,
)
from .kernels import KernelPool, downsample
from .noise import NoisePool, add_noise_tiles, draw_noise_indices

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


@dataclass(frozen=True)
class DegradationConfig:
    """All knobs of the degradation model plus seeding."""

    scale: int = 4
    jpeg_quality: int = 30
    jpeg_probability: float = 0.9
    noise_enabled: bool = True
    augment_scales: tuple[float, ...] = (1.0, 0.75, 0.5, 0.25)
    global_seed: int = 0

    def __post_init__(self):
        if self.scale < 1:
            raise ValueError(f"scale must be >= 1, got {self.scale}")
        if not 1 <= self.jpeg_quality <= 100:
            raise ValueError(f"jpeg_quality must be in [1, 100], got {self.jpeg_quality}")
        if not 0.0 <= self.jpeg_probability <= 1.0:
            raise ValueError(f"jpeg_probability must be in [0, 1], got {self.jpeg_probability}")
        scales = tuple(float(s) for s in self.augment_scales)
        if not scales or any(not 0.0 < s <= 1.0 for s in scales):
            raise ValueError(f"augment scales must lie in (0, 1], got {scales}")
        object.__setattr__(self, "augment_scales", scales)


@dataclass(frozen=True)
class DegradationRecord:
    """Reproducibility ledger for one generated LR image.

    Together with the pools and config this fully determines the LR output.
    """

    kernel_index: int
    noise_indices: tuple[tuple[int, ...], ...]  # per-tile pool indices, row-major
    jpeg_applied: bool
    source_path: str = ""
    augment_scale: float = 1.0
    derived_seed: int = 0

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["noise_indices"] = [list(row) for row in self.noise_indices]
        return d

    @staticmethod
    def from_json_dict(d: dict) -> "DegradationRecord":
        return DegradationRecord(
            kernel_index=int(d["kernel_index"]),
            noise_indices=tuple(tuple(int(i) for i in row) for row in d["noise_indices"]),
            jpeg_applied=bool(d["jpeg_applied"]),
            source_path=str(d.get("source_path", "")),
            augment_scale=float(d.get("augment_scale", 1.0)),
            derived_seed=int(d.get("derived_seed", 0)),
        )


def derive_seed(global_seed: int, rel_path: str, augment_scale: float) -> int:
    """Stable 64-bit per-image seed from (global seed, relative path, augment scale)."""
    key = f"{global_seed}|{rel_path}|{augment_scale!r}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


def _check_hr(hr: Image, kpool: KernelPool, scale: int) -> None:
    need = max(kpool.max_size, scale)
    if hr.height < need or hr.width < need:
        raise ValueError(
            f"HR image {hr.height}x{hr.width} too small for kernel size "
            f"{kpool.max_size} and scale {scale}"
        )


def degrade_image(
    hr: Image,
    kpool: KernelPool,
    npool: NoisePool | None,
    cfg: DegradationConfig,
    rng: np.random.Generator,
) -> tuple[Image, DegradationRecord]:
    """Produce one LR image: blur+subsample, add a noise tile per block, maybe JPEG.

    Draw order is fixed: kernel index, then tile noise indices (when noise is
    enabled), then one JPEG Bernoulli.
    """
    _check_hr(hr, kpool, cfg.scale)
    kernel_index = int(rng.integers(0, kpool.count))
    lr = downsample(hr, kpool.kernels[kernel_index], cfg.scale)
    noise_indices: tuple[tuple[int, ...], ...] = ()
    if cfg.noise_enabled:
        if npool is None or npool.count < 1:
            raise ValueError("noise is enabled but the noise pool is empty")
        idx = draw_noise_indices(lr.height, lr.width, npool.patch_size, npool.count, rng)
        lr = add_noise_tiles(lr, npool, idx)
        noise_indices = tuple(tuple(int(v) for v in row) for row in idx)
    jpeg_applied = bool(rng.random() < cfg.jpeg_probability)
    if jpeg_applied:
        lr = decode_jpeg(encode_jpeg(lr, cfg.jpeg_quality))
    rec = DegradationRecord(
        kernel_index=kernel_index,
        noise_indices=noise_indices,
        jpeg_applied=jpeg_applied,
    )
    return lr, rec


def replay_record(
    hr: Image,
    kpool: KernelPool,
    npool: NoisePool | None,
    cfg: DegradationConfig,
    rec: DegradationRecord,
) -> Image:
    """Re-run the pipeline stages from a record; bit-identical to the recorded run."""
    _check_hr(hr, kpool, cfg.scale)
    lr = downsample(hr, kpool.kernels[rec.kernel_index], cfg.scale)
    if rec.noise_indices:
        if npool is None or npool.count < 1:
            raise ValueError("record contains noise indices but no pool was given")
        lr = add_noise_tiles(lr, npool, np.array(rec.noise_indices, dtype=np.int64))
    if rec.jpeg_applied:
        lr = decode_jpeg(encode_jpeg(lr, cfg.jpeg_quality))
    return lr


def add_gaussian_noise(img: Image, sigma: float, rng: np.random.Generator) -> Image:
    """Add i.i.d. zero-mean Gaussian noise; sigma is in 8-bit intensity units."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    noisy = img.data + rng.standard_normal(img.data.shape) * (sigma / 255.0)
    return Image(np.clip(noisy, 0.0, 1.0))


def synthetic_corrupt(
    hr: Image,
    kpool: KernelPool,
    sigma: float,
    jpeg_quality: int,
    rng: np.random.Generator,
    scale: int = 4,
) -> Image:
    """Ground-truth-friendly corruption: pool blur + Gaussian noise + unconditional JPEG."""
    _check_hr(hr, kpool, scale)
    kernel_index = int(rng.integers(0, kpool.count))
    lr = downsample(hr, kpool.kernels[kernel_index], scale)
    lr = add_gaussian_noise(lr, sigma, rng)
    return decode_jpeg(encode_jpeg(lr, jpeg_quality))


def _mod_crop(img: Image, s: int) -> Image:
    h = img.height - img.height % s
    w = img.width - img.width % s
    if h == img.height and w == img.width:
        return img
    return Image(img.data[:, :h, :w])


def _list_images(directory: Path) -> list[Path]:
    files = [
        p
        for p in sorted(directory.iterdir())
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    ]
    seen: dict[str, Path] = {}
    for p in files:
        if p.stem in seen:
            raise ValueError(
                f"duplicate stem {p.stem!r} in {directory} ({seen[p.stem].name} vs {p.name}): "
                "output names would collide"
            )
        seen[p.stem] = p
    return files


def _scale_tag(scale: float) -> str:
    return f"{scale:g}"


def generate_pairs(
    hq_dir: str | Path,
    kpool: KernelPool,
    npool: NoisePool | None,
    cfg: DegradationConfig,
    out_dir: str | Path,
    jobs: int = 1,
    verbose: bool = False,
) -> dict:
    """Materialize HR/LR pairs for every HQ image at every augment scale.

    HR is the bicubic-rescaled HQ cropped to a multiple of the scale factor;
    file names follow ``<stem>_x<scale>_{hr,lr}.png``. Returns the manifest,
    which is also written to ``out_dir/manifest.json``.
    """
    hq_dir, out_dir = Path(hq_dir), Path(out_dir)
    files = _list_images(hq_dir)
    if not files:
        raise ValueError(f"no decodable images (*.png, *.jpg, *.jpeg) in {hq_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)

    tasks = [(path, s) for path in files for s in cfg.augment_scales]

    def run_task(task: tuple[Path, float]):
        path, aug = task
        rel = path.name
        try:
            hq = load_image(path)
        except DecodeError as exc:
            return ("skip", {"source_path": rel, "augment_scale": aug, "reason": str(exc)})
        try:
            # Snap HR to 8 bit first: the degradation then consumes exactly the
            # image that lands in the HR PNG, so records replay from the files.
            hr = from_uint8(to_uint8(_mod_crop(bicubic_resize(hq, aug), cfg.scale)))
            seed = derive_seed(cfg.global_seed, rel, aug)
            lr, rec = degrade_image(hr, kpool, npool, cfg, np.random.default_rng(seed))
        except ValueError as exc:
            return ("skip", {"source_path": rel, "augment_scale": aug, "reason": str(exc)})
        rec = replace(rec, source_path=rel, augment_scale=aug, derived_seed=seed)
        stem = f"{path.stem}_x{_scale_tag(aug)}"
        save_png(hr, out_dir / f"{stem}_hr.png")
        save_png(lr, out_dir / f"{stem}_lr.png")
        if verbose:
            print(f"degraded {rel} @x{_scale_tag(aug)} -> {stem}_lr.png", file=sys.stderr)
        return ("pair", rec)

    results = _run_tasks(tasks, run_task, jobs)

    records = sorted(
        (r for kind, r in results if kind == "pair"),
        key=lambda r: (r.source_path, r.augment_scale),
    )
    skipped = sorted(
        (r for kind, r in results if kind == "skip"),
        key=lambda r: (r["source_path"], r.get("augment_scale", 0.0)),
    )
    manifest = {
        "config": _config_dict(cfg),
        "kernel_pool_sha256": kpool.digest(),
        "noise_pool_sha256": npool.digest() if npool is not None else None,
        "pairs": [r.to_json_dict() for r in records],
        "skipped": skipped,
    }
    atomic_write_text(out_dir / "manifest.json", _dump_manifest(manifest))
    return manifest


def generate_synthetic(
    hq_dir: str | Path,
    kpool: KernelPool,
    sigma: float,
    jpeg_quality: int,
    out_dir: str | Path,
    scale: int = 4,
    global_seed: int = 0,
    jobs: int = 1,
    verbose: bool = False,
) -> dict:
    """Build an evaluation set: HR ground truth next to synthetically corrupted LR."""
    hq_dir, out_dir = Path(hq_dir), Path(out_dir)
    files = _list_images(hq_dir)
    if not files:
        raise ValueError(f"no decodable images (*.png, *.jpg, *.jpeg) in {hq_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)

    def run_task(path: Path):
        rel = path.name
        try:
            hq = load_image(path)
        except DecodeError as exc:
            return ("skip", {"source_path": rel, "reason": str(exc)})
        try:
            hr = _mod_crop(hq, scale)
            seed = derive_seed(global_seed, rel, 1.0)
            lr = synthetic_corrupt(
                hr, kpool, sigma, jpeg_quality, np.random.default_rng(seed), scale=scale
            )
        except ValueError as exc:
            return ("skip", {"source_path": rel, "reason": str(exc)})
        save_png(hr, out_dir / f"{path.stem}_hr.png")
        save_png(lr, out_dir / f"{path.stem}_lr.png")
        if verbose:
            print(f"corrupted {rel}", file=sys.stderr)
        return ("item", {"source_path": rel, "derived_seed": seed})

    results = _run_tasks(files, run_task, jobs)
    items = sorted((r for kind, r in results if kind == "item"), key=lambda r: r["source_path"])
    skipped = sorted((r for kind, r in results if kind == "skip"), key=lambda r: r["source_path"])
    manifest = {
        "config": {
            "scale": scale,
            "sigma": sigma,
            "jpeg_quality": jpeg_quality,
            "global_seed": global_seed,
        },
        "kernel_pool_sha256": kpool.digest(),
        "items": items,
        "skipped": skipped,
    }
    atomic_write_text(out_dir / "manifest.json", _dump_manifest(manifest))
    return manifest


def _run_tasks(tasks, fn, jobs: int):
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    if jobs == 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def _config_dict(cfg: DegradationConfig) -> dict:
    d = asdict(cfg)
    d["augment_scales"] = list(cfg.augment_scales)
    return d


def _dump_manifest(manifest: dict) -> str:
    return json.dumps(manifest, indent=2, sort_keys=True) + "\n"
