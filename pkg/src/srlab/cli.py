"""Command-line interface for the degradation/evaluation pipeline.

Exit codes: 0 success, 1 validation error (bad flags or values), 2 I/O error
(missing/unreadable/undecodable files). Progress goes to stderr; machine
readable results go to files (and MOR summaries to stdout).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import degrade, kernels, metrics, mor, noise
from .fsutil import atomic_write_text
from .imgcore import DecodeError, load_image


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep control of the exit code
        raise _UsageError(f"{self.prog}: {message}")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError(f"{path}: config root must be a JSON object")
    return cfg


def _section(cfg: dict, name: str, allowed: set) -> dict:
    section = cfg.get(name, {})
    if not isinstance(section, dict):
        raise ValueError(f"config section {name!r} must be a JSON object")
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ValueError(f"config section {name!r} has unknown keys: {', '.join(unknown)}")
    return dict(section)


def _degradation_config(cfg: dict, seed: int) -> degrade.DegradationConfig:
    section = _section(
        cfg,
        "degradation",
        {"scale", "jpeg_quality", "jpeg_probability", "noise_enabled", "augment_scales"},
    )
    section["augment_scales"] = tuple(section.get("augment_scales", (1.0, 0.75, 0.5, 0.25)))
    return degrade.DegradationConfig(global_seed=seed, **section)


def _noise_params(cfg: dict) -> noise.NoiseScanParams:
    section = _section(
        cfg, "noise_scan", {"patch_size", "sub_size", "mu", "gamma", "phi", "stride"}
    )
    return noise.NoiseScanParams(**section)


def _build_parser() -> _Parser:
    parser = _Parser(prog="srlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, default=0, help="global random seed (default 0)")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers (default 1)")
        p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("build-kernels", help="synthesize a blur-kernel pool file")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--size", type=int, default=None)
    common(p)

    p = sub.add_parser("harvest-noise", help="scan images for smooth patches, build a noise pool")
    p.add_argument("--src", required=True)
    p.add_argument("--out", required=True)
    common(p)

    p = sub.add_parser("degrade", help="generate paired HR/LR training data")
    p.add_argument("--hq", required=True)
    p.add_argument("--kernels", required=True)
    p.add_argument("--noise", default=None)
    p.add_argument("--out", required=True)
    common(p)

    p = sub.add_parser("corrupt-synthetic", help="build an evaluation set with known ground truth")
    p.add_argument("--hq", required=True)
    p.add_argument("--kernels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sigma", type=float, default=8.0, help="noise sigma in 8-bit units")
    p.add_argument("--quality", type=int, default=30)
    p.add_argument("--scale", type=int, default=4)
    common(p)

    p = sub.add_parser("evaluate", help="full-reference scoring of SR outputs against GT")
    p.add_argument("--sr", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--nr-scores", default=None, help="CSV image,niqe,nrqm enabling a PI column")
    p.add_argument("--extractor", default=None, help=".npz feature-extractor weights")
    common(p)

    p = sub.add_parser("mor", help="subjective ranking study tools")
    mor_sub = p.add_subparsers(dest="mor_command", required=True, parser_class=_Parser)

    mp = mor_sub.add_parser("prepare", help="build a shuffled study manifest")
    mp.add_argument("--out", required=True)
    mp.add_argument(
        "--method",
        action="append",
        required=True,
        metavar="NAME=DIR",
        help="method name and its image directory (repeatable)",
    )
    mp.add_argument("--images", nargs="+", default=None, help="image file names")
    mp.add_argument("--images-from", default=None, help="take image names from this directory")
    common(mp)

    ma = mor_sub.add_parser("aggregate", help="aggregate collected rank CSVs")
    ma.add_argument("--ranks", required=True)
    ma.add_argument("--out", default=None, help="optional CSV for the aggregated table")
    common(ma)

    return parser


def _cmd_build_kernels(args) -> int:
    cfg = _section(_load_config(args.config), "kernel_synthesis", {"count", "size", "sigma_range"})
    count = args.count if args.count is not None else cfg.get("count", kernels.DEFAULT_POOL_SIZE)
    size = args.size if args.size is not None else cfg.get("size", kernels.DEFAULT_KERNEL_SIZE)
    sigma_range = tuple(cfg.get("sigma_range", kernels.DEFAULT_SIGMA_RANGE))
    pool = kernels.synth_kernel_pool(count=count, size=size, sigma_range=sigma_range, seed=args.seed)
    kernels.save_kernel_pool(pool, args.out)
    print(f"wrote {pool.count} kernels ({size}x{size}) to {args.out}", file=sys.stderr)
    return 0


def _cmd_harvest_noise(args) -> int:
    params = _noise_params(_load_config(args.config))
    src = Path(args.src)
    files = [
        p for p in sorted(src.iterdir())
        if p.is_file() and p.suffix.lower() in degrade.IMAGE_SUFFIXES
    ]
    if not files:
        raise ValueError(f"no images in {src}")
    patches = []
    for path in files:
        try:
            img = load_image(path)
        except DecodeError as exc:
            print(f"warning: skipping {path}: {exc}", file=sys.stderr)
            continue
        found = noise.scan_noise_patches(img, params)
        patches.extend(found)
        if args.verbose:
            print(f"{path.name}: {len(found)} smooth patches", file=sys.stderr)
    pool = noise.NoisePool(tuple(patches))
    noise.save_noise_pool(pool, args.out)
    note = "" if pool.count else " (empty pool: no smooth regions found)"
    print(f"wrote {pool.count} noise patches to {args.out}{note}", file=sys.stderr)
    return 0


def _cmd_degrade(args) -> int:
    cfg = _degradation_config(_load_config(args.config), args.seed)
    kpool = kernels.load_kernel_pool(args.kernels)
    npool = noise.load_noise_pool(args.noise) if args.noise else None
    if cfg.noise_enabled and (npool is None or npool.count == 0):
        raise ValueError("noise is enabled but no non-empty noise pool was given (--noise)")
    manifest = degrade.generate_pairs(
        args.hq, kpool, npool, cfg, args.out, jobs=args.jobs, verbose=args.verbose
    )
    print(
        f"wrote {len(manifest['pairs'])} pairs to {args.out} "
        f"({len(manifest['skipped'])} skipped)",
        file=sys.stderr,
    )
    return 0


def _cmd_corrupt_synthetic(args) -> int:
    kpool = kernels.load_kernel_pool(args.kernels)
    manifest = degrade.generate_synthetic(
        args.hq,
        kpool,
        sigma=args.sigma,
        jpeg_quality=args.quality,
        out_dir=args.out,
        scale=args.scale,
        global_seed=args.seed,
        jobs=args.jobs,
        verbose=args.verbose,
    )
    print(
        f"wrote {len(manifest['items'])} corrupted images to {args.out} "
        f"({len(manifest['skipped'])} skipped)",
        file=sys.stderr,
    )
    return 0


def _cmd_evaluate(args) -> int:
    fx = metrics.load_feature_extractor(args.extractor) if args.extractor else None
    nr = metrics.read_nr_scores(args.nr_scores) if args.nr_scores else None
    report = metrics.evaluate_directories(args.sr, args.gt, fx=fx, nr_scores=nr)
    metrics.write_report_csv(report, args.out)
    summary = ", ".join(f"{k}={report.means[k]:.4f}" for k in report.metric_names)
    print(f"scored {len(report.per_image)} images -> {args.out} ({summary})", file=sys.stderr)
    return 0


def _cmd_mor_prepare(args) -> int:
    method_dirs = {}
    for spec in args.method:
        name, sep, directory = spec.partition("=")
        if not sep or not name or not directory:
            raise ValueError(f"--method expects NAME=DIR, got {spec!r}")
        if name in method_dirs:
            raise ValueError(f"duplicate method name {name!r}")
        method_dirs[name] = directory
    if args.images is not None:
        image_ids = list(args.images)
    elif args.images_from is not None:
        src = Path(args.images_from)
        image_ids = [
            p.name for p in sorted(src.iterdir())
            if p.is_file() and p.suffix.lower() in degrade.IMAGE_SUFFIXES
        ]
    else:
        raise ValueError("one of --images or --images-from is required")
    manifest = mor.build_study(image_ids, method_dirs, seed=args.seed)
    mor.save_manifest(manifest, args.out)
    print(
        f"wrote study {manifest.study_id}: {len(manifest.items)} items x "
        f"{len(manifest.methods)} methods -> {args.out}",
        file=sys.stderr,
    )
    return 0


def _cmd_mor_aggregate(args) -> int:
    records = mor.read_rank_csv(args.ranks)
    methods = sorted({m for rec in records for m in rec.ranks})
    result = mor.aggregate_mor(records, methods)
    for method in sorted(result.mor, key=lambda m: (result.mor[m], m)):
        print(f"MOR({method})={result.mor[method]}")
    print(f"records={result.record_count}", file=sys.stderr)
    if args.out:
        lines = ["method,mor\n"] + [
            f"{m},{result.mor[m]}\n" for m in sorted(result.mor, key=lambda m: (result.mor[m], m))
        ]
        atomic_write_text(args.out, "".join(lines))
    return 0


_COMMANDS = {
    "build-kernels": _cmd_build_kernels,
    "harvest-noise": _cmd_harvest_noise,
    "degrade": _cmd_degrade,
    "corrupt-synthetic": _cmd_corrupt_synthetic,
    "evaluate": _cmd_evaluate,
}


def run(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.jobs < 1:
            raise ValueError(f"--jobs must be >= 1, got {args.jobs}")
        if args.command == "mor":
            handler = _cmd_mor_prepare if args.mor_command == "prepare" else _cmd_mor_aggregate
        else:
            handler = _COMMANDS[args.command]
        return handler(args)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        print("run 'srlab --help' for usage", file=sys.stderr)
        return 1
    except (ValueError, mor.RankValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (
        DecodeError,
        kernels.KernelParseError,
        noise.NoisePoolFormatError,
        OSError,
        json.JSONDecodeError,
    ) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
