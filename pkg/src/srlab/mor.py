"""Mean-Opinion-Rank studies: randomized manifests and rank aggregation.

A study presents every method's output for each image in a per-image shuffled
order under anonymous codes; participants assign a strict ranking (1 = best,
no ties). Aggregation averages each method's rank over all collected records.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import string
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fsutil import atomic_write_bytes

RANK_CSV_HEADER = ["participant", "image", "method", "rank"]


class RankValidationError(Exception):
    """A rank record is malformed; message cites participant and image."""


@dataclass(frozen=True)
class Candidate:
    code: str      # anonymous presentation label (A, B, ...)
    method: str    # real method name, hidden during presentation
    file: str      # image file reference for this method/image


@dataclass(frozen=True)
class StudyItem:
    image_id: str
    candidates: tuple[Candidate, ...]


@dataclass(frozen=True)
class StudyManifest:
    study_id: str
    methods: tuple[str, ...]
    shuffle_seed: int
    items: tuple[StudyItem, ...]

    def to_json(self) -> str:
        doc = {
            "study_id": self.study_id,
            "methods": list(self.methods),
            "shuffle_seed": self.shuffle_seed,
            "items": [
                {
                    "image_id": item.image_id,
                    "candidates": [
                        {"code": c.code, "method": c.method, "file": c.file}
                        for c in item.candidates
                    ],
                }
                for item in self.items
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @staticmethod
    def from_json(text: str) -> "StudyManifest":
        doc = json.loads(text)
        items = tuple(
            StudyItem(
                image_id=i["image_id"],
                candidates=tuple(Candidate(c["code"], c["method"], c["file"]) for c in i["candidates"]),
            )
            for i in doc["items"]
        )
        return StudyManifest(
            study_id=doc["study_id"],
            methods=tuple(doc["methods"]),
            shuffle_seed=int(doc["shuffle_seed"]),
            items=items,
        )


@dataclass(frozen=True)
class RankRecord:
    participant_id: str
    image_id: str
    ranks: dict  # method -> rank, a permutation of 1..M


def _item_seed(shuffle_seed: int, image_id: str) -> int:
    key = f"{shuffle_seed}|{image_id}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


def build_study(image_ids, method_dirs, seed: int) -> StudyManifest:
    """Assemble a manifest with an independent deterministic shuffle per image.

    method_dirs maps method name -> directory containing a file named
    ``image_id`` for every image.
    """
    methods = tuple(method_dirs.keys())
    if not methods:
        raise ValueError("at least one method is required")
    image_ids = list(image_ids)
    if not image_ids:
        raise ValueError("at least one image is required")
    if len(methods) > len(string.ascii_uppercase):
        raise ValueError("too many methods for single-letter codes")
    for method, d in method_dirs.items():
        d = Path(d)
        for image_id in image_ids:
            if not (d / image_id).is_file():
                raise ValueError(f"missing file for image {image_id!r} under method {method!r}: {d / image_id}")

    items = []
    for image_id in image_ids:
        rng = np.random.default_rng(_item_seed(seed, image_id))
        order = rng.permutation(len(methods))
        candidates = tuple(
            Candidate(
                code=string.ascii_uppercase[pos],
                method=methods[m],
                file=str(Path(method_dirs[methods[m]]) / image_id),
            )
            for pos, m in enumerate(order)
        )
        items.append(StudyItem(image_id=image_id, candidates=candidates))
    digest = hashlib.sha256(
        json.dumps([seed, list(methods), image_ids]).encode("utf-8")
    ).hexdigest()[:12]
    return StudyManifest(
        study_id=f"mor-{digest}", methods=methods, shuffle_seed=seed, items=tuple(items)
    )


def save_manifest(manifest: StudyManifest, path: str | Path) -> None:
    atomic_write_bytes(path, manifest.to_json().encode("utf-8"))


def load_manifest(path: str | Path) -> StudyManifest:
    return StudyManifest.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class MorResult:
    mor: dict  # method -> mean rank
    record_count: int


def _validate_record(rec: RankRecord, methods: tuple[str, ...]) -> None:
    where = f"participant {rec.participant_id!r}, image {rec.image_id!r}"
    if set(rec.ranks.keys()) != set(methods):
        raise RankValidationError(
            f"{where}: methods {sorted(rec.ranks)} do not match study methods {sorted(methods)}"
        )
    ranks = sorted(rec.ranks.values())
    if ranks != list(range(1, len(methods) + 1)):
        raise RankValidationError(
            f"{where}: ranks {ranks} are not a permutation of 1..{len(methods)}"
        )


def aggregate_mor(records, methods) -> MorResult:
    """Mean assigned rank per method over all (participant, image) records."""
    methods = tuple(methods)
    records = list(records)
    if not records:
        raise RankValidationError("no rank records to aggregate")
    totals = {m: 0.0 for m in methods}
    for rec in records:
        _validate_record(rec, methods)
        for m, r in rec.ranks.items():
            totals[m] += r
    n = len(records)
    return MorResult(mor={m: totals[m] / n for m in methods}, record_count=n)


def write_rank_csv(records, path: str | Path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RANK_CSV_HEADER)
    for rec in records:
        for method in rec.ranks:
            writer.writerow([rec.participant_id, rec.image_id, method, rec.ranks[method]])
    atomic_write_bytes(path, buf.getvalue().encode("utf-8"))


def read_rank_csv(path: str | Path) -> list[RankRecord]:
    """Parse rank rows and group them into one record per (participant, image)."""
    path = Path(path)
    grouped: dict = {}
    order: list = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != RANK_CSV_HEADER:
            raise RankValidationError(
                f"{path}: expected header '{','.join(RANK_CSV_HEADER)}', got {header}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise RankValidationError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            participant, image, method, rank_text = (c.strip() for c in row)
            try:
                rank = int(rank_text)
            except ValueError:
                raise RankValidationError(f"{path}:{lineno}: non-integer rank {rank_text!r}") from None
            key = (participant, image)
            if key not in grouped:
                grouped[key] = {}
                order.append(key)
            if method in grouped[key]:
                raise RankValidationError(
                    f"{path}:{lineno}: duplicate method {method!r} for participant "
                    f"{participant!r}, image {image!r}"
                )
            grouped[key][method] = rank
    return [
        RankRecord(participant_id=p, image_id=i, ranks=grouped[(p, i)]) for p, i in order
    ]
