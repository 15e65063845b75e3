"""Readers and writers for metadata, embeddings and score tables, plus
dataset validation.

All parsed objects are treated as immutable after construction.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import (
    ConflictingScore,
    DimensionError,
    DuplicateImage,
    FormatError,
    IoError,
    NonFiniteValue,
    SchemaError,
    SelfPair,
)

PACKED_MAGIC = b"VGE1"
SCORE_SYMMETRY_TOL = 1e-9
SMALL_GROUP_FRACTION = 0.05


def pair_key(a: str, b: str) -> tuple[str, str]:
    """Canonical unordered key for an image pair."""
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    subject_id: str
    attributes: Mapping[str, str] = field(default_factory=dict)

    def get(self, name: str) -> str | None:
        return self.attributes.get(name)


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """Fixed-dimension vectors keyed by image id.

    ``vectors`` rows follow ``ids`` order. The dtype is whatever the source
    provided (float64 from CSV, float32 from packed files).
    """

    ids: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.ids):
            raise DimensionError(
                f"expected {len(self.ids)} vectors, got array of shape {self.vectors.shape}"
            )
        if self.vectors.shape[1] < 1:
            raise DimensionError("embedding dimension must be positive")
        if len(set(self.ids)) != len(self.ids):
            dup = next(k for k, v in Counter(self.ids).items() if v > 1)
            raise DuplicateImage(f"duplicate embedding for image {dup!r}")
        if not np.all(np.isfinite(self.vectors)):
            raise NonFiniteValue("embedding contains NaN or infinite components")
        object.__setattr__(self, "_index", {k: i for i, k in enumerate(self.ids)})

    @property
    def dimension(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self):
        return len(self.ids)

    def __contains__(self, image_id):
        return image_id in self._index

    def row(self, image_id: str) -> int:
        return self._index[image_id]

    def __getitem__(self, image_id: str) -> np.ndarray:
        return self.vectors[self._index[image_id]]

    def __eq__(self, other):
        if not isinstance(other, EmbeddingSet):
            return NotImplemented
        return (
            self.ids == other.ids
            and self.vectors.dtype == other.vectors.dtype
            and self.vectors.shape == other.vectors.shape
            and self.vectors.tobytes() == other.vectors.tobytes()
        )

    __hash__ = None


class ScoreTable(Mapping):
    """Symmetric similarity table keyed by unordered image-id pair."""

    def __init__(self, entries: Mapping[tuple[str, str], float] | None = None):
        self._entries: dict[tuple[str, str], float] = {}
        for (a, b), s in (entries or {}).items():
            self._insert(a, b, float(s))

    def _insert(self, a, b, s):
        if a == b:
            raise SelfPair(f"self-pair ({a!r}, {a!r})")
        if not math.isfinite(s):
            raise NonFiniteValue(f"non-finite score for pair ({a!r}, {b!r})")
        key = pair_key(a, b)
        prev = self._entries.get(key)
        if prev is not None and abs(prev - s) > SCORE_SYMMETRY_TOL:
            raise ConflictingScore(f"pair {key} has scores {prev!r} and {s!r}")
        if prev is None:
            self._entries[key] = s

    def __getitem__(self, key):
        return self._entries[pair_key(*key)]

    def __contains__(self, key):
        return isinstance(key, tuple) and len(key) == 2 and pair_key(*key) in self._entries

    def __iter__(self):
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)

    def __repr__(self):
        return f"ScoreTable({len(self)} entries)"


@dataclass(frozen=True)
class Finding:
    code: str
    message: str


@dataclass
class ValidationReport:
    # attribute -> value -> {"subjects": n, "images": m}
    group_counts: dict[str, dict[str, dict[str, int]]] = field(default_factory=dict)
    warnings: list[Finding] = field(default_factory=list)
    errors: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def codes(self) -> set[str]:
        return {f.code for f in self.warnings} | {f.code for f in self.errors}

    def to_dict(self) -> dict:
        return {
            "group_counts": self.group_counts,
            "warnings": [{"code": f.code, "message": f.message} for f in self.warnings],
            "errors": [{"code": f.code, "message": f.message} for f in self.errors],
        }


def _open_text(path, mode="r"):
    try:
        return open(path, mode, newline="", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot open {path}: {exc}") from exc


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    with _open_text(path) as fh:
        try:
            rows = list(csv.reader(fh))
        except (csv.Error, UnicodeDecodeError) as exc:
            raise FormatError(f"{path}: {exc}") from exc
    if not rows:
        raise SchemaError(f"{path}: missing header row")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r and any(c.strip() for c in r)]
    return header, body


def load_metadata(path) -> list[ImageRecord]:
    header, body = _read_rows(path)
    for required in ("image_id", "subject_id"):
        if required not in header:
            raise SchemaError(f"{path}: header lacks required column {required!r}")
    if len(set(header)) != len(header):
        raise SchemaError(f"{path}: duplicate column names in header")
    i_img, i_sub = header.index("image_id"), header.index("subject_id")
    attr_cols = [(i, h) for i, h in enumerate(header) if i not in (i_img, i_sub)]

    records, seen = [], set()
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise SchemaError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        image_id, subject_id = row[i_img], row[i_sub]
        if not image_id or not subject_id:
            raise SchemaError(f"{path}:{lineno}: empty image_id or subject_id")
        if image_id in seen:
            raise DuplicateImage(f"{path}:{lineno}: duplicate image_id {image_id!r}")
        seen.add(image_id)
        attrs = {h: row[i] for i, h in attr_cols if row[i] != ""}
        records.append(ImageRecord(image_id, subject_id, attrs))
    return records


def write_metadata(records: Sequence[ImageRecord], path, attributes: Sequence[str] | None = None):
    if attributes is None:
        attributes = sorted({k for r in records for k in r.attributes})
    with _open_text(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["image_id", "subject_id", *attributes])
        for r in records:
            w.writerow([r.image_id, r.subject_id, *(r.attributes.get(a, "") for a in attributes)])


def load_embeddings(path, format: str = "csv") -> EmbeddingSet:
    if format == "csv":
        return _load_embeddings_csv(path)
    if format == "packed":
        return _load_embeddings_packed(path)
    raise FormatError(f"unknown embedding format {format!r}")


def _load_embeddings_csv(path) -> EmbeddingSet:
    header, body = _read_rows(path)
    if not header or header[0] != "image_id":
        raise SchemaError(f"{path}: first column must be image_id")
    dim = len(header) - 1
    if dim < 1 or header[1:] != [f"v{k}" for k in range(dim)]:
        raise SchemaError(f"{path}: expected columns v0..v{{d-1}} after image_id")
    ids, values = [], []
    for lineno, row in enumerate(body, start=2):
        if len(row) - 1 != dim:
            raise DimensionError(f"{path}:{lineno}: expected {dim} values, got {len(row) - 1}")
        try:
            vec = [float(x) for x in row[1:]]
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
        if not all(math.isfinite(x) for x in vec):
            raise NonFiniteValue(f"{path}:{lineno}: non-finite component")
        ids.append(row[0])
        values.append(vec)
    arr = np.asarray(values, dtype=np.float64).reshape(len(ids), dim)
    return EmbeddingSet(tuple(ids), arr)


def _load_embeddings_packed(path) -> EmbeddingSet:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if data[:4] != PACKED_MAGIC:
        raise FormatError(f"{path}: bad magic bytes {data[:4]!r}")
    try:
        dim, count = struct.unpack_from("<IQ", data, 4)
        (mlen,) = struct.unpack_from("<I", data, 16)
    except struct.error as exc:
        raise FormatError(f"{path}: truncated header") from exc
    off = 20
    try:
        ids = json.loads(data[off : off + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable manifest") from exc
    off += mlen
    if not isinstance(ids, list) or len(ids) != count or not all(isinstance(i, str) for i in ids):
        raise FormatError(f"{path}: manifest does not list {count} image ids")
    if dim < 1:
        raise DimensionError(f"{path}: dimension must be positive")
    expected = count * dim * 4
    if len(data) - off != expected:
        raise DimensionError(f"{path}: payload has {len(data) - off} bytes, expected {expected}")
    arr = np.frombuffer(data, dtype="<f4", count=count * dim, offset=off)
    arr = arr.astype(np.float32).reshape(count, dim)
    return EmbeddingSet(tuple(ids), arr)


def write_embeddings(emb: EmbeddingSet, path, format: str = "csv"):
    if format == "csv":
        with _open_text(path, "w") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["image_id", *(f"v{k}" for k in range(emb.dimension))])
            for image_id, vec in zip(emb.ids, emb.vectors):
                w.writerow([image_id, *(repr(float(x)) for x in vec)])
        return
    if format != "packed":
        raise FormatError(f"unknown embedding format {format!r}")
    manifest = json.dumps(list(emb.ids), ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    payload = np.ascontiguousarray(emb.vectors, dtype="<f4").tobytes()
    blob = b"".join(
        [
            PACKED_MAGIC,
            struct.pack("<IQ", emb.dimension, len(emb.ids)),
            struct.pack("<I", len(manifest)),
            manifest,
            payload,
        ]
    )
    try:
        Path(path).write_bytes(blob)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_scores(path) -> ScoreTable:
    header, body = _read_rows(path)
    if header[:3] != ["probe_id", "gallery_id", "score"] or len(header) != 3:
        raise SchemaError(f"{path}: header must be probe_id,gallery_id,score")
    table = ScoreTable()
    for lineno, row in enumerate(body, start=2):
        if len(row) != 3:
            raise SchemaError(f"{path}:{lineno}: expected 3 fields")
        try:
            s = float(row[2])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
        try:
            table._insert(row[0], row[1], s)
        except (SelfPair, ConflictingScore, NonFiniteValue) as exc:
            raise type(exc)(f"{path}:{lineno}: {exc}") from None
    return table


def write_scores(table: Mapping[tuple[str, str], float], path):
    with _open_text(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["probe_id", "gallery_id", "score"])
        for (a, b), s in table.items():
            w.writerow([a, b, f"{s:.17g}"])


def impostor_capacity(image_counts: Iterable[int]) -> int:
    """Number of cross-subject image pairs for subjects with the given image counts."""
    counts = list(image_counts)
    n = sum(counts)
    return n * (n - 1) // 2 - sum(k * (k - 1) // 2 for k in counts)


def validate_dataset(
    records: Sequence[ImageRecord],
    audited_attributes: Sequence[str],
    far_targets: Sequence[float] = (),
) -> ValidationReport:
    report = ValidationReport()
    by_subject: dict[str, list[ImageRecord]] = defaultdict(list)
    for r in records:
        by_subject[r.subject_id].append(r)

    for sid in sorted(by_subject):
        imgs = by_subject[sid]
        first = dict(imgs[0].attributes)
        for other in imgs[1:]:
            if dict(other.attributes) != first:
                keys = sorted(
                    k for k in set(first) | set(other.attributes)
                    if first.get(k) != other.attributes.get(k)
                )
                report.errors.append(
                    Finding(
                        "AttributeConflict",
                        f"subject {sid!r}: images {imgs[0].image_id!r} and {other.image_id!r} "
                        f"disagree on {', '.join(keys)}",
                    )
                )
                break

    n_subjects = len(by_subject)
    floor = min(far_targets) if far_targets else None
    for attr in audited_attributes:
        subjects: dict[str, set] = defaultdict(set)
        images: Counter = Counter()
        per_subject_images: dict[str, Counter] = defaultdict(Counter)
        missing = set()
        for r in records:
            v = r.attributes.get(attr)
            if v is None:
                missing.add(r.subject_id)
                continue
            subjects[v].add(r.subject_id)
            images[v] += 1
            per_subject_images[v][r.subject_id] += 1
        report.group_counts[attr] = {
            v: {"subjects": len(subjects[v]), "images": images[v]} for v in sorted(subjects)
        }
        if missing:
            report.warnings.append(
                Finding(
                    "MissingAttribute",
                    f"{len(missing)} subject(s) lack {attr!r} and are excluded from "
                    f"{attr!r}-stratified analyses",
                )
            )
        for v in sorted(subjects):
            share = len(subjects[v]) / n_subjects if n_subjects else 0.0
            if share < SMALL_GROUP_FRACTION:
                report.warnings.append(
                    Finding(
                        "SmallGroup",
                        f"{attr}={v!r} covers {len(subjects[v])} of {n_subjects} subjects "
                        f"({share:.1%}, below {SMALL_GROUP_FRACTION:.0%})",
                    )
                )
            if floor is not None:
                capacity = impostor_capacity(per_subject_images[v].values())
                if capacity < 1.0 / floor:
                    report.warnings.append(
                        Finding(
                            "InsufficientImpostors",
                            f"{attr}={v!r} has {capacity} impostor pairs; FAR {floor:g} "
                            f"needs at least {math.ceil(1.0 / floor)}",
                        )
                    )
    return report
