"""Similarity scoring of pair sets."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .exceptions import DimensionError, IoError, MissingEmbedding, MissingScore, ZeroNorm
from .ingest import EmbeddingSet, ScoreTable, pair_key
from .pairing import PairSet

METRICS = ("cosine", "dot", "neg_euclidean")
_CHUNK = 65536


def _rowwise(a: np.ndarray, b: np.ndarray, metric: str) -> np.ndarray:
    """Similarity between matching rows of two (n, d) float64 arrays.

    ``similarity`` and ``score_pairs`` both go through here so that a pair
    scores identically either way.
    """
    if metric == "dot":
        return (a * b).sum(axis=1)
    if metric == "neg_euclidean":
        d = a - b
        return -np.sqrt((d * d).sum(axis=1))
    if metric == "cosine":
        # rescale rows by their largest component so squares neither underflow nor overflow
        sa = np.abs(a).max(axis=1, keepdims=True)
        sb = np.abs(b).max(axis=1, keepdims=True)
        if np.any(sa == 0) or np.any(sb == 0):
            raise ZeroNorm("cosine similarity is undefined for a zero vector")
        a, b = a / sa, b / sb
        dot = (a * b).sum(axis=1)
        na = (a * a).sum(axis=1)
        nb = (b * b).sum(axis=1)
        return np.clip(dot / np.sqrt(na * nb), -1.0, 1.0)
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


def similarity(a, b, metric: str = "cosine") -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise DimensionError(f"vectors of shape {a.shape} and {b.shape} are not comparable")
    return float(_rowwise(a[None, :], b[None, :], metric)[0])


@dataclass(frozen=True, eq=False)
class ScoredPairSet:
    """A PairSet with one score per pair, aligned with its index arrays."""

    pairs: PairSet
    genuine_scores: np.ndarray
    impostor_scores: np.ndarray
    metric_name: str = "external"

    def __post_init__(self):
        if len(self.genuine_scores) != self.pairs.n_genuine:
            raise ValueError("genuine scores do not match genuine pairs")
        if len(self.impostor_scores) != self.pairs.n_impostor:
            raise ValueError("impostor scores do not match impostor pairs")

    @property
    def policy(self):
        return self.pairs.policy

    @property
    def n_genuine(self) -> int:
        return self.pairs.n_genuine

    @property
    def n_impostor(self) -> int:
        return self.pairs.n_impostor

    def genuine_items(self) -> Iterator[tuple[tuple[str, str], float]]:
        return zip(self.pairs.genuine_pairs(), self.genuine_scores.tolist())

    def impostor_items(self) -> Iterator[tuple[tuple[str, str], float]]:
        return zip(self.pairs.impostor_pairs(), self.impostor_scores.tolist())

    def select(self, genuine_mask, impostor_mask) -> "ScoredPairSet":
        return ScoredPairSet(
            self.pairs.select(genuine_mask, impostor_mask),
            self.genuine_scores[genuine_mask],
            self.impostor_scores[impostor_mask],
            self.metric_name,
        )

    def score_table(self) -> ScoreTable:
        entries = dict(self.genuine_items())
        entries.update(self.impostor_items())
        return ScoreTable(entries)


def _score_index(idx: np.ndarray, rows: np.ndarray, vectors: np.ndarray, metric: str):
    out = np.empty(len(idx))
    for s in range(0, len(idx), _CHUNK):
        part = idx[s : s + _CHUNK]
        a = vectors[rows[part[:, 0]]].astype(np.float64)
        b = vectors[rows[part[:, 1]]].astype(np.float64)
        out[s : s + _CHUNK] = _rowwise(a, b, metric)
    return out


def score_pairs(pairs: PairSet, embeddings: EmbeddingSet, metric: str = "cosine") -> ScoredPairSet:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    rows = np.full(len(pairs.records), -1, dtype=np.int64)
    used = np.zeros(len(pairs.records), dtype=bool)
    for idx in (pairs.genuine, pairs.impostor):
        used[idx.ravel()] = True
    for k in np.flatnonzero(used):
        image_id = pairs.records[k].image_id
        if image_id not in embeddings:
            raise MissingEmbedding(image_id)
        rows[k] = embeddings.row(image_id)
    vecs = embeddings.vectors
    return ScoredPairSet(
        pairs,
        _score_index(pairs.genuine, rows, vecs, metric),
        _score_index(pairs.impostor, rows, vecs, metric),
        metric,
    )


def attach_scores(pairs: PairSet, table: ScoreTable) -> ScoredPairSet:
    def join(id_pairs):
        out = np.empty(len(id_pairs))
        for k, (a, b) in enumerate(id_pairs):
            try:
                out[k] = table._entries[pair_key(a, b)]
            except KeyError:
                raise MissingScore((a, b)) from None
        return out

    return ScoredPairSet(
        pairs, join(pairs.genuine_pairs()), join(pairs.impostor_pairs()), "external"
    )


def write_scored_pairs(scored: ScoredPairSet, path):
    rows = [(a, b, "genuine", s) for (a, b), s in scored.genuine_items()]
    rows += [(a, b, "impostor", s) for (a, b), s in scored.impostor_items()]
    rows.sort(key=lambda r: (r[0], r[1]))
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id_a", "id_b", "label", "score"])
            for a, b, label, s in rows:
                w.writerow([a, b, label, f"{s:.17g}"])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_scored_pairs(path) -> tuple[list, np.ndarray, list, np.ndarray]:
    """Read a scored-pair export back into (genuine pairs, scores, impostor pairs, scores)."""
    gp, gs, ip, is_ = [], [], [], []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                dest = (gp, gs) if row["label"] == "genuine" else (ip, is_)
                dest[0].append((row["id_a"], row["id_b"]))
                dest[1].append(float(row["score"]))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return gp, np.array(gs), ip, np.array(is_)
