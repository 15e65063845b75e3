"""Synthetic populations with known score distributions, plus closed-form oracles.

Score scenarios draw one Gaussian score per enumerated pair.  Embedding
scenarios place subject centres on the unit sphere around a per-group
direction; a smaller ``center_dispersion`` packs a group's identities
closer together, which makes its impostors more similar.

Every random draw comes from a SplitMix64 sub-stream derived from the
scenario seed and the group's position in ``groups``; appending a group
leaves the draws of the groups before it unchanged.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .exceptions import DomainError, FormatError, IoError
from .ingest import EmbeddingSet, ImageRecord, ScoreTable
from .pairing import PairSet, YokingPolicy, _canonical, _genuine_index, _impostor_index
from .rng import SplitMix64, derive_seed
from .scoring import ScoredPairSet

GROUP_ATTRIBUTE = "race"

_GENUINE, _IMPOSTOR, _SAMPLE, _CENTERS, _NOISE, _DIRECTION = range(6)


class EmbeddingSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    dimension: int = Field(ge=1)
    center_dispersion: float = Field(gt=0)
    within_subject_sd: float = Field(ge=0)


class GroupSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    group_label: str = Field(min_length=1)
    n_subjects: int = Field(ge=1)
    images_per_subject: int = Field(ge=1)
    genuine_mean: float = 1.0
    genuine_sd: float = Field(default=1.0, gt=0)
    impostor_mean: float = 0.0
    impostor_sd: float = Field(default=1.0, gt=0)
    embedding_spec: Optional[EmbeddingSpec] = None


class ScenarioSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    groups: list[GroupSpec] = Field(min_length=1)
    cross_group_impostor_mean_offset: float = 0.0
    seed: int = Field(default=0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _distinct_labels(self):
        labels = [g.group_label for g in self.groups]
        if len(set(labels)) != len(labels):
            raise ValueError("group labels must be distinct")
        return self


def load_scenario(path) -> ScenarioSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        return ScenarioSpec.model_validate_json(text)
    except ValidationError as exc:
        raise FormatError(f"{path}: invalid scenario: {exc}") from exc


def dump_scenario(spec: ScenarioSpec) -> str:
    return json.dumps(spec.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------- oracles

# Abramowitz & Stegun 26.2.17; absolute error below 7.5e-8.
_AS_P = 0.2316419
_AS_B = (0.319381530, -0.356563782, 1.781477937, -1.821255978, 1.330274429)


def normal_cdf(x: float) -> float:
    if x == 0.0:
        return 0.5
    t = 1.0 / (1.0 + _AS_P * abs(x))
    poly = t * (_AS_B[0] + t * (_AS_B[1] + t * (_AS_B[2] + t * (_AS_B[3] + t * _AS_B[4]))))
    upper = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi) * poly
    return 1.0 - upper if x > 0 else upper


def analytic_auc(mu_g: float, sd_g: float, mu_i: float, sd_i: float) -> float:
    """AUC of two independent Gaussians: P(genuine > impostor)."""
    if sd_g <= 0 or sd_i <= 0:
        raise DomainError("standard deviations must be positive")
    return normal_cdf((mu_g - mu_i) / math.sqrt(sd_g * sd_g + sd_i * sd_i))


# ------------------------------------------------------------------ populations


def _group_records(spec: ScenarioSpec) -> list[list[ImageRecord]]:
    out = []
    for g in spec.groups:
        sw = len(str(g.n_subjects - 1))
        iw = len(str(g.images_per_subject - 1))
        recs = []
        for s in range(g.n_subjects):
            sid = f"{g.group_label}-s{s:0{sw}d}"
            for k in range(g.images_per_subject):
                recs.append(ImageRecord(f"{sid}-i{k:0{iw}d}", sid, {GROUP_ATTRIBUTE: g.group_label}))
        out.append(recs)
    return out


def build_population(spec: ScenarioSpec) -> list[ImageRecord]:
    return [r for recs in _group_records(spec) for r in recs]


@dataclass(frozen=True, eq=False)
class SyntheticScores:
    records: tuple[ImageRecord, ...]
    groups: dict[str, ScoredPairSet]
    cross_group: ScoredPairSet

    def combined(self, include_cross_group: bool = True) -> ScoredPairSet:
        """All groups pooled; ``include_cross_group=False`` gives the group-yoked set."""
        parts = list(self.groups.values())
        if include_cross_group:
            parts.append(self.cross_group)
        gen = np.concatenate([p.pairs.genuine for p in parts])
        imp = np.concatenate([p.pairs.impostor for p in parts])
        gs = np.concatenate([p.genuine_scores for p in parts])
        is_ = np.concatenate([p.impostor_scores for p in parts])
        go = np.lexsort((gen[:, 1], gen[:, 0]))
        io = np.lexsort((imp[:, 1], imp[:, 0]))
        policy = YokingPolicy() if include_cross_group else YokingPolicy((GROUP_ATTRIBUTE,))
        return ScoredPairSet(
            PairSet(self.records, gen[go], imp[io], policy), gs[go], is_[io], "synthetic"
        )

    def score_table(self) -> ScoreTable:
        return self.combined(True).score_table()


def _cross_index(a: np.ndarray, b: np.ndarray, sample, stream) -> np.ndarray:
    total = len(a) * len(b)
    if sample is None or sample >= total:
        ia, ib = np.meshgrid(a, b, indexing="ij")
        flat = np.stack([ia.ravel(), ib.ravel()], axis=1)
    else:
        seen: dict[int, None] = {}
        while len(seen) < sample:
            for c in stream.integers(max(1024, 2 * sample), total).tolist():
                if c not in seen:
                    seen[c] = None
                    if len(seen) == sample:
                        break
        codes = np.fromiter(seen, dtype=np.int64, count=len(seen))
        flat = np.stack([a[codes // len(b)], b[codes % len(b)]], axis=1)
    return _canonical(np.stack([flat.min(axis=1), flat.max(axis=1)], axis=1))


def generate_scores(spec: ScenarioSpec, impostor_sample: int | None = None) -> SyntheticScores:
    """Draw Gaussian scores for every genuine, within-group impostor and
    cross-group impostor pair of the scenario population.

    ``impostor_sample`` caps each impostor set (per group, and per pair of
    groups) with a seeded uniform subsample.  Cross-group impostors have
    mean ``(mu_a + mu_b) / 2 - cross_group_impostor_mean_offset`` and the
    root-mean-square of the two impostor sds.
    """
    per_group = _group_records(spec)
    records = tuple(sorted((r for recs in per_group for r in recs), key=lambda r: r.image_id))
    pos = {r.image_id: k for k, r in enumerate(records)}
    members = [np.array(sorted(pos[r.image_id] for r in recs), dtype=np.int64) for recs in per_group]

    empty = np.zeros((0, 2), dtype=np.int64)
    groups = {}
    for gi, (g, recs, mem) in enumerate(zip(spec.groups, per_group, members)):
        local = tuple(records[k] for k in mem)
        gen = mem[_genuine_index(local)] if len(local) > 1 else empty
        imp_local, _ = _impostor_index(
            local, YokingPolicy(), impostor_sample, derive_seed(spec.seed, gi, _SAMPLE)
        )
        imp = mem[imp_local] if len(imp_local) else empty
        gscores = SplitMix64(derive_seed(spec.seed, gi, _GENUINE)).normal(
            len(gen), g.genuine_mean, g.genuine_sd
        )
        iscores = SplitMix64(derive_seed(spec.seed, gi, _IMPOSTOR)).normal(
            len(imp), g.impostor_mean, g.impostor_sd
        )
        groups[g.group_label] = ScoredPairSet(
            PairSet(records, gen.reshape(-1, 2), imp.reshape(-1, 2), YokingPolicy((GROUP_ATTRIBUTE,))),
            gscores,
            iscores,
            "synthetic",
        )

    cross_idx, cross_scores = [], []
    for gi in range(len(spec.groups)):
        for gj in range(gi + 1, len(spec.groups)):
            a, b = spec.groups[gi], spec.groups[gj]
            idx = _cross_index(
                members[gi],
                members[gj],
                impostor_sample,
                SplitMix64(derive_seed(spec.seed, gi, gj, _SAMPLE)),
            )
            mean = 0.5 * (a.impostor_mean + b.impostor_mean) - spec.cross_group_impostor_mean_offset
            sd = math.sqrt(0.5 * (a.impostor_sd**2 + b.impostor_sd**2))
            cross_idx.append(idx)
            cross_scores.append(
                SplitMix64(derive_seed(spec.seed, gi, gj, _IMPOSTOR)).normal(len(idx), mean, sd)
            )
    if cross_idx:
        cidx = np.concatenate(cross_idx)
        cs = np.concatenate(cross_scores)
        order = np.lexsort((cidx[:, 1], cidx[:, 0]))
        cidx, cs = cidx[order], cs[order]
    else:
        cidx, cs = empty, np.zeros(0)
    cross = ScoredPairSet(PairSet(records, empty, cidx), np.zeros(0), cs, "synthetic")
    return SyntheticScores(records, groups, cross)


def _unit_rows(x: np.ndarray) -> np.ndarray:
    return x / np.sqrt((x * x).sum(axis=1, keepdims=True))


def generate_embeddings(spec: ScenarioSpec) -> tuple[list[ImageRecord], EmbeddingSet]:
    """Unit-norm embeddings with per-group identity spread and image noise.

    Dispersion and noise are expressed as expected offset norms: each
    component is drawn with sd ``value / sqrt(dimension)``.
    """
    dims = {g.embedding_spec.dimension for g in spec.groups if g.embedding_spec}
    if any(g.embedding_spec is None for g in spec.groups):
        raise DomainError("every group needs an embedding_spec to generate embeddings")
    if len(dims) != 1:
        raise DomainError("all groups must share one embedding dimension")
    d = dims.pop()
    per_group = _group_records(spec)
    ids, blocks = [], []
    for gi, (g, recs) in enumerate(zip(spec.groups, per_group)):
        es = g.embedding_spec
        k = g.images_per_subject
        direction = _unit_rows(
            SplitMix64(derive_seed(spec.seed, gi, _DIRECTION)).normal(d).reshape(1, d)
        )
        offsets = SplitMix64(derive_seed(spec.seed, gi, _CENTERS)).normal(
            g.n_subjects * d, 0.0, es.center_dispersion / math.sqrt(d)
        )
        centers = _unit_rows(direction + offsets.reshape(g.n_subjects, d))
        images = np.repeat(centers, k, axis=0)
        if es.within_subject_sd > 0:
            noise = SplitMix64(derive_seed(spec.seed, gi, _NOISE)).normal(
                len(images) * d, 0.0, es.within_subject_sd / math.sqrt(d)
            )
            images = _unit_rows(images + noise.reshape(len(images), d))
        ids.extend(r.image_id for r in recs)
        blocks.append(images)
    records = [r for recs in per_group for r in recs]
    return records, EmbeddingSet(tuple(ids), np.concatenate(blocks))
