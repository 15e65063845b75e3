"""Difficulty tiers for pairs, ranked by a reference system's scores.

Genuine pairs with low reference similarity and impostor pairs with high
reference similarity are the hard ones.  Tiers are quantile blocks of that
hardness ranking, computed separately for each label.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import IoError, TooFewPairs
from .ingest import ImageRecord, pair_key
from .scoring import ScoredPairSet

UNASSIGNED = -1


@dataclass(frozen=True)
class TierSpec:
    tier_names: tuple[str, ...] = ("good", "bad", "ugly")
    quantile_edges: tuple[float, ...] = (1 / 3, 2 / 3)

    def __post_init__(self):
        names, edges = tuple(self.tier_names), tuple(float(q) for q in self.quantile_edges)
        object.__setattr__(self, "tier_names", names)
        object.__setattr__(self, "quantile_edges", edges)
        if len(names) != len(edges) + 1:
            raise ValueError("need exactly one more tier name than quantile edges")
        if len(set(names)) != len(names):
            raise ValueError("tier names must be distinct")
        if any(not (0.0 < q < 1.0) for q in edges) or any(
            b <= a for a, b in zip(edges, edges[1:])
        ):
            raise ValueError("quantile edges must be strictly ascending within (0, 1)")

    @property
    def easiest(self) -> str:
        return self.tier_names[0]

    @property
    def hardest(self) -> str:
        return self.tier_names[-1]


def _hardness_blocks(scores: np.ndarray, descending: bool, edges) -> np.ndarray:
    """Block index per item, block 0 holding the hardest items."""
    n = len(scores)
    key = -scores if descending else scores
    order = np.lexsort((np.arange(n), key))
    ranked = key[order]
    bounds, prev = [], 0
    for q in edges:
        b = max(prev, math.ceil(q * n - 1e-9))
        # a run of equal scores stays in the earlier block
        while 0 < b < n and ranked[b] == ranked[b - 1]:
            b += 1
        bounds.append(b)
        prev = b
    block_of_rank = np.searchsorted(np.asarray(bounds), np.arange(n), side="right")
    out = np.empty(n, dtype=np.int64)
    out[order] = block_of_rank
    return out


@dataclass(frozen=True, eq=False)
class TieredPairs:
    """Tier index per reference pair (aligned with the reference PairSet)."""

    reference: ScoredPairSet
    spec: TierSpec
    genuine_tier: np.ndarray
    impostor_tier: np.ndarray

    @property
    def tier_names(self) -> tuple[str, ...]:
        return self.spec.tier_names

    @property
    def assignment(self) -> dict[tuple[str, str], str]:
        names = self.tier_names
        out = {}
        for p, k in zip(self.reference.pairs.genuine_pairs(), self.genuine_tier.tolist()):
            out[p] = names[k]
        for p, k in zip(self.reference.pairs.impostor_pairs(), self.impostor_tier.tolist()):
            out[p] = names[k]
        return out

    def counts(self) -> dict[str, tuple[int, int]]:
        """tier -> (n_genuine, n_impostor)."""
        g = np.bincount(self.genuine_tier, minlength=len(self.tier_names))
        i = np.bincount(self.impostor_tier, minlength=len(self.tier_names))
        return {name: (int(g[k]), int(i[k])) for k, name in enumerate(self.tier_names)}

    def _tiers_for(self, scored: ScoredPairSet) -> tuple[np.ndarray, np.ndarray]:
        ref = self.reference.pairs
        ps = scored.pairs
        if (
            ps.records is ref.records
            and np.array_equal(ps.genuine, ref.genuine)
            and np.array_equal(ps.impostor, ref.impostor)
        ):
            return self.genuine_tier, self.impostor_tier
        lookup = {}
        for p, k in zip(ref.genuine_pairs(), self.genuine_tier.tolist()):
            lookup[("g", p)] = k
        for p, k in zip(ref.impostor_pairs(), self.impostor_tier.tolist()):
            lookup[("i", p)] = k
        g = np.array(
            [lookup.get(("g", pair_key(*p)), UNASSIGNED) for p in ps.genuine_pairs()],
            dtype=np.int64,
        )
        i = np.array(
            [lookup.get(("i", pair_key(*p)), UNASSIGNED) for p in ps.impostor_pairs()],
            dtype=np.int64,
        )
        return g, i

    def split(self, scored: ScoredPairSet) -> dict[str, ScoredPairSet]:
        """Partition another system's scores on the same pairs by tier.

        Pairs absent from the reference are left out of every tier.
        """
        g, i = self._tiers_for(scored)
        return {name: scored.select(g == k, i == k) for k, name in enumerate(self.tier_names)}

    def unassigned(self, scored: ScoredPairSet) -> tuple[int, int]:
        g, i = self._tiers_for(scored)
        return int((g == UNASSIGNED).sum()), int((i == UNASSIGNED).sum())


def assign_difficulty_tiers(reference: ScoredPairSet, spec: TierSpec = TierSpec()) -> TieredPairs:
    n_tiers = len(spec.tier_names)
    for label, n in (("genuine", reference.n_genuine), ("impostor", reference.n_impostor)):
        if n < n_tiers:
            raise TooFewPairs(f"{n} {label} pairs cannot fill {n_tiers} tiers")
    top = n_tiers - 1
    g = top - _hardness_blocks(reference.genuine_scores, False, spec.quantile_edges)
    i = top - _hardness_blocks(reference.impostor_scores, True, spec.quantile_edges)
    return TieredPairs(reference, spec, g, i)


@dataclass
class TierSummaryRow:
    tier: str
    n_genuine: int
    n_impostor: int
    n_identities: int
    group_pairs: dict[str, int] = field(default_factory=dict)

    @property
    def n_pairs(self) -> int:
        return self.n_genuine + self.n_impostor


def tier_summary(
    tiers: TieredPairs, records: Sequence[ImageRecord] | None = None, attribute: str = "race"
) -> list[TierSummaryRow]:
    """Per-tier pair and identity counts, with pair counts per demographic group.

    Pairs spanning two groups count under ``"<cross-group>"``; pairs with an
    unlabeled image under ``"<unlabeled>"``.
    """
    recs = tiers.reference.pairs.records
    if records is not None:
        by_id = {r.image_id: r for r in records}
        recs = tuple(by_id[r.image_id] for r in recs)
    value = [r.attributes.get(attribute) for r in recs]
    ref = tiers.reference.pairs

    rows = []
    for k, name in enumerate(tiers.tier_names):
        g = ref.genuine[tiers.genuine_tier == k]
        i = ref.impostor[tiers.impostor_tier == k]
        both = np.concatenate([g, i])
        images = np.unique(both.ravel())
        n_ids = len({recs[x].subject_id for x in images.tolist()})
        groups: dict[str, int] = {}
        for a, b in both.tolist():
            va, vb = value[a], value[b]
            if va is None or vb is None:
                key = "<unlabeled>"
            elif va != vb:
                key = "<cross-group>"
            else:
                key = va
            groups[key] = groups.get(key, 0) + 1
        rows.append(TierSummaryRow(name, len(g), len(i), n_ids, dict(sorted(groups.items()))))
    return rows


def format_tier_summary(rows: Sequence[TierSummaryRow]) -> str:
    lines = ["tier,n_genuine,n_impostor,n_pairs,n_identities"]
    for r in rows:
        lines.append(f"{r.tier},{r.n_genuine},{r.n_impostor},{r.n_pairs},{r.n_identities}")
    return "\n".join(lines) + "\n"


def write_tiers(tiers: TieredPairs, path):
    names = tiers.tier_names
    rows = [
        (a, b, "genuine", names[k])
        for (a, b), k in zip(tiers.reference.pairs.genuine_pairs(), tiers.genuine_tier.tolist())
    ]
    rows += [
        (a, b, "impostor", names[k])
        for (a, b), k in zip(tiers.reference.pairs.impostor_pairs(), tiers.impostor_tier.tolist())
    ]
    rows.sort(key=lambda r: (r[0], r[1]))
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id_a", "id_b", "label", "tier"])
            w.writerows(rows)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
