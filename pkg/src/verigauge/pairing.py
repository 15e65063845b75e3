"""Genuine/impostor pair enumeration with demographic yoking."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import IoError, UnknownAttribute
from .ingest import ImageRecord
from .rng import SplitMix64, derive_seed

# Above this many candidate pairs, sampling switches from enumerate-and-choose
# to rejection sampling.
_ENUMERATE_LIMIT = 4_000_000
_BLOCK_CELLS = 4_000_000


@dataclass(frozen=True)
class YokingPolicy:
    constrained_attributes: tuple[str, ...] = ()

    def __post_init__(self):
        attrs = tuple(self.constrained_attributes)
        object.__setattr__(self, "constrained_attributes", attrs)
        if len(set(attrs)) != len(attrs):
            raise ValueError(f"duplicate attribute in yoking policy {attrs}")

    @classmethod
    def parse(cls, text: str | Sequence[str] | None) -> "YokingPolicy":
        if text is None:
            return cls()
        if isinstance(text, str):
            if text.strip().lower() in ("", "none"):
                return cls()
            text = [t.strip() for t in text.split(",") if t.strip()]
        return cls(tuple(text))

    @property
    def label(self) -> str:
        return "+".join(self.constrained_attributes) if self.constrained_attributes else "none"

    def check(self, available: Sequence[str]):
        missing = [a for a in self.constrained_attributes if a not in available]
        if missing:
            raise UnknownAttribute(f"yoking attribute(s) not in metadata: {', '.join(missing)}")


@dataclass(frozen=True, eq=False)
class PairSet:
    """Genuine and impostor pairs over a fixed record table.

    Pairs are stored as ``(i, j)`` row indices into ``records`` with
    ``i < j``; records are sorted by image id, so index order is the
    canonical lexicographic order of image ids.
    """

    records: tuple[ImageRecord, ...]
    genuine: np.ndarray
    impostor: np.ndarray
    policy: YokingPolicy = field(default_factory=YokingPolicy)
    excluded_subjects: int = 0
    sample_seed: int | None = None

    @property
    def ids(self) -> list[str]:
        return [r.image_id for r in self.records]

    def _as_ids(self, idx: np.ndarray) -> list[tuple[str, str]]:
        recs = self.records
        return [(recs[i].image_id, recs[j].image_id) for i, j in idx.tolist()]

    def genuine_pairs(self) -> list[tuple[str, str]]:
        return self._as_ids(self.genuine)

    def impostor_pairs(self) -> list[tuple[str, str]]:
        return self._as_ids(self.impostor)

    @property
    def n_genuine(self) -> int:
        return len(self.genuine)

    @property
    def n_impostor(self) -> int:
        return len(self.impostor)

    def select(self, genuine_mask, impostor_mask) -> "PairSet":
        return PairSet(
            self.records,
            self.genuine[genuine_mask],
            self.impostor[impostor_mask],
            self.policy,
            self.excluded_subjects,
            self.sample_seed,
        )


def sorted_records(records: Sequence[ImageRecord]) -> tuple[ImageRecord, ...]:
    return tuple(sorted(records, key=lambda r: r.image_id))


def available_attributes(records: Sequence[ImageRecord]) -> list[str]:
    return sorted({k for r in records for k in r.attributes})


def _codes(values: Sequence) -> np.ndarray:
    table: dict = {}
    return np.array([table.setdefault(v, len(table)) for v in values], dtype=np.int64)


def _canonical(idx: np.ndarray) -> np.ndarray:
    if len(idx) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    order = np.lexsort((idx[:, 1], idx[:, 0]))
    return np.ascontiguousarray(idx[order], dtype=np.int64)


def _genuine_index(recs: tuple[ImageRecord, ...]) -> np.ndarray:
    subj = _codes([r.subject_id for r in recs])
    order = np.argsort(subj, kind="stable")
    bounds = np.flatnonzero(np.diff(subj[order])) + 1
    chunks = []
    for members in np.split(order, bounds):
        k = len(members)
        if k < 2:
            continue
        a, b = np.triu_indices(k, 1)
        chunks.append(np.stack([members[a], members[b]], axis=1))
    if not chunks:
        return np.zeros((0, 2), dtype=np.int64)
    return _canonical(np.concatenate(chunks))


def enumerate_genuine_pairs(records: Sequence[ImageRecord]) -> list[tuple[str, str]]:
    recs = sorted_records(records)
    idx = _genuine_index(recs)
    return [(recs[i].image_id, recs[j].image_id) for i, j in idx.tolist()]


def _yoke_keys(recs, policy: YokingPolicy) -> tuple[np.ndarray, int]:
    """Per-record key code for the constrained attributes; -1 when any is missing."""
    attrs = policy.constrained_attributes
    keys, excluded = [], set()
    for r in recs:
        vals = tuple(r.attributes.get(a) for a in attrs)
        if any(v is None for v in vals):
            keys.append(None)
            excluded.add(r.subject_id)
        else:
            keys.append(vals)
    table: dict = {}
    codes = np.array(
        [-1 if k is None else table.setdefault(k, len(table)) for k in keys], dtype=np.int64
    )
    return codes, len(excluded)


def _groups(keys: np.ndarray) -> list[np.ndarray]:
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    bounds = np.flatnonzero(np.diff(sorted_keys)) + 1
    return [g for g in np.split(order, bounds) if len(g) and keys[g[0]] >= 0]


def _impostors_within(members: np.ndarray, subj: np.ndarray) -> np.ndarray:
    members = np.sort(members)
    n = len(members)
    s = subj[members]
    out = []
    step = max(1, _BLOCK_CELLS // max(n, 1))
    cols = np.arange(n)
    for r0 in range(0, n - 1, step):
        rows = np.arange(r0, min(n - 1, r0 + step))
        mask = (cols[None, :] > rows[:, None]) & (s[None, :] != s[rows][:, None])
        a, b = np.nonzero(mask)
        out.append(np.stack([members[rows[a]], members[b]], axis=1))
    if not out:
        return np.zeros((0, 2), dtype=np.int64)
    return np.concatenate(out)


def _impostor_total(groups, subj) -> int:
    total = 0
    for g in groups:
        n = len(g)
        _, counts = np.unique(subj[g], return_counts=True)
        total += n * (n - 1) // 2 - int((counts * (counts - 1) // 2).sum())
    return total


def _enumerate_impostors(groups, subj) -> np.ndarray:
    parts = [_impostors_within(g, subj) for g in groups]
    if not parts:
        return np.zeros((0, 2), dtype=np.int64)
    return _canonical(np.concatenate(parts))


def _rejection_sample(subj, keys, count, stream) -> np.ndarray:
    eligible = np.flatnonzero(keys >= 0)
    m = len(eligible)
    seen: dict[int, None] = {}
    n_total = len(subj)
    batch = max(1024, 4 * count)
    while len(seen) < count:
        i = eligible[stream.integers(batch, m)]
        j = eligible[stream.integers(batch, m)]
        ok = (i != j) & (subj[i] != subj[j]) & (keys[i] == keys[j])
        lo, hi = np.minimum(i[ok], j[ok]), np.maximum(i[ok], j[ok])
        for code in (lo * n_total + hi).tolist():
            if code not in seen:
                seen[code] = None
                if len(seen) == count:
                    break
    codes = np.fromiter(seen, dtype=np.int64, count=len(seen))
    return _canonical(np.stack([codes // n_total, codes % n_total], axis=1))


def _impostor_index(recs, policy: YokingPolicy, sample: int | None, seed: int | None):
    subj = _codes([r.subject_id for r in recs])
    keys, excluded = _yoke_keys(recs, policy)
    groups = _groups(keys)
    if sample is None:
        return _enumerate_impostors(groups, subj), excluded
    total = _impostor_total(groups, subj)
    if sample >= total:
        return _enumerate_impostors(groups, subj), excluded
    stream = SplitMix64(derive_seed(seed or 0, 0x7061697273))
    if total <= _ENUMERATE_LIMIT:
        full = _enumerate_impostors(groups, subj)
        keep = np.argsort(stream.next_uint64(total), kind="stable")[:sample]
        return _canonical(full[np.sort(keep)]), excluded
    return _rejection_sample(subj, keys, sample, stream), excluded


def enumerate_impostor_pairs(
    records: Sequence[ImageRecord],
    policy: YokingPolicy = YokingPolicy(),
    sample: int | None = None,
    seed: int | None = None,
) -> list[tuple[str, str]]:
    recs = sorted_records(records)
    policy.check(available_attributes(recs))
    idx, _ = _impostor_index(recs, policy, sample, seed)
    return [(recs[i].image_id, recs[j].image_id) for i, j in idx.tolist()]


def build_pair_set(
    records: Sequence[ImageRecord],
    policy: YokingPolicy = YokingPolicy(),
    sample: int | None = None,
    seed: int | None = None,
) -> PairSet:
    """Enumerate genuine and impostor pairs for ``policy``.

    With ``sample`` set, impostors are a seeded uniform subsample of that
    size (genuine pairs are always complete).
    """
    recs = sorted_records(records)
    policy.check(available_attributes(recs))
    imp, excluded = _impostor_index(recs, policy, sample, seed)
    return PairSet(
        recs, _genuine_index(recs), imp, policy, excluded, seed if sample is not None else None
    )


@dataclass
class Stratification:
    """Per-group buckets plus the pairs that do not belong to a single group."""

    attribute: str
    groups: dict
    cross_group: object
    unlabeled: object

    def sizes(self) -> dict[str, tuple[int, int]]:
        out = {k: (v.n_genuine, v.n_impostor) for k, v in self.groups.items()}
        out["<cross-group>"] = (self.cross_group.n_genuine, self.cross_group.n_impostor)
        out["<unlabeled>"] = (self.unlabeled.n_genuine, self.unlabeled.n_impostor)
        return out


def _records_of(pairs):
    return pairs.pairs.records if hasattr(pairs, "pairs") else pairs.records


def stratify_pairs(pairs, attribute: str) -> Stratification:
    """Partition a PairSet (or ScoredPairSet) by a demographic attribute.

    Pairs whose two images carry different values go to ``cross_group``;
    pairs touching an image without the attribute go to ``unlabeled``.
    """
    recs = _records_of(pairs)
    raw = [r.attributes.get(attribute) for r in recs]
    values = sorted({v for v in raw if v is not None})
    lookup = {v: i for i, v in enumerate(values)}
    code = np.array([-1 if v is None else lookup[v] for v in raw], dtype=np.int64)

    def split(idx):
        a, b = code[idx[:, 0]], code[idx[:, 1]]
        missing = (a < 0) | (b < 0)
        return a, missing, (a != b) & ~missing

    ga, gmiss, gcross = split(_index_of(pairs, "genuine"))
    ia, imiss, icross = split(_index_of(pairs, "impostor"))
    groups = {
        v: pairs.select((ga == k) & ~gmiss & ~gcross, (ia == k) & ~imiss & ~icross)
        for k, v in enumerate(values)
    }
    return Stratification(
        attribute, groups, pairs.select(gcross, icross), pairs.select(gmiss, imiss)
    )


def _index_of(pairs, which):
    ps = pairs.pairs if hasattr(pairs, "pairs") else pairs
    return getattr(ps, which)


def write_pair_list(pairs: PairSet, path):
    rows = [(a, b, "genuine") for a, b in pairs.genuine_pairs()]
    rows += [(a, b, "impostor") for a, b in pairs.impostor_pairs()]
    rows.sort(key=lambda r: (r[0], r[1]))
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id_a", "id_b", "label"])
            w.writerows(rows)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
