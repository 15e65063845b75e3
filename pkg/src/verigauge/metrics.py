"""Accuracy and bias statistics over genuine/impostor score multisets.

A pair is accepted as a match when ``score >= threshold``.  Rates are
empirical step functions; AUC is the trapezoidal area under the empirical
ROC, which equals the concordance statistic with half credit for ties.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from itertools import permutations
from typing import Mapping, Sequence

import numpy as np

from .exceptions import EmptyDistribution, IoError, UnresolvableFar, UnresolvableFarWarning

NEG_INF = -math.inf
POS_INF = math.inf

# Relative slack when converting a FAR target into an allowed accept count,
# so that e.g. 0.29 * 100 counts as 29.
_COUNT_SLACK = 1e-12


def as_scores(x, name: str = "scores") -> np.ndarray:
    """Validate a score multiset and return it as a 1-D float64 array."""
    arr = np.asarray(x, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptyDistribution(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _accepts(sorted_scores: np.ndarray, t) -> np.ndarray:
    """Number of scores >= t (vectorised over t)."""
    return len(sorted_scores) - np.searchsorted(sorted_scores, t, side="left")


def far_at_threshold(impostor_scores, t: float) -> float:
    imp = np.sort(as_scores(impostor_scores, "impostor scores"))
    return int(_accepts(imp, t)) / len(imp)


def vr_at_threshold(genuine_scores, t: float) -> float:
    gen = np.sort(as_scores(genuine_scores, "genuine scores"))
    return int(_accepts(gen, t)) / len(gen)


def frr_at_threshold(genuine_scores, t: float) -> float:
    gen = np.sort(as_scores(genuine_scores, "genuine scores"))
    return (len(gen) - int(_accepts(gen, t))) / len(gen)


@dataclass(frozen=True, eq=False)
class RocCurve:
    """Empirical ROC sampled at every distinct score plus the two sentinels.

    Accept counts are kept as integers so the area can be computed exactly.
    """

    thresholds: np.ndarray
    genuine_accepts: np.ndarray
    impostor_accepts: np.ndarray
    n_genuine: int
    n_impostor: int

    @property
    def far(self) -> np.ndarray:
        return self.impostor_accepts / self.n_impostor

    @property
    def vr(self) -> np.ndarray:
        return self.genuine_accepts / self.n_genuine

    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.thresholds.tolist(), self.far.tolist(), self.vr.tolist()))

    def __len__(self):
        return len(self.thresholds)


@dataclass(frozen=True, eq=False)
class ThresholdFunction:
    thresholds: np.ndarray
    impostor_accepts: np.ndarray
    n_impostor: int
    group_label: str = ""

    @property
    def far(self) -> np.ndarray:
        return self.impostor_accepts / self.n_impostor

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.thresholds.tolist(), self.far.tolist()))

    def __call__(self, t: float) -> float:
        # far is constant on (t_{k-1}, t_k]
        k = np.searchsorted(self.thresholds, t, side="left")
        return float(self.impostor_accepts[k] / self.n_impostor)


def roc_curve(genuine_scores, impostor_scores) -> RocCurve:
    gen = np.sort(as_scores(genuine_scores, "genuine scores"))
    imp = np.sort(as_scores(impostor_scores, "impostor scores"))
    distinct = np.unique(np.concatenate([gen, imp]))
    t = np.concatenate([[NEG_INF], distinct, [POS_INF]])
    return RocCurve(t, _accepts(gen, t), _accepts(imp, t), len(gen), len(imp))


def auc(roc: RocCurve) -> float:
    ga = roc.genuine_accepts.astype(np.int64)
    ia = roc.impostor_accepts.astype(np.int64)
    twice_area = int(((ia[:-1] - ia[1:]) * (ga[:-1] + ga[1:])).sum())
    return twice_area / (2 * roc.n_genuine * roc.n_impostor)


def roc_auc(genuine_scores, impostor_scores) -> float:
    return auc(roc_curve(genuine_scores, impostor_scores))


def threshold_function(impostor_scores, group_label: str = "") -> ThresholdFunction:
    imp = np.sort(as_scores(impostor_scores, "impostor scores"))
    t = np.concatenate([[NEG_INF], np.unique(imp), [POS_INF]])
    return ThresholdFunction(t, _accepts(imp, t), len(imp), group_label)


@dataclass(frozen=True)
class OperatingPoint:
    far_target: float
    threshold: float
    achieved_far: float
    vr: float | None = None
    resolved: bool = True


def _check_target(target: float):
    if not (0.0 < target <= 1.0):
        raise ValueError(f"FAR target must lie in (0, 1], got {target!r}")


def _threshold_for_far(imp_sorted: np.ndarray, target: float) -> tuple[float, int, bool]:
    """(threshold, accepted impostor count, resolved) for a sorted impostor sample."""
    _check_target(target)
    n = len(imp_sorted)
    allowed = math.floor(target * n * (1.0 + _COUNT_SLACK))
    candidates = np.unique(imp_sorted)
    counts = _accepts(imp_sorted, candidates)
    ok = np.flatnonzero(counts <= allowed)
    if allowed < 1 or len(ok) == 0:
        return POS_INF, 0, False
    k = ok[0]
    return float(candidates[k]), int(counts[k]), True


def _warn_unresolved(target, n, where=""):
    warnings.warn(
        f"{where}FAR target {target:g} is below the empirical floor of {n} impostor "
        f"scores (1/n = {1.0 / n:.3g}) or blocked by ties; threshold set to +inf",
        UnresolvableFarWarning,
        stacklevel=3,
    )


def threshold_for_far(impostor_scores, target: float) -> OperatingPoint:
    """Smallest realisable threshold whose FAR does not exceed ``target``.

    Candidates are the distinct impostor scores and +inf.  Returns the +inf
    sentinel (``resolved=False``) and emits ``UnresolvableFarWarning`` when
    no finite candidate qualifies.
    """
    imp = np.sort(as_scores(impostor_scores, "impostor scores"))
    t, count, resolved = _threshold_for_far(imp, target)
    if not resolved:
        _warn_unresolved(target, len(imp))
    return OperatingPoint(target, t, count / len(imp), None, resolved)


def vr_at_far(genuine_scores, impostor_scores, target: float) -> OperatingPoint:
    gen = np.sort(as_scores(genuine_scores, "genuine scores"))
    imp = np.sort(as_scores(impostor_scores, "impostor scores"))
    t, count, resolved = _threshold_for_far(imp, target)
    if not resolved:
        _warn_unresolved(target, len(imp))
    vr = int(_accepts(gen, t)) / len(gen)
    return OperatingPoint(target, t, count / len(imp), vr, resolved)


def threshold_shift(impostor_a, impostor_b, target: float) -> float:
    """threshold_for_far(B) - threshold_for_far(A); positive means B needs a higher threshold."""
    a = np.sort(as_scores(impostor_a, "impostor scores A"))
    b = np.sort(as_scores(impostor_b, "impostor scores B"))
    ta, _, ok_a = _threshold_for_far(a, target)
    tb, _, ok_b = _threshold_for_far(b, target)
    if not ok_a:
        raise UnresolvableFar(f"FAR {target:g} unresolvable for group A ({len(a)} impostors)")
    if not ok_b:
        raise UnresolvableFar(f"FAR {target:g} unresolvable for group B ({len(b)} impostors)")
    return tb - ta


@dataclass(frozen=True)
class Rates:
    far: float
    frr: float
    vr: float


def _scores_of(group):
    if hasattr(group, "genuine_scores"):
        return group.genuine_scores, group.impostor_scores
    gen, imp = group
    return gen, imp


def fixed_threshold_disparity(groups: Mapping[str, object], t: float) -> dict[str, Rates]:
    """Rates for each group at one shared threshold.

    ``groups`` maps a label to a ScoredPairSet or a ``(genuine, impostor)`` tuple.
    """
    if not math.isfinite(t):
        raise ValueError("fixed threshold must be finite")
    if not groups:
        raise EmptyDistribution("no groups given")
    out = {}
    for label in sorted(groups):
        gen, imp = _scores_of(groups[label])
        vr = vr_at_threshold(gen, t)
        out[label] = Rates(far_at_threshold(imp, t), 1.0 - vr, vr)
    return out


def auc_gap(auc_a, auc_b):
    for v in (auc_a, auc_b):
        if not (0 <= v <= 1):
            raise ValueError(f"AUC must lie in [0, 1], got {v!r}")
    return auc_a - auc_b


@dataclass
class GroupStats:
    n_genuine: int
    n_impostor: int
    auc: float
    operating_points: list[OperatingPoint] = field(default_factory=list)

    @property
    def thresholds_at_far(self) -> dict[float, float]:
        return {op.far_target: op.threshold for op in self.operating_points}

    @property
    def vr_at_far(self) -> dict[float, float]:
        return {op.far_target: op.vr for op in self.operating_points}


@dataclass
class BiasStats:
    per_group: dict[str, GroupStats]
    # (group_a, group_b, far_target) -> threshold(B) - threshold(A)
    shifts: dict[tuple[str, str, float], float]
    # (group_a, group_b) -> auc(A) - auc(B)
    auc_gaps: dict[tuple[str, str], float]
    unresolved: list[tuple[str, float]] = field(default_factory=list)


def bias_stats(groups: Mapping[str, object], far_targets: Sequence[float]) -> BiasStats:
    """Per-group AUC and operating points, plus pairwise shifts and AUC gaps.

    Groups with an empty genuine or impostor distribution are skipped.
    Shifts are reported only where both groups resolve the target.
    """
    per_group, sorted_imp, unresolved = {}, {}, []
    for label in sorted(groups):
        gen, imp = _scores_of(groups[label])
        if len(gen) == 0 or len(imp) == 0:
            continue
        g = np.sort(as_scores(gen))
        i = np.sort(as_scores(imp))
        ops = []
        for target in far_targets:
            t, count, ok = _threshold_for_far(i, target)
            if not ok:
                unresolved.append((label, target))
            ops.append(OperatingPoint(target, t, count / len(i), int(_accepts(g, t)) / len(g), ok))
        per_group[label] = GroupStats(len(g), len(i), roc_auc(g, i), ops)
        sorted_imp[label] = i

    shifts, gaps = {}, {}
    for a, b in permutations(per_group, 2):
        gaps[(a, b)] = auc_gap(per_group[a].auc, per_group[b].auc)
        for op_a, op_b in zip(per_group[a].operating_points, per_group[b].operating_points):
            if op_a.resolved and op_b.resolved:
                shifts[(a, b, op_a.far_target)] = op_b.threshold - op_a.threshold
    return BiasStats(per_group, shifts, gaps, unresolved)


def format_float(x: float) -> str:
    if x == POS_INF:
        return "+inf"
    if x == NEG_INF:
        return "-inf"
    return f"{x:.17g}"


def parse_float(text: str) -> float:
    return float(text)


def write_roc_csv(roc: RocCurve, path):
    _write_rows(path, ["threshold", "far", "vr"], roc.points())


def write_threshold_csv(fn: ThresholdFunction, path):
    _write_rows(path, ["threshold", "far"], fn.points())


def _write_rows(path, header, rows):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([format_float(v) for v in row])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_curve_csv(path) -> dict[str, np.ndarray]:
    """Read a ROC or threshold-function export into column arrays."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    header, body = rows[0], rows[1:]
    return {h: np.array([parse_float(r[k]) for r in body]) for k, h in enumerate(header)}
