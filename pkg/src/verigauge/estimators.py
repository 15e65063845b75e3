"""scikit-learn style wrappers around per-group calibration and difficulty tiers.

Both estimators take a 1-D array of pair scores as ``X`` and pair labels
(1 = genuine, 0 = impostor) as ``y``, so they slot into pipelines that
already hold scored pairs.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .metrics import _threshold_for_far
from .partition import TierSpec, _hardness_blocks
from .validation import check_far_targets, check_groups, check_labels, check_scores


class GroupThresholdCalibrator(BaseEstimator):
    """Per-group decision thresholds that each hit the same FAR target.

    ``fit`` picks, for every group, the smallest threshold whose empirical
    FAR on that group's impostor scores does not exceed ``far_target``.
    Groups without enough impostors get ``+inf`` and are listed in
    ``unresolved_``.
    """

    def __init__(self, far_target: float = 1e-3):
        self.far_target = far_target

    def fit(self, X, y, groups=None):
        (target,) = check_far_targets(self.far_target)
        scores = check_scores(X)
        labels = check_labels(y, len(scores))
        groups = check_groups(groups, len(scores))
        self.thresholds_, self.achieved_far_, self.unresolved_ = {}, {}, []
        for g in sorted(set(groups.tolist())):
            imp = np.sort(scores[(groups == g) & (labels == 0)])
            if len(imp) == 0:
                raise ValueError(f"group {g!r} has no impostor scores")
            t, count, ok = _threshold_for_far(imp, target)
            self.thresholds_[g] = t
            self.achieved_far_[g] = count / len(imp)
            if not ok:
                self.unresolved_.append(g)
        self.classes_ = np.array([0, 1])
        return self

    def _thresholds_for(self, groups, n) -> np.ndarray:
        check_is_fitted(self, "thresholds_")
        groups = check_groups(groups, n)
        try:
            return np.array([self.thresholds_[g] for g in groups.tolist()], dtype=np.float64)
        except KeyError as exc:
            raise ValueError(f"group {exc.args[0]!r} was not seen during fit") from None

    def decision_function(self, X, groups=None) -> np.ndarray:
        """Score minus the group's threshold; non-negative means accept."""
        scores = check_scores(X)
        return scores - self._thresholds_for(groups, len(scores))

    def predict(self, X, groups=None) -> np.ndarray:
        scores = check_scores(X)
        return (scores >= self._thresholds_for(groups, len(scores))).astype(np.int64)


class DifficultyTierTransformer(TransformerMixin, BaseEstimator):
    """Quantile difficulty tiers learned from reference scores.

    ``fit`` ranks genuine pairs ascending and impostor pairs descending by
    score and stores the cut scores between quantile blocks.  ``transform``
    places new pairs against those cuts, so ``fit_transform`` on the
    reference reproduces the rank-based assignment exactly.
    """

    def __init__(self, tier_names=("good", "bad", "ugly"), quantile_edges=(1 / 3, 2 / 3)):
        self.tier_names = tier_names
        self.quantile_edges = quantile_edges

    def fit(self, X, y):
        spec = TierSpec(tuple(self.tier_names), tuple(self.quantile_edges))
        scores = check_scores(X)
        labels = check_labels(y, len(scores))
        self.cuts_ = {}
        for label in (1, 0):
            key = self._key(scores[labels == label], label)
            if len(key) < len(spec.tier_names):
                raise ValueError(f"{len(key)} pairs with label {label} cannot fill {len(spec.tier_names)} tiers")
            blocks = _hardness_blocks(key, False, spec.quantile_edges)
            used = np.unique(blocks)
            self.cuts_[label] = (used, np.array([key[blocks == b].max() for b in used]))
        self.spec_ = spec
        return self

    @staticmethod
    def _key(scores, label):
        # hardness key: ascending = harder first
        return scores if label == 1 else -scores

    def transform(self, X, y) -> np.ndarray:
        check_is_fitted(self, "cuts_")
        scores = check_scores(X)
        labels = check_labels(y, len(scores))
        names = np.array(self.spec_.tier_names, dtype=object)
        top = len(names) - 1
        out = np.empty(len(scores), dtype=object)
        for label in (1, 0):
            mask = labels == label
            used, cuts = self.cuts_[label]
            pos = np.searchsorted(cuts, self._key(scores[mask], label), side="left")
            out[mask] = names[top - used[np.minimum(pos, len(used) - 1)]]
        return out

    def fit_transform(self, X, y, **fit_params):
        return self.fit(X, y).transform(X, y)
