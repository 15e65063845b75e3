"""Input checks shared by the estimator wrappers."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array, column_or_1d

GENUINE, IMPOSTOR = 1, 0
_LABEL_WORDS = {"genuine": GENUINE, "impostor": IMPOSTOR}


def check_scores(X) -> np.ndarray:
    """1-D float64 array of finite scores; accepts a single-column 2-D array too."""
    arr = check_array(X, ensure_2d=False, dtype=np.float64, ensure_all_finite=True)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"expected one score column, got shape {arr.shape}")
        arr = arr[:, 0]
    return column_or_1d(arr)


def check_labels(y, n: int | None = None) -> np.ndarray:
    """Pair labels as int64 1 (genuine) / 0 (impostor).

    Booleans, 0/1 integers and the strings ``genuine`` / ``impostor`` are accepted.
    """
    raw = column_or_1d(np.asarray(y, dtype=object) if _is_text(y) else np.asarray(y))
    if raw.dtype == object:
        try:
            out = np.array([_LABEL_WORDS[str(v).lower()] for v in raw], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"unknown pair label {exc.args[0]!r}") from None
    else:
        out = raw.astype(np.int64)
        if not np.array_equal(out, raw) or np.any((out != 0) & (out != 1)):
            raise ValueError("pair labels must be 0/1, booleans or 'genuine'/'impostor'")
    if n is not None and len(out) != n:
        raise ValueError(f"{len(out)} labels for {n} scores")
    return out


def _is_text(y) -> bool:
    arr = np.asarray(y)
    return arr.dtype.kind in "OUS"


def check_far_targets(far_targets) -> tuple[float, ...]:
    targets = tuple(float(f) for f in np.atleast_1d(far_targets))
    if not targets:
        raise ValueError("at least one FAR target is required")
    for f in targets:
        if not (0.0 < f <= 1.0):
            raise ValueError(f"FAR target {f!r} outside (0, 1]")
    return targets


def check_groups(groups, n: int) -> np.ndarray:
    if groups is None:
        return np.full(n, "", dtype=object)
    out = column_or_1d(np.asarray(groups, dtype=object))
    if len(out) != n:
        raise ValueError(f"{len(out)} group labels for {n} scores")
    return out
