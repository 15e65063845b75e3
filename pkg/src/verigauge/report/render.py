"""Render SVG plots from curve exports.

``audit`` writes its CSV exports first and then draws every plot through
this module, so the plots are by construction recomputable from the CSVs
(and ``plot`` reproduces them byte-for-byte).
"""

from __future__ import annotations

import csv
import json
from collections import OrderedDict
from pathlib import Path

import numpy as np

from ..exceptions import IoError
from ..metrics import RocCurve, ThresholdFunction, _threshold_for_far, read_curve_csv
from ..scoring import read_scored_pairs
from .emit import INDEX_NAME, PLOT_SETTINGS, slug
from .svg import plot_histograms, plot_roc, plot_threshold_functions

ALL = "<all>"


def _read_index(curves_dir: Path) -> list[dict]:
    try:
        with open(curves_dir / INDEX_NAME, newline="", encoding="utf-8") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise IoError(f"cannot read curve index in {curves_dir}: {exc}") from exc


def _read_settings(curves_dir: Path) -> tuple[list[float], list[str] | None]:
    try:
        raw = json.loads((curves_dir / PLOT_SETTINGS).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read plot settings in {curves_dir}: {exc}") from exc
    return [float(v) for v in raw["far_targets"]], raw.get("palette")


def load_roc(path, n_genuine: int, n_impostor: int) -> RocCurve:
    cols = read_curve_csv(path)
    return RocCurve(
        cols["threshold"],
        np.rint(cols["vr"] * n_genuine).astype(np.int64),
        np.rint(cols["far"] * n_impostor).astype(np.int64),
        n_genuine,
        n_impostor,
    )


def load_threshold_function(path, n_impostor: int, label: str = "") -> ThresholdFunction:
    cols = read_curve_csv(path)
    return ThresholdFunction(
        cols["threshold"], np.rint(cols["far"] * n_impostor).astype(np.int64), n_impostor, label
    )


def render_exports(curves_dir, plots_dir) -> list[Path]:
    curves_dir, plots_dir = Path(curves_dir), Path(plots_dir)
    plots_dir.mkdir(parents=True, exist_ok=True)
    far_targets, palette = _read_settings(curves_dir)

    rocs: OrderedDict = OrderedDict()
    thresholds: OrderedDict = OrderedDict()
    scores = []
    for row in _read_index(curves_dir):
        key = (row["policy"], row["tier"])
        ng, ni = int(row["n_genuine"]), int(row["n_impostor"])
        path = curves_dir / row["file"]
        if row["kind"] == "roc":
            rocs.setdefault(key, []).append((row["group"], load_roc(path, ng, ni)))
        elif row["kind"] == "threshold" and row["group"] != ALL:
            thresholds.setdefault(key, []).append(
                (row["group"], load_threshold_function(path, ni, row["group"]))
            )
        elif row["kind"] == "scores":
            scores.append((row["policy"], row["group"], path))

    written = []

    def put(name, text):
        p = plots_dir / name
        try:
            p.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot write {p}: {exc}") from exc
        written.append(p)

    for (policy, tier), curves in rocs.items():
        put(
            f"roc__{slug(policy)}__{slug(tier)}.svg",
            plot_roc(curves, far_targets, palette, title=f"ROC: yoking={policy}, tier={tier}"),
        )
    for (policy, tier), fns in thresholds.items():
        put(
            f"thr__{slug(policy)}__{slug(tier)}.svg",
            plot_threshold_functions(
                fns, far_targets, palette, title=f"Threshold functions: yoking={policy}, tier={tier}"
            ),
        )
    for policy, group, path in scores:
        _, gen, _, imp = read_scored_pairs(path)
        imp_sorted = np.sort(imp)
        lines = []
        for f in far_targets:
            t, _, ok = _threshold_for_far(imp_sorted, f)
            if ok:
                lines.append(t)
        put(
            f"hist__{slug(policy)}__{slug(group)}.svg",
            plot_histograms(gen, imp, lines, title=f"Scores: yoking={policy}, group={group}"),
        )
    return written
