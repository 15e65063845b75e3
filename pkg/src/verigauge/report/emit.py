"""Serialisation of audit reports: JSON document, CSV bundle, curve exports.

All reals are written as 17-significant-digit decimal strings (``+inf`` /
``-inf`` for sentinels) so every value survives a round trip bit-exactly.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

from ..exceptions import IoError
from ..metrics import format_float, write_roc_csv, write_threshold_csv
from ..scoring import write_scored_pairs
from .audit import ALL, AuditReport

INDEX_NAME = "index.csv"
PLOT_SETTINGS = "plot.json"


def _encode(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if hasattr(obj, "item"):
        return _encode(obj.item())
    raise TypeError(f"cannot encode {type(obj).__name__}")


_FLOAT_KEYS = {
    "auc", "threshold", "achieved_far", "vr", "far_target", "t", "far", "frr", "gap", "shift",
}
_FLOAT_LIST_KEYS = {"far_targets", "fixed_thresholds", "tier_edges"}


def _decode(obj, key=None):
    if isinstance(obj, dict):
        return {k: _decode(v, k) for k, v in obj.items()}
    if isinstance(obj, list):
        if key in _FLOAT_LIST_KEYS:
            return [float(v) if isinstance(v, str) else _decode(v) for v in obj]
        return [_decode(v) for v in obj]
    if isinstance(obj, str) and key in _FLOAT_KEYS:
        return float(obj)
    return obj


def report_json(report: AuditReport) -> str:
    return json.dumps(_encode(report.to_dict()), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def parse_report(text: str) -> dict:
    """Parse a JSON report back into the structure of ``AuditReport.to_dict()``."""
    return _decode(json.loads(text))


def _write_bytes(path: Path, data: bytes):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue().encode("utf-8")


def _bundle_tables(report: AuditReport) -> dict[str, bytes]:
    d = report.to_dict()
    tables = {
        "results.csv": _csv_bytes(
            ["policy", "group", "tier", "n_genuine", "n_impostor", "auc"],
            [(r["policy"], r["group"], r["tier"], r["n_genuine"], r["n_impostor"], r["auc"]) for r in d["results"]],
        ),
        "operating_points.csv": _csv_bytes(
            ["policy", "group", "tier", "n_genuine", "n_impostor", "far_target", "threshold", "achieved_far", "vr", "resolved"],
            [
                (r["policy"], r["group"], r["tier"], r["n_genuine"], r["n_impostor"], op["far_target"],
                 op["threshold"], op["achieved_far"], op["vr"], str(op["resolved"]).lower())
                for r in d["results"]
                for op in r["operating_points"]
            ],
        ),
        "fixed_thresholds.csv": _csv_bytes(
            ["policy", "group", "tier", "n_genuine", "n_impostor", "t", "far", "frr", "vr"],
            [
                (r["policy"], r["group"], r["tier"], r["n_genuine"], r["n_impostor"], f["t"], f["far"], f["frr"], f["vr"])
                for r in d["results"]
                for f in r["fixed_thresholds"]
            ],
        ),
        "shifts.csv": _csv_bytes(
            ["policy", "tier", "group_a", "group_b", "far_target", "shift"],
            [(s["policy"], s["tier"], s["group_a"], s["group_b"], s["far_target"], s["shift"]) for s in d["shifts"]],
        ),
        "auc_gaps.csv": _csv_bytes(
            ["policy", "tier", "group_a", "group_b", "gap"],
            [(g["policy"], g["tier"], g["group_a"], g["group_b"], g["gap"]) for g in d["auc_gaps"]],
        ),
        "warnings.csv": _csv_bytes(
            ["code", "message", "policy", "tier", "group", "far_target", "stage"],
            [
                (w["code"], w["message"], w.get("policy", ""), w.get("tier", ""), w.get("group", ""),
                 w.get("far_target", ""), w.get("stage", ""))
                for w in d["warnings"]
            ],
        ),
        "validation_groups.csv": _csv_bytes(
            ["attribute", "value", "subjects", "images"],
            [
                (attr, value, c["subjects"], c["images"])
                for attr, counts in sorted(d["validation"]["group_counts"].items())
                for value, c in sorted(counts.items())
            ],
        ),
        "config.json": (
            json.dumps(_encode({"version": d["version"], "config": d["config"]}), indent=2, sort_keys=True) + "\n"
        ).encode("utf-8"),
    }
    return tables


def emit_report(report: AuditReport, out_dir, format: str = "json") -> list[Path]:
    """Write the report as ``report.json`` or as a CSV bundle with ``manifest.json``."""
    out = Path(out_dir)
    if format == "json":
        path = out / "report.json"
        _write_bytes(path, report_json(report).encode("utf-8"))
        return [path]
    if format not in ("csv", "csv-bundle"):
        raise ValueError(f"unknown report format {format!r}")
    tables = _bundle_tables(report)
    written = []
    for name in sorted(tables):
        _write_bytes(out / name, tables[name])
        written.append(out / name)
    manifest = {
        "version": report.version,
        "files": [
            {"name": name, "bytes": len(tables[name]), "sha256": hashlib.sha256(tables[name]).hexdigest()}
            for name in sorted(tables)
        ],
    }
    _write_bytes(out / "manifest.json", (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode("utf-8"))
    written.append(out / "manifest.json")
    return written


def slug(text: str) -> str:
    """Filesystem-safe, injective rendering of a label."""
    return "".join(c if c.isascii() and (c.isalnum() or c in "-_") else f"~{ord(c):x}~" for c in text)


def export_curves(report: AuditReport, out_dir) -> Path:
    """Write every ROC, threshold function and per-group score list as CSV, plus an index.

    Score lists are exported only for the untiered slice; they feed the
    histogram plots.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for c in report.curves:
        stem = f"{slug(c.policy)}__{slug(c.tier)}__{slug(c.group)}"
        roc_name, thr_name = f"roc__{stem}.csv", f"thr__{stem}.csv"
        write_roc_csv(c.roc, out / roc_name)
        write_threshold_csv(c.threshold_fn, out / thr_name)
        n = (c.roc.n_genuine, c.roc.n_impostor)
        rows.append(("roc", c.policy, c.tier, c.group, roc_name, *n))
        rows.append(("threshold", c.policy, c.tier, c.group, thr_name, *n))
        if c.tier == ALL:
            sc_name = f"scores__{stem}.csv"
            write_scored_pairs(c.scores, out / sc_name)
            rows.append(("scores", c.policy, c.tier, c.group, sc_name, *n))
    _write_bytes(
        out / INDEX_NAME,
        _csv_bytes(["kind", "policy", "tier", "group", "file", "n_genuine", "n_impostor"], rows),
    )
    settings = {"far_targets": report.config["far_targets"], "palette": report.config.get("palette")}
    _write_bytes(
        out / PLOT_SETTINGS,
        (json.dumps(_encode(settings), indent=2, sort_keys=True) + "\n").encode("utf-8"),
    )
    return out / INDEX_NAME
