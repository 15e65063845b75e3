"""Command line entry point for verigauge audits.

Exit status is 0 on success, 1 when inputs fail to load or validate, and 2
on a usage error.  Diagnostics go to stderr; data goes to files or stdout.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from ..exceptions import ValidationFailed, VerigaugeError
from ..ingest import load_embeddings, load_metadata, load_scores, write_embeddings, write_metadata, write_scores
from ..metrics import format_float
from ..pairing import YokingPolicy, build_pair_set
from ..partition import assign_difficulty_tiers, format_tier_summary, tier_summary, write_tiers
from ..scoring import attach_scores, score_pairs
from ..synthetic import GROUP_ATTRIBUTE, generate_embeddings, generate_scores, load_scenario
from .audit import ALL, run_audit
from .config import AuditConfig, load_config
from .emit import emit_report, export_curves
from .render import render_exports


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2^64)")
    return v


def _add_overrides(p: argparse.ArgumentParser):
    p.add_argument("--yoke", action="append", metavar="ATTR[,ATTR...]",
                   help="yoking policy; repeat for several, 'none' for no constraint")
    p.add_argument("--stratify", metavar="ATTR")
    p.add_argument("--far", type=_floats, metavar="LIST", help="FAR targets, e.g. 1e-4,1e-3")
    p.add_argument("--threshold", type=_floats, metavar="LIST", help="fixed thresholds")
    p.add_argument("--metric", choices=("cosine", "dot", "neg_euclidean"))
    p.add_argument("--seed", type=_u64)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="verigauge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("audit", help="run an audit and write report, curves and plots")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    _add_overrides(p)

    p = sub.add_parser("simulate", help="write a synthetic corpus from a scenario file")
    p.add_argument("--config", required=True, help="scenario JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=("scores", "embeddings"), default="scores")
    p.add_argument("--seed", type=_u64, help="override the scenario seed")

    p = sub.add_parser("partition", help="export difficulty tiers for the configured pairs")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--yoke", metavar="ATTR[,ATTR...]", help="policy to partition (default: first configured)")

    p = sub.add_parser("thresholds", help="print per-group thresholds at FAR targets")
    p.add_argument("--config", required=True)
    _add_overrides(p)

    p = sub.add_parser("plot", help="re-render SVG plots from exported curve CSVs")
    p.add_argument("--input", required=True, help="curves directory written by audit")
    p.add_argument("--out", required=True)
    return parser


def _configure(args) -> tuple[AuditConfig, Path]:
    config, base = load_config(args.config)
    updates = {}
    if getattr(args, "yoke", None):
        updates["yoking"] = [list(YokingPolicy.parse(y).constrained_attributes) for y in args.yoke]
    for flag, key in (("stratify", "stratify"), ("far", "far_targets"), ("threshold", "fixed_thresholds"),
                      ("metric", "metric"), ("seed", "seed")):
        value = getattr(args, flag, None)
        if value is not None:
            updates[key] = value
    if updates:
        config = AuditConfig.model_validate({**config.model_dump(), **updates})
    return config, base


def _cmd_audit(args) -> int:
    config, base = _configure(args)
    report = run_audit(config, base)
    out = Path(args.out)
    emit_report(report, out, "json" if args.format == "json" else "csv-bundle")
    export_curves(report, out / "curves")
    render_exports(out / "curves", out / "plots")
    for w in report.warnings:
        print(f"warning: {w['code']}: {w['message']}", file=sys.stderr)
    return 0


def _cmd_simulate(args) -> int:
    spec = load_scenario(args.config)
    if args.seed is not None:
        spec = spec.model_copy(update={"seed": args.seed})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = {"metadata": "metadata.csv", "yoking": [[GROUP_ATTRIBUTE]], "stratify": GROUP_ATTRIBUTE}
    if args.kind == "scores":
        synth = generate_scores(spec)
        write_metadata(synth.records, out / "metadata.csv")
        write_scores(synth.score_table(), out / "scores.csv")
        config["scores"] = "scores.csv"
    else:
        records, emb = generate_embeddings(spec)
        write_metadata(records, out / "metadata.csv")
        write_embeddings(emb, out / "embeddings.vge", "packed")
        config.update(embeddings="embeddings.vge", embedding_format="packed")
    (out / "audit_config.json").write_text(json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def _cmd_partition(args) -> int:
    config, base = load_config(args.config)
    policy = YokingPolicy.parse(args.yoke) if args.yoke else config.policies()[0]
    records = load_metadata(base / config.metadata)
    pairs = build_pair_set(records, policy, config.impostor_sample, config.seed)
    if config.tier_reference is not None:
        reference = attach_scores(pairs, load_scores(base / config.tier_reference))
    elif config.scores is not None:
        reference = attach_scores(pairs, load_scores(base / config.scores))
    else:
        emb = load_embeddings(base / config.embeddings, config.embedding_format)
        reference = score_pairs(pairs, emb, config.metric)
    tiers = assign_difficulty_tiers(reference, config.tier_spec())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_tiers(tiers, out / "tiers.csv")
    (out / "tier_summary.csv").write_text(
        format_tier_summary(tier_summary(tiers, attribute=config.stratify)), encoding="utf-8"
    )
    return 0


def _cmd_thresholds(args) -> int:
    config, base = _configure(args)
    report = run_audit(config, base)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["policy", "group", "far_target", "threshold", "achieved_far", "vr", "resolved"])
    for r in report.results:
        if r["tier"] != ALL or r["group"] == ALL:
            continue
        for op in r["operating_points"]:
            w.writerow([
                r["policy"], r["group"], format_float(op["far_target"]), format_float(op["threshold"]),
                format_float(op["achieved_far"]), format_float(op["vr"]), str(op["resolved"]).lower(),
            ])
    return 0


def _cmd_plot(args) -> int:
    render_exports(args.input, args.out)
    return 0


_COMMANDS = {
    "audit": _cmd_audit,
    "simulate": _cmd_simulate,
    "partition": _cmd_partition,
    "thresholds": _cmd_thresholds,
    "plot": _cmd_plot,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ValidationFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        for f in exc.report.errors:
            print(f"  {f.code}: {f.message}", file=sys.stderr)
        return 1
    except (VerigaugeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        # config overrides that fail model validation
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
