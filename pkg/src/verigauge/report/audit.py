"""End-to-end audit pipeline and the in-memory report it produces."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .. import __version__
from ..exceptions import PipelineError, ValidationFailed, VerigaugeError
from ..ingest import load_embeddings, load_metadata, load_scores, validate_dataset
from ..metrics import (
    RocCurve,
    ThresholdFunction,
    auc,
    bias_stats,
    fixed_threshold_disparity,
    roc_curve,
    threshold_function,
)
from ..pairing import build_pair_set, stratify_pairs
from ..partition import assign_difficulty_tiers
from ..scoring import ScoredPairSet, attach_scores, score_pairs
from .config import AuditConfig

ALL = "<all>"
THREADS_ENV = "VERIGAUGE_THREADS"


@dataclass
class CurveSet:
    """Curves behind one report cell; kept in memory, exported as CSV."""

    policy: str
    tier: str
    group: str
    roc: RocCurve
    threshold_fn: ThresholdFunction
    scores: ScoredPairSet


@dataclass
class AuditReport:
    version: str
    config: dict
    validation: dict
    results: list[dict] = field(default_factory=list)
    shifts: list[dict] = field(default_factory=list)
    auc_gaps: list[dict] = field(default_factory=list)
    warnings: list[dict] = field(default_factory=list)
    curves: list[CurveSet] = field(default_factory=list, repr=False, compare=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": self.version,
            "config": self.config,
            "validation": self.validation,
            "results": self.results,
            "shifts": self.shifts,
            "auc_gaps": self.auc_gaps,
            "warnings": self.warnings,
        }

    def result(self, policy: str, group: str, tier: str = ALL) -> dict:
        for r in self.results:
            if (r["policy"], r["group"], r["tier"]) == (policy, group, tier):
                return r
        raise KeyError((policy, group, tier))


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)


def _warn(code, message, **where):
    return {"code": code, "message": message, **where}


def _cell(config: AuditConfig, policy: str, tier: str, scored: ScoredPairSet):
    """Metrics for one (policy, tier) slice: pooled row plus one row per group."""
    results, warnings, curves = [], [], []
    strata = stratify_pairs(scored, config.stratify)
    groups = {ALL: scored, **strata.groups}
    where = {"policy": policy, "tier": tier}
    if strata.unlabeled.n_genuine or strata.unlabeled.n_impostor:
        warnings.append(
            _warn(
                "UnlabeledPairs",
                f"{strata.unlabeled.n_genuine} genuine / {strata.unlabeled.n_impostor} impostor "
                f"pairs lack {config.stratify!r} and are excluded from per-group rows",
                **where,
            )
        )
    if strata.cross_group.n_impostor:
        warnings.append(
            _warn(
                "CrossGroupPairs",
                f"{strata.cross_group.n_impostor} cross-group impostor pairs appear only "
                f"in the pooled row",
                **where,
            )
        )

    usable = {}
    for label, s in groups.items():
        if s.n_genuine == 0 or s.n_impostor == 0:
            warnings.append(
                _warn(
                    "EmptyDistribution",
                    f"{s.n_genuine} genuine / {s.n_impostor} impostor pairs; no metrics",
                    group=label,
                    **where,
                )
            )
            continue
        usable[label] = s

    stats = bias_stats(usable, config.far_targets)
    for label, target in stats.unresolved:
        n = stats.per_group[label].n_impostor
        warnings.append(
            _warn(
                "UnresolvableFar",
                f"FAR {target:g} needs at least {int(np.ceil(1 / target))} impostor pairs "
                f"without top-score ties; have {n}",
                group=label,
                far_target=target,
                **where,
            )
        )

    fixed = {}
    if config.fixed_thresholds and usable:
        for t in config.fixed_thresholds:
            fixed[t] = fixed_threshold_disparity(usable, t)

    for label, gs in stats.per_group.items():
        s = usable[label]
        roc = roc_curve(s.genuine_scores, s.impostor_scores)
        curves.append(
            CurveSet(policy, tier, label, roc, threshold_function(s.impostor_scores, label), s)
        )
        results.append(
            {
                "policy": policy,
                "group": label,
                "tier": tier,
                "n_genuine": gs.n_genuine,
                "n_impostor": gs.n_impostor,
                "auc": auc(roc),
                "operating_points": [
                    {
                        "far_target": op.far_target,
                        "threshold": op.threshold,
                        "achieved_far": op.achieved_far,
                        "vr": op.vr,
                        "resolved": op.resolved,
                    }
                    for op in gs.operating_points
                ],
                "fixed_thresholds": [
                    {"t": t, "far": r[label].far, "frr": r[label].frr, "vr": r[label].vr}
                    for t, r in fixed.items()
                ],
            }
        )

    group_labels = [g for g in stats.per_group if g != ALL]
    shifts, gaps = [], []
    for a in group_labels:
        for b in group_labels:
            if a == b:
                continue
            gaps.append(
                {"policy": policy, "tier": tier, "group_a": a, "group_b": b, "gap": stats.auc_gaps[(a, b)]}
            )
            for target in config.far_targets:
                key = (a, b, target)
                if key in stats.shifts:
                    shifts.append(
                        {
                            "policy": policy,
                            "tier": tier,
                            "group_a": a,
                            "group_b": b,
                            "far_target": target,
                            "shift": stats.shifts[key],
                        }
                    )
    return results, shifts, gaps, warnings, curves


def _resolve(base: Path, p: str) -> Path:
    path = Path(p)
    return path if path.is_absolute() else base / path


def run_audit(config: AuditConfig, base_dir=".") -> AuditReport:
    base = Path(base_dir)
    stage = "load_metadata"
    try:
        records = load_metadata(_resolve(base, config.metadata))
        stage = "validate"
        audited = sorted({config.stratify, *(a for p in config.yoking for a in p)})
        validation = validate_dataset(records, audited, config.far_targets)
        if not validation.ok:
            raise ValidationFailed(validation, stage)

        stage = "load_scores"
        embeddings = table = None
        if config.embeddings is not None:
            embeddings = load_embeddings(_resolve(base, config.embeddings), config.embedding_format)
        else:
            table = load_scores(_resolve(base, config.scores))
        reference = None
        if config.tier_reference is not None:
            stage = "load_tier_reference"
            reference = load_scores(_resolve(base, config.tier_reference))

        report = AuditReport(__version__, config.echo(), validation.to_dict())
        for f in validation.warnings:
            report.warnings.append(_warn(f.code, f.message, stage="validate"))

        jobs = []
        for policy in config.policies():
            stage = f"pairing[{policy.label}]"
            pairs = build_pair_set(records, policy, config.impostor_sample, config.seed)
            if pairs.excluded_subjects:
                report.warnings.append(
                    _warn(
                        "ExcludedSubjects",
                        f"{pairs.excluded_subjects} subject(s) lack a yoking attribute and "
                        f"contribute no impostor pairs",
                        policy=policy.label,
                    )
                )
            if pairs.sample_seed is not None:
                report.warnings.append(
                    _warn(
                        "SampledImpostors",
                        f"impostors subsampled to {pairs.n_impostor} with seed {pairs.sample_seed}",
                        policy=policy.label,
                    )
                )
            stage = f"scoring[{policy.label}]"
            if embeddings is not None:
                scored = score_pairs(pairs, embeddings, config.metric)
            else:
                scored = attach_scores(pairs, table)
            jobs.append((policy.label, ALL, scored))
            if reference is not None:
                stage = f"partition[{policy.label}]"
                tiers = assign_difficulty_tiers(attach_scores(pairs, reference), config.tier_spec())
                for tier_name, part in tiers.split(scored).items():
                    jobs.append((policy.label, tier_name, part))

        stage = "metrics"
        with ThreadPoolExecutor(max_workers=_threads()) as pool:
            outputs = list(pool.map(lambda job: _cell(config, *job), jobs))
        for results, shifts, gaps, warns, curves in outputs:
            report.results.extend(results)
            report.shifts.extend(shifts)
            report.auc_gaps.extend(gaps)
            report.warnings.extend(warns)
            report.curves.extend(curves)
        return report
    except ValidationFailed:
        raise
    except VerigaugeError as exc:
        raise PipelineError(stage, exc) from exc
