"""Audit configuration file model."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..exceptions import FormatError, IoError
from ..pairing import YokingPolicy
from ..partition import TierSpec


class AuditConfig(BaseModel):
    """Everything needed to reproduce an audit.

    Input paths are resolved relative to ``base_dir`` (the directory of the
    config file when loaded with :func:`load_config`).
    """

    model_config = ConfigDict(extra="forbid")

    metadata: str
    embeddings: Optional[str] = None
    embedding_format: Literal["csv", "packed"] = "csv"
    scores: Optional[str] = None
    metric: Literal["cosine", "dot", "neg_euclidean"] = "cosine"
    yoking: list[list[str]] = Field(default_factory=lambda: [["race"]], min_length=1)
    stratify: str = "race"
    far_targets: list[float] = Field(default_factory=lambda: [1e-4, 1e-3], min_length=1)
    fixed_thresholds: list[float] = Field(default_factory=list)
    tier_reference: Optional[str] = None
    tier_names: list[str] = Field(default_factory=lambda: ["good", "bad", "ugly"])
    tier_edges: list[float] = Field(default_factory=lambda: [1 / 3, 2 / 3])
    impostor_sample: Optional[int] = Field(default=None, ge=1)
    seed: Optional[int] = Field(default=None, ge=0, lt=2**64)
    palette: Optional[list[str]] = None

    @field_validator("far_targets")
    @classmethod
    def _far_range(cls, v):
        for f in v:
            if not (0.0 < f <= 1.0):
                raise ValueError(f"FAR target {f!r} outside (0, 1]")
        return v

    @model_validator(mode="after")
    def _one_score_source(self):
        if (self.embeddings is None) == (self.scores is None):
            raise ValueError("exactly one of 'embeddings' or 'scores' must be given")
        for attrs in self.yoking:
            YokingPolicy(tuple(attrs))
        if self.tier_reference is not None:
            self.tier_spec()
        return self

    def policies(self) -> list[YokingPolicy]:
        return [YokingPolicy(tuple(a)) for a in self.yoking]

    def tier_spec(self) -> TierSpec:
        return TierSpec(tuple(self.tier_names), tuple(self.tier_edges))

    def echo(self) -> dict:
        return self.model_dump(mode="json")


def load_config(path) -> tuple[AuditConfig, Path]:
    """Parse a config file; returns the config and the directory paths resolve against."""
    p = Path(path)
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    try:
        return AuditConfig.model_validate(raw), p.parent
    except ValidationError as exc:
        raise FormatError(f"{path}: invalid audit config: {exc}") from exc
