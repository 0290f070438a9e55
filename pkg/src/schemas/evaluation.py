from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.schemas.identification import Aggregation, WeightMode
from src.schemas.matching import DEFAULT_LAMBDA, AttributeSource, FusionConfig, Scheme


class MatcherKind(str, Enum):
    plain = "plain"
    weighted = "weighted"  # training-accuracy weights
    probe = "probe"  # probe-confidence weights


class MethodConfig(BaseModel):
    """A named matcher: fusion weight, attribute weighting and template aggregation."""

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    name: str
    lam: float = Field(default=DEFAULT_LAMBDA, ge=0.0, alias="lambda")
    matcher: MatcherKind = MatcherKind.plain
    attribute_source: AttributeSource = AttributeSource.logits
    aggregation: Aggregation = Aggregation.max

    def fusion_config(self, lam: Optional[float] = None) -> FusionConfig:
        return FusionConfig(
            lam=self.lam if lam is None else lam,
            attribute_source=self.attribute_source,
            scheme=Scheme.plain if self.matcher is MatcherKind.plain else Scheme.weighted,
        )

    @property
    def weight_mode(self) -> WeightMode:
        return {
            MatcherKind.plain: WeightMode.uniform,
            MatcherKind.weighted: WeightMode.trained,
            MatcherKind.probe: WeightMode.probe,
        }[self.matcher]


def default_methods(lam: float = DEFAULT_LAMBDA) -> List[MethodConfig]:
    """Patch-only baseline plus the three fusion matchers."""
    return [
        MethodConfig(name="patch-only", lam=0.0),
        MethodConfig(name="fusion", lam=lam),
        MethodConfig(name="fusion-w", lam=lam, matcher=MatcherKind.weighted),
        MethodConfig(name="fusion-p", lam=lam, matcher=MatcherKind.probe),
    ]


class EvaluationSplit(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    gallery: Path
    probe: Path


class AccuracyReport(BaseModel):
    """Rank-k accuracies (percent) of one method on one split."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    split: str
    method: str
    rank_k: List[float]  # index 0 is rank-1
    cells: Dict[str, float] = {}
    probes_evaluated: int = Field(ge=0)
    probes_skipped: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _valid_curve(self) -> "AccuracyReport":
        for v in self.rank_k:
            if not (0.0 <= v <= 100.0):
                raise ValueError(f"accuracy {v} outside [0, 100]")
        if any(b < a for a, b in zip(self.rank_k, self.rank_k[1:])):
            raise ValueError("rank-k accuracy must be nondecreasing in k")
        return self

    @property
    def rank1(self) -> float:
        return self.rank_k[0]


class GridSearchResult(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    method: str
    best_lambda: float
    curve: List[Tuple[float, float]]  # (lambda, mean rank-1 over splits)
