from __future__ import annotations

import math
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

DEFAULT_LAMBDA = 0.1
SCORE_TOLERANCE = 1e-9


class AttributeSource(str, Enum):
    logits = "logits"
    probabilities = "probabilities"
    binary = "binary"


class Scheme(str, Enum):
    plain = "plain"
    weighted = "weighted"


class FusionConfig(BaseModel):
    """Fusion weight and attribute-matching choices for one matcher."""

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    lam: float = Field(default=DEFAULT_LAMBDA, ge=0.0, alias="lambda")
    attribute_source: AttributeSource = AttributeSource.logits
    scheme: Scheme = Scheme.plain

    @field_validator("lam")
    @classmethod
    def _finite_lambda(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("lambda must be finite")
        return v


class ScoreBreakdown(BaseModel):
    """Component scores of one gallery/probe comparison."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    patch_score: float = Field(ge=-1.0, le=1.0)
    attribute_score: float = Field(ge=-1.0, le=1.0)
    fused_score: float
    non_occluded_pairs: int = Field(ge=1)
    lam: float = Field(ge=0.0)

    @model_validator(mode="after")
    def _fused_is_consistent(self) -> "ScoreBreakdown":
        expected = self.patch_score + self.lam * self.attribute_score
        if abs(self.fused_score - expected) > SCORE_TOLERANCE:
            raise ValueError(
                f"fused_score {self.fused_score!r} != patch + lambda * attribute ({expected!r})"
            )
        return self
