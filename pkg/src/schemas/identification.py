from __future__ import annotations

from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, model_validator

from src.schemas.matching import ScoreBreakdown


class WeightMode(str, Enum):
    uniform = "uniform"
    trained = "trained"
    probe = "probe"


class Aggregation(str, Enum):
    max = "max"
    mean = "mean"


class RankedEntry(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    subject_id: str
    score: float
    breakdown: ScoreBreakdown


class SkippedSubject(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    subject_id: str
    reason: str


class RankedList(BaseModel):
    """Gallery subjects ordered by (score desc, subject_id asc) for one probe.

    Subjects that could not be scored are listed in ``skipped``; together with
    ``entries`` they cover the gallery. A probe that failed outright carries
    ``error`` and lists every subject as skipped.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    probe_id: str
    entries: List[RankedEntry]
    skipped: List[SkippedSubject] = []
    error: Optional[str] = None

    @model_validator(mode="after")
    def _ordered(self) -> "RankedList":
        keys = [(-e.score, e.subject_id) for e in self.entries]
        if any(a >= b for a, b in zip(keys, keys[1:])):
            raise ValueError("entries must be strictly ordered by (score desc, subject_id asc)")
        return self

    @property
    def ok(self) -> bool:
        return self.error is None

    def rank_of(self, subject_id: str) -> Optional[int]:
        """1-based rank of ``subject_id``; None when skipped or absent."""
        for i, e in enumerate(self.entries, start=1):
            if e.subject_id == subject_id:
                return i
        return None

    def top(self, k: int = 1) -> List[str]:
        return [e.subject_id for e in self.entries[:k]]
