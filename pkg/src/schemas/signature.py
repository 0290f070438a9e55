"""Signature data model: patch component, attribute component, weights.

Types are frozen dataclasses holding numpy arrays. Construction does not
enforce invariants (``src.signature.assembler.validate`` reports them) so
that malformed inputs can be inspected; ``assemble_signature`` and the file
loader are the validated entry points.

Features, logits and probabilities are held as float64 in memory. Files store
float32, so a signature read from disk carries float32-representable values.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import ClassVar, Dict, Tuple

import numpy as np

from src.errors import InvalidWeightsError


@dataclass(frozen=True)
class PatchLayout:
    patch_count: int  # m
    feature_dim: int  # n
    scheme_name: str = "SYNTH"

    PRESETS: ClassVar[Dict[str, Tuple[int, int]]] = {
        "PRFS": (64, 1024),
        "DPRFS": (8, 512),
    }

    @classmethod
    def preset(cls, name: str) -> "PatchLayout":
        key = name.upper()
        if key not in cls.PRESETS:
            raise KeyError(f"unknown patch layout preset {name!r}; known: {sorted(cls.PRESETS)}")
        m, n = cls.PRESETS[key]
        return cls(patch_count=m, feature_dim=n, scheme_name=key)


@dataclass(frozen=True, eq=False)
class PatchFeatureComponent:
    """S^P: feature matrix F (n rows x m columns) and occlusion bits O (1 = visible)."""

    layout: PatchLayout
    features: np.ndarray
    occlusion: np.ndarray

    @cached_property
    def visible(self) -> np.ndarray:
        return np.asarray(self.occlusion, dtype=bool)

    @cached_property
    def unit_columns(self) -> np.ndarray:
        """Columns of F scaled to unit norm in float64; zero columns stay zero."""
        f = np.asarray(self.features, dtype=np.float64)
        norms = np.linalg.norm(f, axis=0)
        return np.divide(f, norms, out=np.zeros_like(f), where=norms > 0)


@dataclass(frozen=True, eq=False)
class AttributeComponent:
    """S^A: logits A, probabilities P = sigmoid(A), binary flags B = [P > 0.5]."""

    logits: np.ndarray
    probabilities: np.ndarray
    binary: np.ndarray
    attribute_names: Tuple[str, ...]

    @property
    def dim(self) -> int:
        return int(np.asarray(self.logits).shape[0])

    def source_vector(self, source: str) -> np.ndarray:
        if source == "logits":
            return np.asarray(self.logits, dtype=np.float64)
        if source == "probabilities":
            return np.asarray(self.probabilities, dtype=np.float64)
        if source == "binary":
            return np.asarray(self.binary, dtype=np.float64)
        raise ValueError(f"unknown attribute source {source!r}")


@dataclass(frozen=True, eq=False)
class Signature:
    subject_id: str
    image_id: str
    patch: PatchFeatureComponent
    attributes: AttributeComponent

    @property
    def layout(self) -> PatchLayout:
        return self.patch.layout

    def comparable_with(self, other: "Signature") -> bool:
        return (
            self.layout == other.layout
            and self.attributes.dim == other.attributes.dim
        )


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Per-attribute nonnegative weights W; at least one weight is positive."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise InvalidWeightsError("weights must be a nonempty 1-D vector")
        if not np.all(np.isfinite(w)):
            raise InvalidWeightsError("weights must be finite")
        if np.any(w < 0):
            raise InvalidWeightsError(f"weights must be >= 0 (min {w.min()!r})")
        if not np.any(w > 0):
            raise InvalidWeightsError("at least one weight must be positive")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return int(self.weights.shape[0])
