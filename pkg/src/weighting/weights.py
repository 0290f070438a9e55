"""Weight vectors for the three attribute matchers.

- uniform:    every attribute weighted 1 (plain matcher)
- trained:    weight = training accuracy of the attribute classifier
- probe:      weight = confidence of the probe's attribute prediction,
              2 * |p - 0.5|, recomputed per probe

The trained and probe maps are floored at WEIGHT_FLOOR so a weighted norm
never vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from src.errors import InvalidWeightsError
from src.schemas.signature import AttributeComponent, WeightVector

WEIGHT_FLOOR = 0.01

WeightMap = Callable[[np.ndarray], np.ndarray]


def identity_map(accuracy: np.ndarray) -> np.ndarray:
    return np.asarray(accuracy, dtype=np.float64)


def boundary_distance_map(probabilities: np.ndarray) -> np.ndarray:
    return 2.0 * np.abs(np.asarray(probabilities, dtype=np.float64) - 0.5)


@dataclass(frozen=True)
class AttributeAccuracyTable:
    names: Tuple[str, ...]
    accuracies: Tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.names) != len(self.accuracies):
            raise InvalidWeightsError(
                f"{len(self.names)} attribute names for {len(self.accuracies)} accuracies"
            )
        if not self.names:
            raise InvalidWeightsError("accuracy table is empty")
        seen = set()
        for name, acc in zip(self.names, self.accuracies):
            if name in seen:
                raise InvalidWeightsError(f"attribute {name!r} listed more than once")
            seen.add(name)
            if not (0.0 <= acc <= 1.0):
                raise InvalidWeightsError(f"accuracy for {name!r} outside [0, 1]: {acc!r}")

    @classmethod
    def from_mapping(cls, mapping: Dict[str, float]) -> "AttributeAccuracyTable":
        return cls(names=tuple(mapping), accuracies=tuple(float(v) for v in mapping.values()))

    def ordered(self, names: Sequence[str]) -> np.ndarray:
        """Accuracies aligned to ``names``; every name must be covered exactly once."""
        lookup = dict(zip(self.names, self.accuracies))
        missing = [n for n in names if n not in lookup]
        if missing:
            raise InvalidWeightsError(f"accuracy table is missing attributes: {missing}")
        extra = sorted(set(self.names) - set(names))
        if extra:
            raise InvalidWeightsError(f"accuracy table has unknown attributes: {extra}")
        return np.array([lookup[n] for n in names], dtype=np.float64)


def uniform_weights(d: int) -> WeightVector:
    if d < 1:
        raise InvalidWeightsError(f"attribute dimension must be >= 1, got {d}")
    return WeightVector(np.ones(d, dtype=np.float64))


def weights_from_training_accuracy(
    table: AttributeAccuracyTable,
    names: Optional[Sequence[str]] = None,
    weight_map: WeightMap = identity_map,
    floor: float = WEIGHT_FLOOR,
) -> WeightVector:
    acc = table.ordered(names) if names is not None else np.array(table.accuracies, dtype=np.float64)
    return WeightVector(np.maximum(weight_map(acc), floor))


def weights_from_probe_confidence(
    probe_attrs: AttributeComponent,
    weight_map: WeightMap = boundary_distance_map,
    floor: float = WEIGHT_FLOOR,
) -> WeightVector:
    return WeightVector(np.maximum(weight_map(probe_attrs.probabilities), floor))
