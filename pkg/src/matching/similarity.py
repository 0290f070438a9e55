"""Cosine and weighted cosine similarity in float64.

Both functions are exactly symmetric in their two vector arguments and clamp
the result to [-1, 1].
"""

from __future__ import annotations

from typing import Union

import numpy as np

from src.errors import DimensionMismatchError, InvalidWeightsError, ZeroNormError
from src.schemas.signature import WeightVector


def _as_vector(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatchError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite values")
    return v


def clamp_unit(x: float) -> float:
    return min(1.0, max(-1.0, x))


def cosine(u, v) -> float:
    """u.v / (|u| |v|); zero-norm inputs raise ZeroNormError."""
    a = _as_vector(u, "u")
    b = _as_vector(v, "v")
    if a.shape != b.shape:
        raise DimensionMismatchError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroNormError("cosine undefined for a zero-norm vector")
    return clamp_unit(float(np.dot(a, b)) / (na * nb))


def _weights_array(w: Union[WeightVector, np.ndarray]) -> np.ndarray:
    if isinstance(w, WeightVector):
        return w.weights
    arr = np.asarray(w, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"weights must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidWeightsError("weights must be finite")
    if np.any(arr < 0):
        raise InvalidWeightsError("weights must be >= 0")
    return arr


def weighted_cosine(g, p, w: Union[WeightVector, np.ndarray]) -> float:
    """sum(w g p) / (sqrt(sum(w g^2)) sqrt(sum(w p^2)))."""
    a = _as_vector(g, "g")
    b = _as_vector(p, "p")
    weights = _weights_array(w)
    if not (a.shape == b.shape == weights.shape):
        raise DimensionMismatchError(
            f"length mismatch: g={a.shape[0]}, p={b.shape[0]}, w={weights.shape[0]}"
        )
    ng = float(np.dot(weights, a * a))
    np_ = float(np.dot(weights, b * b))
    if not (ng > 0.0 and np_ > 0.0):
        raise ZeroNormError("weighted cosine undefined: zero weighted norm")
    num = float(np.dot(weights, a * b))
    return clamp_unit(num / (np.sqrt(ng) * np.sqrt(np_)))
