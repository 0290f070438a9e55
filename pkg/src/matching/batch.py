"""Vectorized scoring of one probe signature against many gallery signatures.

The gallery side is stacked once: unit-normalized patch columns (N x n x m),
visibility bits (N x m) and the attribute source vectors (N x d). A probe is
then scored against every row with a handful of numpy reductions. Results
agree with ``match_signatures`` to floating-point rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Sequence

import numpy as np

from src.errors import DimensionMismatchError
from src.schemas.matching import AttributeSource
from src.schemas.signature import Signature, WeightVector

# rows per einsum call; bounds the temporary (block x n x m) buffer
BLOCK_ROWS = 256


class PairStatus(IntEnum):
    OK = 0
    NO_COMPARABLE_PATCHES = 1
    ZERO_NORM_PATCH = 2
    ZERO_NORM_ATTRIBUTE = 3


@dataclass(frozen=True)
class PairScores:
    """Per-gallery-row component scores for one probe; rows with status != OK hold NaN."""

    patch: np.ndarray
    attribute: np.ndarray
    fused: np.ndarray
    k: np.ndarray
    status: np.ndarray


class GalleryScorer:
    def __init__(self, signatures: Sequence[Signature], source: AttributeSource = AttributeSource.logits):
        if not signatures:
            raise ValueError("GalleryScorer needs at least one signature")
        first = signatures[0]
        for s in signatures:
            if not s.comparable_with(first):
                raise DimensionMismatchError(
                    f"gallery signature {s.image_id!r} is not comparable with {first.image_id!r}"
                )
        self.layout = first.layout
        self.attribute_dim = first.attributes.dim
        self.source = AttributeSource(source)

        self.units = np.stack([s.patch.unit_columns for s in signatures])
        self.visible = np.stack([s.patch.visible for s in signatures])
        self.nonzero = np.any(self.units != 0, axis=1)
        self.attrs = np.stack([s.attributes.source_vector(self.source.value) for s in signatures])
        self.attr_norms = np.linalg.norm(self.attrs, axis=1)

    def __len__(self) -> int:
        return int(self.units.shape[0])

    def _column_cosines(self, probe_units: np.ndarray) -> np.ndarray:
        out = np.empty(self.visible.shape, dtype=np.float64)
        for start in range(0, len(self), BLOCK_ROWS):
            stop = start + BLOCK_ROWS
            out[start:stop] = np.einsum("bij,ij->bj", self.units[start:stop], probe_units)
        return np.clip(out, -1.0, 1.0)

    def score(self, probe: Signature, lam: float, weights: Optional[WeightVector] = None) -> PairScores:
        if probe.layout != self.layout or probe.attributes.dim != self.attribute_dim:
            raise DimensionMismatchError(
                f"probe {probe.image_id!r} is not comparable with the gallery "
                f"({self.layout}, d={self.attribute_dim})"
            )
        n_rows = len(self)
        status = np.full(n_rows, PairStatus.OK, dtype=np.int8)

        # patch component
        mask = self.visible & probe.patch.visible[None, :]
        k = np.count_nonzero(mask, axis=1)
        probe_nonzero = np.any(probe.patch.unit_columns != 0, axis=0)
        zero_col = np.any(mask & ~(self.nonzero & probe_nonzero[None, :]), axis=1)
        cos = self._column_cosines(probe.patch.unit_columns)
        summed = np.where(mask, cos, 0.0).sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            s_p = np.clip(summed / k, -1.0, 1.0)
        status[zero_col] = PairStatus.ZERO_NORM_PATCH
        status[k == 0] = PairStatus.NO_COMPARABLE_PATCHES

        # attribute component
        a_p = probe.attributes.source_vector(self.source.value)
        if weights is None:
            num = self.attrs @ a_p
            den = self.attr_norms * float(np.linalg.norm(a_p))
        else:
            if weights.dim != self.attribute_dim:
                raise DimensionMismatchError(
                    f"weight vector has {weights.dim} entries, attributes have {self.attribute_dim}"
                )
            w = weights.weights
            num = (self.attrs * a_p[None, :]) @ w
            den = np.sqrt((self.attrs * self.attrs) @ w) * np.sqrt(float(np.dot(w, a_p * a_p)))
        bad_attr = ~(den > 0)
        with np.errstate(invalid="ignore", divide="ignore"):
            s_a = np.clip(num / den, -1.0, 1.0)
        status[bad_attr & (status == PairStatus.OK)] = PairStatus.ZERO_NORM_ATTRIBUTE

        ok = status == PairStatus.OK
        s_p = np.where(ok, s_p, np.nan)
        s_a = np.where(ok, s_a, np.nan)
        return PairScores(patch=s_p, attribute=s_a, fused=s_p + lam * s_a, k=k, status=status)
