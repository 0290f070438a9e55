"""Per-pair signature matching.

    s^p  = mean over mutually visible patches of cosine(F^g_j, F^p_j)
    s^a  = cosine(A^g, A^p)             (plain)
    s^a_w = weighted_cosine(A^g, A^p, W) (weighted)
    s    = s^p + lambda * s^a

This is the reference path; ``src.matching.batch`` scores a probe against a
whole gallery with the same math.
"""

from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np

from src.errors import (
    ComponentMatchError,
    ConfigError,
    DimensionMismatchError,
    NoComparablePatchesError,
    NonFiniteScoreError,
    SigfuseError,
    ZeroNormError,
)
from src.matching.similarity import clamp_unit, cosine, weighted_cosine
from src.schemas.matching import AttributeSource, FusionConfig, ScoreBreakdown, Scheme
from src.schemas.signature import (
    AttributeComponent,
    PatchFeatureComponent,
    Signature,
    WeightVector,
)


def patch_component_score(g: PatchFeatureComponent, p: PatchFeatureComponent) -> Tuple[float, int]:
    """(s^p, k) where k counts patches visible in both components."""
    if g.layout != p.layout:
        raise DimensionMismatchError(f"patch layouts differ: {g.layout} vs {p.layout}")
    mask = g.visible & p.visible
    k = int(np.count_nonzero(mask))
    if k == 0:
        raise NoComparablePatchesError("no comparable patches: no patch is visible in both")

    ug = g.unit_columns[:, mask]
    up = p.unit_columns[:, mask]
    if not (np.all(np.any(ug != 0, axis=0)) and np.all(np.any(up != 0, axis=0))):
        raise ZeroNormError("a mutually visible patch has a zero-norm feature column")
    cos = np.clip(np.einsum("ij,ij->j", ug, up), -1.0, 1.0)
    return clamp_unit(float(np.sum(cos)) / k), k


def attribute_score(
    g: AttributeComponent,
    p: AttributeComponent,
    source: AttributeSource = AttributeSource.logits,
) -> float:
    if g.dim != p.dim:
        raise DimensionMismatchError(f"attribute dimensions differ: {g.dim} vs {p.dim}")
    src = AttributeSource(source).value
    return cosine(g.source_vector(src), p.source_vector(src))


def weighted_attribute_score(
    g: AttributeComponent,
    p: AttributeComponent,
    w: WeightVector,
    source: AttributeSource = AttributeSource.logits,
) -> float:
    if g.dim != p.dim:
        raise DimensionMismatchError(f"attribute dimensions differ: {g.dim} vs {p.dim}")
    src = AttributeSource(source).value
    return weighted_cosine(g.source_vector(src), p.source_vector(src), w)


def fuse_scores(s_p: float, s_a: float, lam: float) -> float:
    if not (math.isfinite(s_p) and math.isfinite(s_a) and math.isfinite(lam)):
        raise NonFiniteScoreError(f"non-finite fusion input: s_p={s_p}, s_a={s_a}, lambda={lam}")
    if lam < 0:
        raise ConfigError(f"lambda must be >= 0, got {lam}")
    return s_p + lam * s_a


def match_signatures(
    g: Signature,
    p: Signature,
    cfg: FusionConfig,
    w: Optional[WeightVector] = None,
) -> ScoreBreakdown:
    """Score one gallery/probe pair; component failures carry their component name."""
    if cfg.scheme is Scheme.weighted and w is None:
        raise ConfigError("weighted scheme requires a weight vector")
    if cfg.scheme is Scheme.plain and w is not None:
        raise ConfigError("plain scheme takes no weight vector")
    if not g.comparable_with(p):
        raise DimensionMismatchError(
            f"signatures {g.image_id!r} and {p.image_id!r} are not comparable: "
            f"{g.layout} d={g.attributes.dim} vs {p.layout} d={p.attributes.dim}"
        )

    try:
        s_p, k = patch_component_score(g.patch, p.patch)
    except SigfuseError as err:
        raise ComponentMatchError("patch", err) from err

    try:
        if cfg.scheme is Scheme.weighted:
            if w.dim != g.attributes.dim:
                raise DimensionMismatchError(
                    f"weight vector has {w.dim} entries, attributes have {g.attributes.dim}"
                )
            s_a = weighted_attribute_score(g.attributes, p.attributes, w, cfg.attribute_source)
        else:
            s_a = attribute_score(g.attributes, p.attributes, cfg.attribute_source)
    except SigfuseError as err:
        raise ComponentMatchError("attribute", err) from err

    fused = fuse_scores(s_p, s_a, cfg.lam)
    return ScoreBreakdown(
        patch_score=s_p,
        attribute_score=s_a,
        fused_score=fused,
        non_occluded_pairs=k,
        lam=cfg.lam,
    )
