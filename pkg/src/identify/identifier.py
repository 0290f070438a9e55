# identifier.py
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from src.config import load_settings
from src.errors import (
    ComponentMatchError,
    ConfigError,
    DimensionMismatchError,
    IdentificationError,
    SigfuseError,
    ZeroNormError,
)
from src.identify.gallery import Gallery, Template
from src.matching.batch import PairScores, PairStatus
from src.schemas.identification import (
    Aggregation,
    RankedEntry,
    RankedList,
    SkippedSubject,
    WeightMode,
)
from src.schemas.matching import FusionConfig, ScoreBreakdown, Scheme
from src.schemas.signature import Signature, WeightVector
from src.weighting.weights import (
    AttributeAccuracyTable,
    uniform_weights,
    weights_from_probe_confidence,
    weights_from_training_accuracy,
)

logger = logging.getLogger(__name__)

NO_COMPARABLE_PATCHES = "no comparable patches"
ZERO_NORM_ATTRIBUTES = "zero-norm attribute vector"


@dataclass
class SkipReport:
    scored: int = 0
    removed_by_no_patches: int = 0
    removed_by_zero_attributes: int = 0


class GalleryIdentifier:
    """
    Identification policy:
    1) Score every probe member against every enrolled signature in one vectorized pass
    2) Group pair scores by gallery subject
    3) Gate: subjects without a single scorable pair are skipped with a reason
       (no comparable patches, or zero-norm attribute vectors on the gallery side)
    4) Aggregate the remaining pairs per subject (max | mean) and rank
    """

    def __init__(
        self,
        gallery: Gallery,
        cfg: FusionConfig,
        weight_mode: WeightMode = WeightMode.uniform,
        accuracy_table: Optional[AttributeAccuracyTable] = None,
        aggregation: Aggregation = Aggregation.max,
    ):
        self.gallery = gallery
        self.cfg = cfg
        self.weight_mode = WeightMode(weight_mode)
        self.aggregation = Aggregation(aggregation)
        self._fixed_weights = self._resolve_fixed_weights(accuracy_table)
        self.scorer = gallery.scorer(cfg.attribute_source)
        self._owner = np.asarray(gallery.member_owner())
        self._image_ids = [s.image_id for s in gallery.signatures()]

    def _resolve_fixed_weights(self, table: Optional[AttributeAccuracyTable]) -> Optional[WeightVector]:
        if self.cfg.scheme is Scheme.plain:
            if self.weight_mode is not WeightMode.uniform:
                raise ConfigError(f"weight mode {self.weight_mode.value!r} needs the weighted scheme")
            return None
        if self.weight_mode is WeightMode.uniform:
            return uniform_weights(self.gallery.attribute_dim)
        if self.weight_mode is WeightMode.trained:
            if table is None:
                raise ConfigError("weight mode 'trained' needs an attribute accuracy table")
            names = self.gallery.templates[0].members[0].attributes.attribute_names
            return weights_from_training_accuracy(table, names)
        return None  # probe mode: per probe member

    def _weights_for(self, member: Signature) -> Optional[WeightVector]:
        if self.cfg.scheme is Scheme.weighted and self.weight_mode is WeightMode.probe:
            return weights_from_probe_confidence(member.attributes)
        return self._fixed_weights

    def _score_member(self, member: Signature) -> PairScores:
        source = self.cfg.attribute_source.value
        if not np.any(member.attributes.source_vector(source)):
            # every pair would fail; the probe image is at fault
            raise ComponentMatchError(
                "attribute", ZeroNormError(f"probe image {member.image_id!r}: zero-norm {source} vector")
            )
        scores = self.scorer.score(member, self.cfg.lam, self._weights_for(member))
        bad_patch = np.flatnonzero(scores.status == PairStatus.ZERO_NORM_PATCH)
        if bad_patch.size:
            raise ComponentMatchError(
                "patch",
                ZeroNormError(
                    f"zero-norm visible patch column between probe image {member.image_id!r} "
                    f"and gallery image(s) {', '.join(self._image_ids[r] for r in bad_patch)}"
                ),
            )
        return scores

    def _skip_reason(self, zero_attribute_images: List[str]) -> str:
        if zero_attribute_images:
            images = " ".join(sorted(set(zero_attribute_images)))
            return f"{ZERO_NORM_ATTRIBUTES} ({self.cfg.attribute_source.value}) in {images}"
        return NO_COMPARABLE_PATCHES

    def _aggregate(self, pairs: List[Tuple[float, float, float, int]]) -> ScoreBreakdown:
        if self.aggregation is Aggregation.max:
            # first maximum in (probe member, gallery member) order
            best = max(range(len(pairs)), key=lambda i: (pairs[i][2], -i))
            s_p, s_a, fused, k = pairs[best]
        else:
            arr = np.array([p[:3] for p in pairs], dtype=np.float64)
            s_p, s_a, fused = (float(x) for x in arr.mean(axis=0))
            k = min(p[3] for p in pairs)
        return ScoreBreakdown(
            patch_score=s_p,
            attribute_score=s_a,
            fused_score=fused,
            non_occluded_pairs=k,
            lam=self.cfg.lam,
        )

    def identify(self, probe: Template) -> RankedList:
        if probe.layout != self.gallery.layout or probe.attribute_dim != self.gallery.attribute_dim:
            raise DimensionMismatchError(
                f"probe {probe.template_id!r} ({probe.layout}, d={probe.attribute_dim}) is not "
                f"comparable with the gallery ({self.gallery.layout}, d={self.gallery.attribute_dim})"
            )
        member_scores = [self._score_member(m) for m in probe.members]

        # group hits by gallery subject
        grouped: List[List[Tuple[float, float, float, int]]] = [[] for _ in self.gallery.templates]
        zero_attrs: List[List[str]] = [[] for _ in self.gallery.templates]
        for scores in member_scores:
            for row in np.flatnonzero(scores.status == PairStatus.ZERO_NORM_ATTRIBUTE):
                zero_attrs[self._owner[row]].append(self._image_ids[row])
            for row in np.flatnonzero(scores.status == PairStatus.OK):
                grouped[self._owner[row]].append(
                    (
                        float(scores.patch[row]),
                        float(scores.attribute[row]),
                        float(scores.fused[row]),
                        int(scores.k[row]),
                    )
                )

        report = SkipReport()
        entries: List[RankedEntry] = []
        skipped: List[SkippedSubject] = []
        for template, pairs, zero_images in zip(self.gallery.templates, grouped, zero_attrs):
            if not pairs:
                if zero_images:
                    report.removed_by_zero_attributes += 1
                else:
                    report.removed_by_no_patches += 1
                skipped.append(
                    SkippedSubject(subject_id=template.subject_id, reason=self._skip_reason(zero_images))
                )
                continue
            report.scored += 1
            breakdown = self._aggregate(pairs)
            entries.append(
                RankedEntry(subject_id=template.subject_id, score=breakdown.fused_score, breakdown=breakdown)
            )

        if not entries:
            reasons = sorted({s.reason for s in skipped})
            raise IdentificationError(
                f"probe {probe.template_id!r}: all {len(skipped)} gallery subjects skipped ({'; '.join(reasons)})"
            )
        if report.removed_by_no_patches or report.removed_by_zero_attributes:
            logger.info(
                "probe %s: skipped %d subject(s) with no comparable patches, %d with zero-norm attributes",
                probe.template_id,
                report.removed_by_no_patches,
                report.removed_by_zero_attributes,
            )

        entries.sort(key=lambda e: (-e.score, e.subject_id))
        skipped.sort(key=lambda s: s.subject_id)
        return RankedList(probe_id=probe.template_id, entries=entries, skipped=skipped)


def identify(
    probe: Template,
    gallery: Gallery,
    cfg: FusionConfig,
    weight_mode: WeightMode = WeightMode.uniform,
    accuracy_table: Optional[AttributeAccuracyTable] = None,
    aggregation: Aggregation = Aggregation.max,
) -> RankedList:
    if gallery is None or not gallery.templates:
        raise IdentificationError("gallery is empty")
    return GalleryIdentifier(gallery, cfg, weight_mode, accuracy_table, aggregation).identify(probe)


def _failed(probe: Template, gallery: Gallery, err: SigfuseError) -> RankedList:
    reason = f"{type(err).__name__}: {err}"
    return RankedList(
        probe_id=probe.template_id,
        entries=[],
        skipped=[SkippedSubject(subject_id=s, reason=reason) for s in sorted(gallery.subject_ids)],
        error=reason,
    )


def batch_identify(
    probes: Sequence[Template],
    gallery: Gallery,
    cfg: FusionConfig,
    weight_mode: WeightMode = WeightMode.uniform,
    accuracy_table: Optional[AttributeAccuracyTable] = None,
    aggregation: Aggregation = Aggregation.max,
    n_jobs: Optional[int] = None,
) -> List[RankedList]:
    """identify() for every probe, in input order.

    A probe that fails yields a RankedList with ``error`` set; the batch
    continues. ``n_jobs`` only changes wall time, never results.
    """
    if not probes:
        return []
    identifier = GalleryIdentifier(gallery, cfg, weight_mode, accuracy_table, aggregation)

    def run(probe: Template) -> RankedList:
        try:
            return identifier.identify(probe)
        except SigfuseError as err:
            logger.warning("probe %s failed: %s", probe.template_id, err)
            return _failed(probe, gallery, err)

    jobs = n_jobs if n_jobs is not None else load_settings().threads
    if jobs == 1:
        return [run(p) for p in probes]
    return Parallel(n_jobs=jobs, prefer="threads")(delayed(run)(p) for p in probes)


def explain_match(g: Signature, p: Signature) -> Tuple[List[str], List[str], List[str]]:
    """Attribute names fired in both, only in the gallery, only in the probe."""
    if g.attributes.dim != p.attributes.dim:
        raise DimensionMismatchError(
            f"attribute dimensions differ: {g.attributes.dim} vs {p.attributes.dim}"
        )
    names = g.attributes.attribute_names
    bg = np.asarray(g.attributes.binary, dtype=bool)
    bp = np.asarray(p.attributes.binary, dtype=bool)
    shared = [n for n, x, y in zip(names, bg, bp) if x and y]
    gallery_only = [n for n, x, y in zip(names, bg, bp) if x and not y]
    probe_only = [n for n, x, y in zip(names, bg, bp) if y and not x]
    return shared, gallery_only, probe_only
