"""Signature assembly and invariant checking."""

from __future__ import annotations

from typing import List, Optional, Sequence

import numpy as np

from src.errors import DimensionMismatchError, SignatureValidationError
from src.schemas.signature import (
    AttributeComponent,
    PatchFeatureComponent,
    PatchLayout,
    Signature,
)
from src.signature.attributes import PRESENCE_THRESHOLD, attribute_names, binarize, sigmoid

PROBABILITY_TOLERANCE = 1e-9


def make_patch_component(layout: PatchLayout, features, occlusion) -> PatchFeatureComponent:
    """Cast F to float64 (n x m) and O to uint8, checking shapes against the layout."""
    f = np.asarray(features)
    o = np.asarray(occlusion).reshape(-1)
    expected = (layout.feature_dim, layout.patch_count)
    if f.shape != expected:
        raise DimensionMismatchError(f"features shape {f.shape} != layout {expected} (n x m)")
    if o.shape[0] != layout.patch_count:
        raise DimensionMismatchError(
            f"occlusion has {o.shape[0]} entries, layout declares {layout.patch_count} patches"
        )
    f64 = np.ascontiguousarray(f, dtype=np.float64)
    o8 = np.ascontiguousarray(o, dtype=np.uint8)
    f64.setflags(write=False)
    o8.setflags(write=False)
    return PatchFeatureComponent(layout=layout, features=f64, occlusion=o8)


def make_attribute_component(logits, names: Optional[Sequence[str]] = None) -> AttributeComponent:
    a = np.ascontiguousarray(np.asarray(logits).reshape(-1), dtype=np.float64)
    p = sigmoid(a)
    b = binarize(p)
    for arr in (a, p, b):
        arr.setflags(write=False)
    resolved = tuple(names) if names is not None else attribute_names(a.shape[0])
    return AttributeComponent(logits=a, probabilities=p, binary=b, attribute_names=resolved)


def assemble_signature(
    subject_id: str,
    image_id: str,
    patch: PatchFeatureComponent,
    logits,
    names: Optional[Sequence[str]] = None,
) -> Signature:
    """Package S^P and the attribute logits into a validated Signature.

    P and B are derived from the logits (sigmoid, then strict > 0.5).
    """
    a = np.asarray(logits)
    if a.ndim != 1:
        raise DimensionMismatchError(f"logits must be a 1-D vector, got shape {a.shape}")
    if names is not None and len(names) != a.shape[0]:
        raise DimensionMismatchError(
            f"{len(names)} attribute names for {a.shape[0]} logits"
        )
    sig = Signature(
        subject_id=subject_id,
        image_id=image_id,
        patch=patch,
        attributes=make_attribute_component(a, names),
    )
    violations = validate(sig)
    if violations:
        raise SignatureValidationError(violations, context=f"signature {image_id!r}")
    return sig


def _validate_patch(patch: PatchFeatureComponent) -> List[str]:
    out: List[str] = []
    layout = patch.layout
    if layout.patch_count < 1:
        out.append(f"patch.layout.patch_count: must be >= 1, got {layout.patch_count}")
    if layout.feature_dim < 1:
        out.append(f"patch.layout.feature_dim: must be >= 1, got {layout.feature_dim}")
    if out:
        return out

    f = np.asarray(patch.features)
    o = np.asarray(patch.occlusion)
    shape_ok = f.shape == (layout.feature_dim, layout.patch_count)
    if not shape_ok:
        out.append(
            f"patch.features: shape {f.shape} != ({layout.feature_dim}, {layout.patch_count})"
        )
    elif not np.all(np.isfinite(f)):
        out.append("patch.features: contains non-finite values")
        shape_ok = False

    occ_ok = o.ndim == 1 and o.shape[0] == layout.patch_count
    if not occ_ok:
        out.append(f"patch.occlusion: expected {layout.patch_count} entries, got shape {o.shape}")
    elif not np.all((o == 0) | (o == 1)):
        out.append("patch.occlusion: entries must be 0 or 1")
        occ_ok = False

    if shape_ok and occ_ok:
        norms = np.linalg.norm(np.asarray(f, dtype=np.float64), axis=0)
        bad = np.flatnonzero((o == 1) & ~(norms > 0))
        if bad.size:
            out.append(f"patch.features: non-occluded patches with zero norm: {bad.tolist()}")
    return out


def _validate_attributes(attrs: AttributeComponent) -> List[str]:
    out: List[str] = []
    a = np.asarray(attrs.logits)
    if a.ndim != 1 or a.shape[0] < 1:
        return [f"attributes.logits: must be a nonempty 1-D vector, got shape {a.shape}"]
    d = a.shape[0]
    finite = bool(np.all(np.isfinite(a)))
    if not finite:
        out.append("attributes.logits: contains non-finite values")
    elif not np.linalg.norm(a.astype(np.float64)) > 0:
        out.append("attributes.logits: zero norm")

    p = np.asarray(attrs.probabilities, dtype=np.float64)
    if p.shape != (d,):
        out.append(f"attributes.probabilities: expected {d} entries, got shape {p.shape}")
    else:
        if not np.all((p >= 0.0) & (p <= 1.0)):
            out.append("attributes.probabilities: values outside [0, 1]")
        if finite and np.max(np.abs(p - sigmoid(a))) > PROBABILITY_TOLERANCE:
            out.append(
                "attributes.probabilities: differ from 1/(1+exp(-logits)) "
                f"by more than {PROBABILITY_TOLERANCE:g}"
            )

    b = np.asarray(attrs.binary)
    if b.shape != (d,):
        out.append(f"attributes.binary: expected {d} entries, got shape {b.shape}")
    elif p.shape == (d,) and not np.array_equal(b.astype(np.int64), (p > PRESENCE_THRESHOLD).astype(np.int64)):
        out.append(f"attributes.binary: must equal probabilities > {PRESENCE_THRESHOLD}")

    if len(attrs.attribute_names) != d:
        out.append(f"attributes.attribute_names: expected {d} names, got {len(attrs.attribute_names)}")
    return out


def validate(signature: Signature) -> List[str]:
    """Every violated invariant of the signature, in a fixed order; empty when valid."""
    violations: List[str] = []
    if not signature.subject_id:
        violations.append("subject_id: must be nonempty")
    if not signature.image_id:
        violations.append("image_id: must be nonempty")
    violations.extend(_validate_patch(signature.patch))
    violations.extend(_validate_attributes(signature.attributes))
    return violations
