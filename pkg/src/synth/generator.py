"""Deterministic synthetic gallery/probe benchmark.

Every subject has a latent patch matrix (unit-norm columns) and latent
attribute logits. Gallery images are the latent plus small noise; probe images
are the latent plus patch noise, with some columns replaced by random unit
vectors, some patches occluded and some logits sign-flipped.

All randomness comes from one ``numpy.random.Generator(Philox(seed))`` stream,
consumed in this order:

    for each subject s = 0 .. subjects-1:
        latent features      standard_normal((n, m)), columns normalized
        latent logits        standard_normal(d) * attribute_scale
        for each image i = 0 .. images_per_subject-1:
            feature noise    standard_normal((n, m))
            if i < gallery_images_per_subject:
                logit noise  standard_normal(d)
            else:
                corruption   random(m)            column j corrupted if < corrupt_fraction
                replacement  standard_normal((n, m))
                occlusion    random(m)            patch j occluded if < occlusion_rate
                logit noise  standard_normal(d)
                flips        random(d)            logit j negated if < attribute_flip_rate

Draws are made whether or not the corresponding rate is zero, so changing a
rate never shifts the rest of the stream.

Features and logits are rounded to float32 before assembly, so the in-memory
benchmark is exactly what ``write_benchmark`` stores.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from src.identify.gallery import Gallery, Template
from src.ingest.atomic import write_text_atomic
from src.ingest.loader import ManifestEntry, write_manifest
from src.ingest.sigfile import write_signature
from src.schemas.signature import Signature
from src.schemas.synth import SynthConfig
from src.signature.assembler import assemble_signature, make_patch_component

logger = logging.getLogger(__name__)

SIGNATURE_DIR = "signatures"
GALLERY_MANIFEST = "gallery.csv"
PROBE_MANIFEST = "probe.csv"
TRUTH_FILE = "truth.csv"


@dataclass(frozen=True)
class ProbeRecord:
    signature: Signature
    corrupted: int
    occluded: int

    @property
    def cell_label(self) -> str:
        return f"c{self.corrupted}/o{self.occluded}"


@dataclass(frozen=True)
class SyntheticBenchmark:
    config: SynthConfig
    gallery_signatures: List[Signature]
    probe_records: List[ProbeRecord]

    @cached_property
    def gallery(self) -> Gallery:
        return Gallery.from_signatures(self.gallery_signatures)

    @cached_property
    def probes(self) -> List[Template]:
        return [Template.single(r.signature) for r in self.probe_records]

    @property
    def truth(self) -> Dict[str, str]:
        return {r.signature.image_id: r.signature.subject_id for r in self.probe_records}

    @property
    def cells(self) -> Dict[str, str]:
        return {r.signature.image_id: r.cell_label for r in self.probe_records}


def _unit_columns(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=0)
    return x / np.where(norms > 0, norms, 1.0)


def _stored(x: np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=np.float32).astype(np.float64)


def _ids(cfg: SynthConfig, s: int, i: int) -> Tuple[str, str]:
    width = max(4, len(str(cfg.subjects - 1)))
    subject_id = f"subject{s:0{width}d}"
    return subject_id, f"{subject_id}_img{i:02d}"


def generate_benchmark(cfg: SynthConfig) -> SyntheticBenchmark:
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    layout = cfg.layout
    m, n, d = cfg.patch_count, cfg.feature_dim, cfg.attribute_dim
    patch_scale = cfg.patch_noise_sigma / np.sqrt(n)
    gallery_scale = cfg.gallery_noise_sigma / np.sqrt(n)

    gallery: List[Signature] = []
    probes: List[ProbeRecord] = []
    for s in range(cfg.subjects):
        latent = _unit_columns(rng.standard_normal((n, m)))
        latent_logits = rng.standard_normal(d) * cfg.attribute_scale

        for i in range(cfg.images_per_subject):
            subject_id, image_id = _ids(cfg, s, i)
            noise = rng.standard_normal((n, m))

            if i < cfg.gallery_images_per_subject:
                features = latent + gallery_scale * noise
                logits = latent_logits + cfg.attribute_noise_sigma * rng.standard_normal(d)
                patch = make_patch_component(layout, _stored(features), np.ones(m, dtype=np.uint8))
                gallery.append(assemble_signature(subject_id, image_id, patch, _stored(logits)))
                continue

            corrupt_draw = rng.random(m)
            replacement = _unit_columns(rng.standard_normal((n, m)))
            occlusion_draw = rng.random(m)
            logit_noise = rng.standard_normal(d)
            flip_draw = rng.random(d)

            features = latent + patch_scale * noise
            corrupted = corrupt_draw < cfg.corrupt_fraction
            features[:, corrupted] = replacement[:, corrupted]

            visible = occlusion_draw >= cfg.occlusion_rate
            if not visible.any():
                # keep one patch so the probe stays scorable
                visible[int(np.argmax(occlusion_draw))] = True

            logits = latent_logits + cfg.attribute_noise_sigma * logit_noise
            logits = np.where(flip_draw < cfg.attribute_flip_rate, -logits, logits)

            patch = make_patch_component(layout, _stored(features), visible.astype(np.uint8))
            probes.append(
                ProbeRecord(
                    signature=assemble_signature(subject_id, image_id, patch, _stored(logits)),
                    corrupted=int(corrupted.sum()),
                    occluded=int(m - visible.sum()),
                )
            )

    logger.info(
        "generated %d gallery and %d probe signatures (seed=%d)", len(gallery), len(probes), cfg.seed
    )
    return SyntheticBenchmark(config=cfg, gallery_signatures=gallery, probe_records=probes)


def write_benchmark(bench: SyntheticBenchmark, out_dir: str | os.PathLike) -> Dict[str, Path]:
    """Write signature files, ``gallery.csv``, ``probe.csv`` and ``truth.csv`` under ``out_dir``."""
    root = Path(out_dir)
    sig_dir = root / SIGNATURE_DIR
    sig_dir.mkdir(parents=True, exist_ok=True)

    gallery_entries: List[ManifestEntry] = []
    for sig in bench.gallery_signatures:
        path = sig_dir / f"{sig.image_id}.sig"
        write_signature(path, sig)
        gallery_entries.append(ManifestEntry(sig.subject_id, sig.subject_id, path))

    probe_entries: List[ManifestEntry] = []
    for rec in bench.probe_records:
        sig = rec.signature
        path = sig_dir / f"{sig.image_id}.sig"
        write_signature(path, sig)
        probe_entries.append(ManifestEntry(sig.subject_id, sig.image_id, path, rec.cell_label))

    paths = {
        "gallery": root / GALLERY_MANIFEST,
        "probe": root / PROBE_MANIFEST,
        "truth": root / TRUTH_FILE,
    }
    write_manifest(paths["gallery"], gallery_entries)
    write_manifest(paths["probe"], probe_entries)
    truth_lines = ["probe_id,subject_id"] + [f"{p},{s}" for p, s in bench.truth.items()]
    write_text_atomic(paths["truth"], "\n".join(truth_lines) + "\n")
    logger.info("wrote benchmark to %s", root)
    return paths
