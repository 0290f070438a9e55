from __future__ import annotations

from typing import Optional

import numpy as np
import pytest

from src.schemas.signature import PatchLayout, Signature
from src.schemas.synth import SynthConfig
from src.signature.assembler import assemble_signature, make_patch_component
from src.synth.generator import SyntheticBenchmark, generate_benchmark

SMALL_LAYOUT = PatchLayout(patch_count=6, feature_dim=16, scheme_name="TEST")


def random_signature(
    rng: np.random.Generator,
    subject_id: str = "s1",
    image_id: str = "img1",
    layout: PatchLayout = SMALL_LAYOUT,
    attribute_dim: int = 10,
    occlusion: Optional[np.ndarray] = None,
    occlusion_rate: float = 0.0,
) -> Signature:
    features = rng.standard_normal((layout.feature_dim, layout.patch_count))
    if occlusion is None:
        occlusion = (rng.random(layout.patch_count) >= occlusion_rate).astype(np.uint8)
        if not occlusion.any():
            occlusion[0] = 1
    logits = rng.standard_normal(attribute_dim) * 2.0
    patch = make_patch_component(layout, features, occlusion)
    return assemble_signature(subject_id, image_id, patch, logits)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def make_signature(rng):
    def factory(**kwargs) -> Signature:
        return random_signature(rng, **kwargs)

    return factory


@pytest.fixture(scope="session")
def small_config() -> SynthConfig:
    return SynthConfig(
        seed=7,
        subjects=12,
        images_per_subject=3,
        patch_count=6,
        feature_dim=16,
        attribute_dim=10,
        patch_noise_sigma=1.5,
        corrupt_fraction=0.2,
        occlusion_rate=0.2,
        attribute_flip_rate=0.05,
    )


@pytest.fixture(scope="session")
def small_benchmark(small_config) -> SyntheticBenchmark:
    return generate_benchmark(small_config)
