from __future__ import annotations

from typing import Any

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.schemas.signature import PatchLayout


class SynthConfig(BaseModel):
    """Parameters of the synthetic gallery/probe generator.

    Noise sigmas are relative to a unit-norm patch column: per-entry noise has
    standard deviation ``sigma / sqrt(feature_dim)``, so a column's noise
    vector has norm about ``sigma`` whatever the feature dimension.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(default=0, ge=0, lt=2**64)
    subjects: int = Field(default=50, ge=1)
    images_per_subject: int = Field(default=4, ge=1)
    gallery_images_per_subject: int = Field(default=1, ge=1)

    scheme_name: str = "SYNTH"
    patch_count: int = Field(default=8, ge=1)
    feature_dim: int = Field(default=64, ge=1)
    attribute_dim: int = Field(default=40, ge=1)

    patch_noise_sigma: float = Field(default=1.0, ge=0.0)
    gallery_noise_sigma: float = Field(default=0.1, ge=0.0)
    corrupt_fraction: float = Field(default=0.0, ge=0.0, le=1.0)
    occlusion_rate: float = Field(default=0.0, ge=0.0, le=1.0)

    attribute_flip_rate: float = Field(default=0.0, ge=0.0, le=1.0)
    attribute_scale: float = Field(default=2.0, gt=0.0)
    attribute_noise_sigma: float = Field(default=0.5, ge=0.0)

    @model_validator(mode="before")
    @classmethod
    def _apply_preset(cls, data: Any) -> Any:
        if isinstance(data, dict):
            name = str(data.get("scheme_name", "SYNTH")).upper()
            if name in PatchLayout.PRESETS:
                m, n = PatchLayout.PRESETS[name]
                data = {"patch_count": m, "feature_dim": n, **data, "scheme_name": name}
        return data

    @model_validator(mode="after")
    def _feasible(self) -> "SynthConfig":
        if self.images_per_subject <= self.gallery_images_per_subject:
            raise ValueError(
                f"images_per_subject ({self.images_per_subject}) must exceed "
                f"gallery_images_per_subject ({self.gallery_images_per_subject}) to leave probes"
            )
        if self.occlusion_rate >= 1.0:
            raise ValueError("occlusion_rate = 1 occludes every probe patch; no probe could be scored")
        return self

    @property
    def layout(self) -> PatchLayout:
        return PatchLayout(
            patch_count=self.patch_count,
            feature_dim=self.feature_dim,
            scheme_name=self.scheme_name,
        )
