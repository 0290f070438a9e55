"""Matching package."""

from src.matching.batch import GalleryScorer, PairScores, PairStatus
from src.matching.matcher import (
    attribute_score,
    fuse_scores,
    match_signatures,
    patch_component_score,
    weighted_attribute_score,
)
from src.matching.similarity import cosine, weighted_cosine

__all__ = [
    "GalleryScorer",
    "PairScores",
    "PairStatus",
    "attribute_score",
    "cosine",
    "fuse_scores",
    "match_signatures",
    "patch_component_score",
    "weighted_attribute_score",
    "weighted_cosine",
]
