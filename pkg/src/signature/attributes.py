"""Soft facial attribute vocabulary and the logit -> probability -> flag maps."""

from __future__ import annotations

from typing import Tuple

import numpy as np

# Two-column attribute table read row by row.
FACIAL_ATTRIBUTES: Tuple[str, ...] = (
    "5 O'Clock Shadow", "Male",
    "Arched Eyebrows", "Mouth Slightly Open",
    "Attractive", "Mustache",
    "Bags Under Eyes", "Narrow Eyes",
    "Bald", "No Beard",
    "Bangs", "Oval Face",
    "Big Lips", "Pale Skin",
    "Big Nose", "Pointy Nose",
    "Black Hair", "Receding Hairline",
    "Blond Hair", "Rosy Cheeks",
    "Blurry", "Sideburns",
    "Brown Hair", "Smiling",
    "Bushy Eyebrows", "Straight Hair",
    "Chubby", "Wavy Hair",
    "Double Chin", "Wearing Earrings",
    "Eyeglasses", "Wearing Hat",
    "Goatee", "Wearing Lipstick",
    "Gray Hair", "Wearing Necklace",
    "Heavy Makeup", "Wearing Necktie",
    "High Cheekbones", "Young",
)

DEFAULT_ATTRIBUTE_DIM = len(FACIAL_ATTRIBUTES)
PRESENCE_THRESHOLD = 0.5


def attribute_names(dim: int = DEFAULT_ATTRIBUTE_DIM) -> Tuple[str, ...]:
    """Facial attribute names for the default dimension, ``attr1..attrd`` otherwise."""
    if dim == DEFAULT_ATTRIBUTE_DIM:
        return FACIAL_ATTRIBUTES
    return tuple(f"attr{i + 1}" for i in range(dim))


def sigmoid(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    # split by sign so exp never overflows
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def binarize(probabilities: np.ndarray) -> np.ndarray:
    # strict: p == 0.5 maps to absent
    return (np.asarray(probabilities) > PRESENCE_THRESHOLD).astype(np.uint8)
