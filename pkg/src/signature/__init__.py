"""Signature package."""

from src.signature.assembler import (
    assemble_signature,
    make_attribute_component,
    make_patch_component,
    validate,
)
from src.signature.attributes import FACIAL_ATTRIBUTES, attribute_names, sigmoid

__all__ = [
    "FACIAL_ATTRIBUTES",
    "assemble_signature",
    "attribute_names",
    "make_attribute_component",
    "make_patch_component",
    "sigmoid",
    "validate",
]
