"""Schemas package."""

__all__ = ["evaluation", "identification", "matching", "signature", "synth"]
