"""Synth package."""

__all__ = ["generator"]
