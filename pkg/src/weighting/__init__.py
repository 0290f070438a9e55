"""Weighting package."""

__all__ = ["weights"]
