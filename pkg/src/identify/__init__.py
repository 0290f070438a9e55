"""Identify package."""

__all__ = ["gallery", "identifier"]
