"""Evaluation package."""

__all__ = ["harness", "metrics", "reports"]
