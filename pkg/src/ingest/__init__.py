"""Ingest package."""

__all__ = ["atomic", "loader", "sigfile"]
