"""Stats package."""

__all__ = ["critical_values", "friedman"]
