"""sigfuse: patch-feature + soft-attribute signature matching.

Subpackages are imported as ``src.<name>``; run the CLI with ``python -m src``.
"""

__all__ = []
