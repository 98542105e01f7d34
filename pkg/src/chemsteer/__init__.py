"""LLM-guided mechanism search and strategy-aware route scoring."""

__version__ = "0.1.0"
