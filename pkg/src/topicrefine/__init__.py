"""Graph-refined LLM topic modeling pipeline."""

__version__ = "0.1.0"
