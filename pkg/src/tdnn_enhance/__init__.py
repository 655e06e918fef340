"""TDNN mask-based speech enhancement with full-data learning."""

__version__ = "0.1.0"
