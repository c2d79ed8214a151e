"""Quantified fuzzy rule learning from raw range scans, with a wall-following simulator."""
__version__ = "0.1.0"
