"""Exact verification of dimension-neutral tree amplitudes for Yang-Mills and gravity."""

__version__ = "0.1.0"
