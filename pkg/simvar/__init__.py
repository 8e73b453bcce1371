"""Determinism audit toolkit for repeated simulation runs."""

__version__ = "0.1.0"
