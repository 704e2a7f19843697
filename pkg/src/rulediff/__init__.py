"""Differential testing of tri-state validation rule engines."""

__version__ = "0.1.0"
