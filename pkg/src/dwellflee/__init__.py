"""Dwell and flee times for switched linear systems with resets and impulses."""

__version__ = "0.1.0"
