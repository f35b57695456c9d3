"""Spectrum cartography: radio map synthesis and estimation."""

__version__ = "0.1.0"
