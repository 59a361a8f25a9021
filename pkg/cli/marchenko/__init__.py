"""Marchenko CLI - phase shifts to potentials from the command line."""
from marchenko_lab import __version__

__all__ = ["__version__"]
