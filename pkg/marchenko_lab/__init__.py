"""Marchenko Lab: potential reconstruction pipeline around libs.scattering."""
__version__ = "1.0.0"
