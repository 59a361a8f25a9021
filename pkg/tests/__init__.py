"""Tests package for marchenko-lab."""
