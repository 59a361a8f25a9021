"""Commands module init."""
