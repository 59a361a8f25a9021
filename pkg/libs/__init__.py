"""Domain libraries for Marchenko Lab."""
