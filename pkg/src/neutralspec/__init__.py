"""Spectral assignment for neutral-type delay systems."""
