"""Deterministic synthetic stand-ins for restricted datasets."""
