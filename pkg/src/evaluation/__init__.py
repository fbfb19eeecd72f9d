"""Similarity matrices, verification and identification metrics, split aggregation."""
