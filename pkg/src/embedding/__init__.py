"""Triplet similarity embedding, the distance-embedding baseline and feature normalization."""
