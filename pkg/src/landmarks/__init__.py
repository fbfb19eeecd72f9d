"""Cascaded shape regression and similarity-transform face alignment."""
