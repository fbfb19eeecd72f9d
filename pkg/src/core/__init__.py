"""Domain types, seeded randomness, errors and the shared file formats."""
