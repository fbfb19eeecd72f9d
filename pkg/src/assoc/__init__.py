"""Multi-face association: tracker lifecycle and tracklet linking."""
