"""Face verification toolkit: embeddings, pooling, association, landmarks and evaluation."""
