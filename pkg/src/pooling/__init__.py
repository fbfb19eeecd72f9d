"""Template pooling and score fusion."""
