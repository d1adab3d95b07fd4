"""HTTP service wrapping the tracking toolkit."""
