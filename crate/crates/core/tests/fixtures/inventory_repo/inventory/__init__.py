"""A small stock-keeping library used as an analysis fixture."""
