"""Numeric helpers."""


def _clamp(value, low, high):
    if high is not None and value > high:
        return high
    if value < low:
        return low
    return value


def scale_values(values, factor, low=0.0, high=None):
    """Multiply each value by factor and clamp into [low, high]."""
    return [_clamp(v * factor, low, high) for v in values]


def mean(values):
    """Arithmetic mean; 0.0 for an empty sequence."""
    if not values:
        return 0.0
    return sum(values) / len(values)


def median(values):
    """Median of a sequence of numbers."""
    ordered = sorted(values)
    n = len(ordered)
    if n == 0:
        raise ValueError("median of empty sequence")
    mid = n // 2
    if n % 2 == 1:
        return ordered[mid]
    return (ordered[mid - 1] + ordered[mid]) / 2


def percentile(values, pct):
    """Nearest-rank percentile, pct in [0, 100]."""
    if not 0 <= pct <= 100:
        raise ValueError("pct out of range")
    ordered = sorted(values)
    if not ordered:
        raise ValueError("percentile of empty sequence")
    rank = max(1, -(-len(ordered) * pct // 100))
    return ordered[int(rank) - 1]
