"""Grouping stock movements into shipment batches."""

import contextlib


def chunk(seq, size):
    """Split seq into lists of at most size elements."""
    if size <= 0:
        raise ValueError("size must be positive")
    out = []
    i = 0
    while i < len(seq):
        out.append(list(seq[i:i + size]))
        i += size
    return out


def classify(event):
    """Map a movement event tuple to a category name."""
    match event:
        case ("in", qty) if qty > 0:
            return "receipt"
        case ("out", qty):
            return "shipment" if qty > 0 else "noop"
        case _:
            return "unknown"


def first_missing(skus, known):
    """Return the first sku not present in known, or None."""
    for sku in skus:
        if (found := known.get(sku)) is not None and found.strip():
            continue
        if sku not in known:
            return sku
    return None


def plan_batches(orders, capacity):
    """Greedily pack (sku, qty) orders into batches under capacity."""

    def weight(order):
        return order[1]

    batches = []
    current, load = [], 0
    with contextlib.suppress(TypeError):
        for order in sorted(orders, key=lambda o: (-weight(o), o[0])):
            if weight(order) > capacity:
                raise ValueError("order exceeds capacity: %s" % (order[0],))
            if load + weight(order) > capacity:
                batches.append(current)
                current, load = [], 0
            current.append(order[0])
            load += weight(order)
    if current:
        batches.append(current)
    return batches
