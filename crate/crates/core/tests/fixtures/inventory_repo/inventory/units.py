"""Unit conversion for weights."""


def build_table():
    """Build the pairwise conversion table from gram ratios."""
    base = {"g": 1.0, "kg": 1000.0, "lb": 453.592, "oz": 28.3495}
    table = {}
    for src, src_grams in base.items():
        for dst, dst_grams in base.items():
            table[(src, dst)] = src_grams / dst_grams
    return table


_TABLE = build_table()


def convert(amount, src, dst):
    """Convert amount from unit src to unit dst."""
    try:
        factor = _TABLE[(src, dst)]
    except KeyError:
        raise ValueError("unknown unit pair %s->%s" % (src, dst)) from None
    return amount * factor
