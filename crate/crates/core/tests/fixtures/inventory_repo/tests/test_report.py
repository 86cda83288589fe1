from inventory.records import Inventory, Item
from inventory.report import build_report, format_currency, render_table, summarize


def stocked():
    inv = Inventory()
    inv.add(Item("A1", "bolt", 10, 0.25))
    inv.add(Item("B2", "nut", 40, 0.05))
    inv.add(Item("C3", "gear", 3, 12.5))
    return inv


def test_format_currency():
    assert format_currency(1234.5) == "$1,234.50"
    assert format_currency(-3) == "-$3.00"


def test_render_table_alignment():
    out = render_table(["a", "bb"], [("xyz", 1)])
    assert out.splitlines() == ["a   | bb", "----+---", "xyz | 1 "]


def test_summarize():
    stats = summarize(stocked())
    assert stats["count"] == 3
    assert stats["median_qty"] == 10
    assert abs(stats["total"] - 42.0) < 1e-9


def test_summarize_empty():
    assert summarize(Inventory())["count"] == 0


def test_build_report_totals():
    report = build_report(stocked().dump())
    assert report.endswith("items: 3, total: $42.00")


def test_build_report_rows():
    lines = build_report(stocked().dump()).splitlines()
    assert lines[2].startswith("A1  | bolt | 10  | $2.50")
