"""Stock records and the in-memory inventory."""

from .checksum import sign_line, verify_line
from .parsing import parse_record


class Item:
    """A stocked item."""

    def __init__(self, sku, name, qty, price):
        if qty < 0:
            raise ValueError("negative quantity")
        self.sku = sku
        self.name = name
        self.qty = qty
        self.price = price

    def total_value(self):
        return self.qty * self.price

    def to_line(self):
        """Serialize as a signed record line."""
        return sign_line("%s,%s,%d,%.2f" % (self.sku, self.name, self.qty, self.price))

    @classmethod
    def from_line(cls, signed):
        sku, name, qty, price = parse_record(verify_line(signed))
        return cls(sku, name, qty, price)


class Inventory:
    """Items keyed by SKU."""

    def __init__(self):
        self._items = {}

    def add(self, item):
        existing = self._items.get(item.sku)
        if existing is None:
            self._items[item.sku] = item
        else:
            existing.qty += item.qty
        return self

    def remove(self, sku, qty):
        """Take qty units of sku out of stock."""
        item = self.find(sku)
        if qty > item.qty:
            raise ValueError("insufficient stock for %s" % sku)
        item.qty -= qty
        if item.qty == 0:
            del self._items[sku]

    def find(self, sku):
        try:
            return self._items[sku]
        except KeyError:
            raise KeyError("unknown sku %s" % sku) from None

    def items(self):
        return [self._items[k] for k in sorted(self._items)]

    def total(self):
        return sum(item.total_value() for item in self.items())

    def low_stock(self, threshold):
        """SKUs whose quantity is strictly below threshold."""
        return [item.sku for item in self.items() if item.qty < threshold]

    def dump(self):
        return "\n".join(item.to_line() for item in self.items())

    @classmethod
    def load(cls, text):
        inventory = cls()
        for line in text.splitlines():
            if line.strip():
                inventory.add(Item.from_line(line))
        return inventory
