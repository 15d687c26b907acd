"""Product catalog: loading, validation, money parsing and budget derivation."""
from __future__ import annotations

import enum
import hashlib
import json
import random
import re
from dataclasses import dataclass
from pathlib import Path
from decimal import ROUND_HALF_UP, Decimal, InvalidOperation
from typing import IO, Iterable

from .errors import DealbenchError

CENT = Decimal("0.01")
SAMPLE_CATALOG = Path(__file__).parent / "data" / "sample_catalog.json"

KEY_NAME = "Product Name"
KEY_RETAIL = "Retail Price"
KEY_WHOLESALE = "Wholesale Price"
KEY_FEATURES = "Features"
KEY_REFERENCE = "Reference"
KEY_CATEGORY = "Category"
REQUIRED_KEYS = (KEY_NAME, KEY_RETAIL, KEY_WHOLESALE, KEY_FEATURES, KEY_REFERENCE)


class MalformedPrice(DealbenchError, ValueError):
    pass


class NegativePrice(DealbenchError, ValueError):
    pass


class SchemaError(DealbenchError, ValueError):
    pass


class InvariantError(DealbenchError, ValueError):
    pass


def money(value) -> Decimal:
    """Quantize to cents, half-up. Accepts Decimal, int, str or float."""
    if isinstance(value, float):
        value = repr(value)
    return Decimal(value).quantize(CENT, rounding=ROUND_HALF_UP)


def format_money(value: Decimal) -> str:
    return f"{money(value):.2f}"


_STRIP = re.compile(r"US\$|USD|[\s,$]", re.IGNORECASE)


def parse_price(raw: str) -> Decimal:
    if raw is None or not str(raw).strip():
        raise MalformedPrice(f"empty price string: {raw!r}")
    text = _STRIP.sub("", str(raw))
    try:
        value = Decimal(text)
    except InvalidOperation:
        raise MalformedPrice(f"no parseable number in {raw!r}") from None
    if not value.is_finite():
        raise MalformedPrice(f"no parseable number in {raw!r}")
    if value <= 0:
        raise NegativePrice(f"price must be positive, got {raw!r}")
    return money(value)


class Category(str, enum.Enum):
    ELECTRONICS = "electronics"
    MOTOR_VEHICLE = "motor_vehicle"
    REAL_ESTATE = "real_estate"
    OTHER = "other"

    @classmethod
    def parse(cls, raw: str | None) -> "Category":
        if not raw:
            return cls.OTHER
        key = raw.strip().lower().replace(" ", "_").replace("-", "_")
        aliases = {
            "electronic": cls.ELECTRONICS,
            "electronic_devices": cls.ELECTRONICS,
            "motor_vehicles": cls.MOTOR_VEHICLE,
            "vehicle": cls.MOTOR_VEHICLE,
            "vehicles": cls.MOTOR_VEHICLE,
        }
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            return cls.OTHER


class BudgetLevel(str, enum.Enum):
    HIGH = "high"
    RETAIL = "retail"
    MID = "mid"
    WHOLESALE = "wholesale"
    LOW = "low"


ALL_LEVELS = tuple(BudgetLevel)


@dataclass(frozen=True)
class Product:
    name: str
    retail_price: Decimal
    wholesale_price: Decimal
    features: str = ""
    reference: str = ""
    category: Category = Category.OTHER

    def __post_init__(self):
        if self.retail_price <= 0 or self.wholesale_price <= 0:
            raise NegativePrice(f"{self.name}: prices must be positive")
        if self.wholesale_price >= self.retail_price:
            raise InvariantError(
                f"{self.name}: wholesale price {self.wholesale_price} is not below retail {self.retail_price}"
            )

    def to_record(self) -> dict:
        rec = {
            KEY_NAME: self.name,
            KEY_RETAIL: f"${format_money(self.retail_price)}",
            KEY_WHOLESALE: f"${format_money(self.wholesale_price)}",
            KEY_FEATURES: self.features,
            KEY_REFERENCE: self.reference,
        }
        if self.category is not Category.OTHER:
            rec[KEY_CATEGORY] = self.category.value
        return rec


def derive_budget(product: Product, level: BudgetLevel | str) -> Decimal:
    level = BudgetLevel(level)
    pr, pw = product.retail_price, product.wholesale_price
    if level is BudgetLevel.HIGH:
        return money(pr * Decimal("1.2"))
    if level is BudgetLevel.RETAIL:
        return money(pr)
    if level is BudgetLevel.MID:
        return money((pr + pw) / 2)
    if level is BudgetLevel.WHOLESALE:
        return money(pw)
    return money(pw * Decimal("0.8"))


def _product_from_record(rec, index: int) -> Product:
    if not isinstance(rec, dict):
        raise SchemaError(f"record {index}: expected an object, got {type(rec).__name__}")
    missing = [k for k in REQUIRED_KEYS if k not in rec]
    if missing:
        raise SchemaError(f"record {index}: missing key(s) {missing}")
    name = str(rec[KEY_NAME])
    try:
        retail = parse_price(rec[KEY_RETAIL])
        wholesale = parse_price(rec[KEY_WHOLESALE])
    except (MalformedPrice, NegativePrice) as exc:
        raise type(exc)(f"record {index} ({name}): {exc}") from None
    if wholesale >= retail:
        raise InvariantError(
            f"record {index} ({name}): wholesale {wholesale} must be below retail {retail}"
        )
    return Product(
        name=name,
        retail_price=retail,
        wholesale_price=wholesale,
        features=str(rec[KEY_FEATURES]),
        reference=str(rec[KEY_REFERENCE]),
        category=Category.parse(rec.get(KEY_CATEGORY)),
    )


def _decode(text: str) -> list:
    stripped = text.strip()
    if not stripped:
        return []
    if stripped.startswith("["):
        data = json.loads(stripped)
        if not isinstance(data, list):
            raise SchemaError("catalog must be a JSON array")
        return data
    # JSON lines
    return [json.loads(line) for line in stripped.splitlines() if line.strip()]


def load_catalog(source: bytes | str | IO) -> list[Product]:
    """Parse a JSON array (or JSON-lines) catalog, preserving input order."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        records = _decode(source)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from None
    return [_product_from_record(rec, i) for i, rec in enumerate(records)]


def load_catalog_file(path) -> list[Product]:
    with open(path, "rb") as fh:
        return load_catalog(fh)


def dump_catalog(products: Iterable[Product]) -> str:
    return json.dumps([p.to_record() for p in products], indent=2, ensure_ascii=False)


def sample_products(products: list[Product], count: int, seed: int) -> list[int]:
    """Seeded uniform sample without replacement; returns catalog indices in sampled order."""
    if count >= len(products):
        return list(range(len(products)))
    return random.Random(seed).sample(range(len(products)), count)


def catalog_hash(products: Iterable[Product]) -> str:
    return hashlib.sha256(dump_catalog(products).encode("utf-8")).hexdigest()
