"""Role prompt templates and the 96-arm strategy prompt space."""
from __future__ import annotations

import enum
import hashlib
import itertools
import json
import string
from dataclasses import dataclass
from decimal import Decimal
from functools import lru_cache
from pathlib import Path
from typing import Mapping

from ..catalog import Product, format_money
from ..errors import DealbenchError

TEMPLATE_DIR = Path(__file__).parent / "templates"
NO_RESPONSE = "No response yet"


class MissingPlaceholder(DealbenchError, KeyError):
    def __init__(self, name: str, role: str):
        super().__init__(f"template {role!r} needs placeholder {name!r}")
        self.name = name
        self.role = role


class Role(str, enum.Enum):
    BUYER_SYSTEM = "buyer_system"
    SELLER_SYSTEM = "seller_system"
    BUYER_GREETING = "buyer_greeting"
    JUDGE = "judge"
    ANALYST = "analyst"


@dataclass(frozen=True)
class PromptTemplate:
    role: Role
    body: str

    @property
    def placeholders(self) -> tuple[str, ...]:
        names = []
        for _, field, _, _ in string.Formatter().parse(self.body):
            if field is not None and field not in names:
                names.append(field)
        return tuple(names)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.body.encode("utf-8")).hexdigest()


def load_template(role: Role | str, directory: Path | None = None) -> PromptTemplate:
    role = Role(role)
    path = Path(directory or TEMPLATE_DIR) / f"{role.value}.txt"
    return PromptTemplate(role, path.read_text(encoding="utf-8").rstrip("\n"))


def load_templates(directory: Path | None = None) -> dict[Role, PromptTemplate]:
    return {role: load_template(role, directory) for role in Role}


def render(template: PromptTemplate, context: Mapping[str, object]) -> str:
    for name in template.placeholders:
        if name not in context:
            raise MissingPlaceholder(name, template.role.value)
    return template.body.format_map(context)


# -- context builders --------------------------------------------------------

def buyer_product_info(product: Product) -> str:
    return (
        f"- Product Name: {product.name}\n"
        f"- Retail Price: ${format_money(product.retail_price)}\n"
        f"- Features: {product.features}"
    )


def seller_product_info(product: Product) -> str:
    return (
        f"- Product Name: {product.name}\n"
        f"- Retail Price: ${format_money(product.retail_price)}\n"
        f"- Wholesale Price: ${format_money(product.wholesale_price)}\n"
        f"- Features: {product.features}"
    )


def buyer_context(product: Product, budget: Decimal) -> dict:
    return {"products_info": buyer_product_info(product), "budget": Decimal(budget)}


def seller_context(product: Product) -> dict:
    return {"products_info": seller_product_info(product)}


def greeting_context(product: Product, budget: Decimal | None) -> dict:
    sentence = "" if budget is None else f"Your maximum budget for this purchase is ${Decimal(budget):.2f}."
    return {
        "product_name": product.name,
        "retail_price": f"${format_money(product.retail_price)}",
        "features": product.features,
        "budget_sentence": sentence,
    }


def judge_context(buyer_message: str, seller_message: str | None) -> dict:
    return {
        "latest_buyer_message": buyer_message,
        "latest_seller_message": seller_message if seller_message else NO_RESPONSE,
    }


def analyst_context(seller_message: str) -> dict:
    return {"seller_message": seller_message}


# -- strategy action space ---------------------------------------------------

@lru_cache(maxsize=None)
def _axes_spec(path: str | None = None) -> dict:
    p = Path(path) if path else TEMPLATE_DIR / "strategy_axes.json"
    return json.loads(p.read_text(encoding="utf-8"))


AXIS_NAMES = (
    "budget_emphasis",
    "price_increase_policy",
    "exit_turns",
    "progress_threshold",
    "concession_style",
    "non_price_ask",
)


@dataclass(frozen=True, order=True)
class StrategyAction:
    budget_emphasis: str
    price_increase_policy: str
    exit_turns: int
    progress_threshold: str
    concession_style: str
    non_price_ask: bool
    refusal_tone: str = "polite"
    brevity: str = "short"
    self_check_clause: str = "strict"

    @property
    def progress_ratio(self) -> float:
        return _threshold_ratios()[self.progress_threshold]

    @property
    def index(self) -> int:
        return encode_action(self)

    def axes(self) -> tuple:
        return tuple(getattr(self, name) for name in AXIS_NAMES)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in AXIS_NAMES}


def _threshold_ratios() -> dict[str, float]:
    for axis in _axes_spec()["axes"]:
        if axis["name"] == "progress_threshold":
            return axis["ratios"]
    raise KeyError("progress_threshold")


def axis_values() -> list[list]:
    spec = {a["name"]: a["values"] for a in _axes_spec()["axes"]}
    return [spec[name] for name in AXIS_NAMES]


@lru_cache(maxsize=None)
def enumerate_actions() -> tuple[StrategyAction, ...]:
    """All arms, in lexicographic order of the axis value lists (last axis varies fastest)."""
    return tuple(StrategyAction(*combo) for combo in itertools.product(*axis_values()))


N_ACTIONS = 96


def encode_action(action: StrategyAction) -> int:
    index = 0
    for values, v in zip(axis_values(), action.axes()):
        index = index * len(values) + values.index(v)
    return index


def decode_action(index: int) -> StrategyAction:
    if not 0 <= index < len(enumerate_actions()):
        raise IndexError(f"action index {index} out of range")
    return enumerate_actions()[index]


def _directive_key(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def strategy_directives(action: StrategyAction) -> list[str]:
    spec = _axes_spec()
    by_name = {a["name"]: a for a in spec["axes"]}
    lines = [by_name[name]["directives"][_directive_key(getattr(action, name))] for name in AXIS_NAMES]
    for name, fixed in spec["fixed"].items():
        if getattr(action, name) != fixed["value"]:
            raise ValueError(f"{name} is frozen at {fixed['value']!r}")
        lines.append(fixed["directive"])
    return lines


def render_strategy_prompt(base: str | PromptTemplate, action: StrategyAction, context: Mapping | None = None) -> str:
    """Append one strategy directive per axis (plus the frozen fields) to a rendered buyer prompt."""
    if isinstance(base, PromptTemplate):
        if base.role is not Role.BUYER_SYSTEM:
            raise ValueError("strategy prompts extend the buyer system prompt only")
        base = render(base, context or {})
    block = "\n".join(f"- {line}" for line in strategy_directives(action))
    return f"{base}\n\nNegotiation Strategy:\n{block}"


def template_hashes(directory: Path | None = None) -> dict[str, str]:
    d = Path(directory or TEMPLATE_DIR)
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(d.iterdir()) if p.is_file()}
