from __future__ import annotations

import enum
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Protocol


class Decision(str, enum.Enum):
    ACCEPTANCE = "ACCEPTANCE"
    REJECTION = "REJECTION"
    CONTINUE = "CONTINUE"


class Speaker(str, enum.Enum):
    BUYER = "buyer"
    SELLER = "seller"


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"bad chat role {self.role!r}")
        if self.role != "system" and not self.content:
            raise ValueError(f"{self.role} message must have content")

    def to_wire(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class View:
    """What one negotiating party may see when it is about to speak.

    ``private_value`` is the budget for the buyer and the wholesale price for the seller.
    ``opponent_offer`` is the opponent's latest extracted price; ``own_offer`` is ours.
    """

    role: Speaker
    round: int
    t_max: int
    product_name: str
    retail_price: Decimal
    private_value: Decimal
    features: str = ""
    opponent_offer: Decimal | None = None
    own_offer: Decimal | None = None
    dialogue: tuple[tuple[str, str], ...] = field(default=())


class Negotiator(Protocol):
    identifier: str

    def open(self, view: View) -> str: ...

    def respond(self, view: View) -> str: ...


class Judge(Protocol):
    def decide(self, buyer_message: str, seller_message: str | None) -> Decision: ...


class Analyst(Protocol):
    def extract(self, message: str) -> Decimal | None: ...
