"""Deterministic concession-ladder negotiators used as offline stand-ins for chat models."""
from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal

from ..catalog import format_money, money
from .rules import classify_decision, extract_price
from .types import Decision, Speaker, View


@dataclass(frozen=True)
class ScriptedPolicy:
    role: Speaker
    open_ratio: float = 1.0
    step_ratio: float = 0.05
    accept_rule: str = "cross_accept"

    def __post_init__(self):
        if not 0 < self.open_ratio <= 1:
            raise ValueError("open_ratio must be in (0, 1]")
        if not 0 <= self.step_ratio < 1:
            raise ValueError("step_ratio must be in [0, 1)")
        if self.accept_rule != "cross_accept":
            raise ValueError(f"unknown accept rule {self.accept_rule!r}")


def _ratio(x: float) -> Decimal:
    return Decimal(repr(x))


def planned_offer(policy: ScriptedPolicy, view: View) -> Decimal:
    """Next offer on the ladder, clamped to the private limit (budget cap or wholesale floor)."""
    pr = view.retail_price
    step = _ratio(policy.step_ratio) * pr
    if policy.role is Speaker.BUYER:
        nxt = _ratio(policy.open_ratio) * pr if view.own_offer is None else view.own_offer + step
        return money(min(nxt, view.private_value))
    nxt = pr if view.own_offer is None else view.own_offer - step
    return money(max(nxt, view.private_value))


def scripted_step(policy: ScriptedPolicy, view: View) -> tuple[str, Decimal | None, Decision]:
    plan = planned_offer(policy, view)
    theirs = view.opponent_offer
    if policy.role is Speaker.BUYER:
        if theirs is not None and theirs <= plan:
            return f"Deal, I accept your offer of ${format_money(theirs)}.", theirs, Decision.ACCEPTANCE
        if view.own_offer is None:
            text = f"Hello! I'm interested in the {view.product_name}. Would you consider ${format_money(plan)}?"
        else:
            text = f"That's still a bit high for me. Could you do ${format_money(plan)} instead?"
        return text, plan, Decision.CONTINUE
    if theirs is not None and theirs >= plan:
        return f"Alright, I can accept ${format_money(theirs)} for it.", theirs, Decision.ACCEPTANCE
    return f"I can offer it to you for ${format_money(plan)}.", plan, Decision.CONTINUE


class ScriptedNegotiator:
    """Adapter exposing :func:`scripted_step` through the engine's negotiator interface."""

    def __init__(self, policy: ScriptedPolicy, identifier: str | None = None):
        self.policy = policy
        self.identifier = identifier or f"scripted-{policy.role.value}"

    def open(self, view: View) -> str:
        return scripted_step(self.policy, view)[0]

    def respond(self, view: View) -> str:
        return scripted_step(self.policy, view)[0]


class RuleJudge:
    identifier = "rule_based"

    def decide(self, buyer_message: str, seller_message: str | None) -> Decision:
        return classify_decision(buyer_message, seller_message)


class RuleAnalyst:
    identifier = "rule_based"

    def extract(self, message: str) -> Decimal | None:
        return extract_price(message)
