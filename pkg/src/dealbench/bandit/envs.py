"""Episode runners the bandit can train against."""
from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal
from typing import Callable, Sequence

import numpy as np

from ..agents.scripted import RuleAnalyst, RuleJudge
from ..agents.types import Speaker, View
from ..catalog import BudgetLevel, Product, derive_budget, format_money, money
from ..engine import NegotiationConfig, Outcome, run_negotiation
from ..prompts import StrategyAction, decode_action


class SeparableEnv:
    """Arm ``good_arm`` always pays ``good_reward``; every other arm pays ``bad_reward``."""

    def __init__(self, good_arm: int = 17, good_reward: float = 0.0, bad_reward: float = -1.0):
        self.good_arm = good_arm
        self.good_reward = good_reward
        self.bad_reward = bad_reward

    def __call__(self, arm: int, level: str, rng) -> float:
        return self.good_reward if arm == self.good_arm else self.bad_reward


class ConstantEnv:
    def __init__(self, reward: float = 0.0):
        self.reward = reward

    def __call__(self, arm, level, rng) -> float:
        return self.reward


@dataclass(frozen=True)
class BuyerTendencies:
    """Per-episode lapse probabilities implied by a strategy prompt."""

    disclose: float
    slip: float
    ignore_exit: float

    @classmethod
    def for_action(cls, a: StrategyAction) -> "BuyerTendencies":
        disclose = 0.30 * (0.5 if a.budget_emphasis == "hard" else 1.0) * (0.5 if a.non_price_ask else 1.0)
        slip = (0.05 if a.budget_emphasis == "hard" else 0.25) + (0.05 if a.price_increase_policy == "warn_then_end" else 0.0)
        ignore = 0.10 + 0.05 * (a.exit_turns - 2) + (0.05 if a.concession_style == "tiny_steps" else 0.0)
        ignore -= 0.05 if a.progress_threshold == "small" else 0.0
        return cls(disclose, slip, max(0.0, ignore))


class StrategyBuyer:
    """Simulated prompt-following buyer whose lapses depend on the strategy action.

    Lapses are drawn once per episode: disclosing the budget (the seller then anchors to
    it), slipping past the budget once the seller stops conceding, and ignoring the
    no-progress exit rule (which can run the episode into a deadlock).
    """

    identifier = "strategy-buyer"

    def __init__(self, action: StrategyAction, rng: np.random.Generator, open_ratio: float = 0.7):
        t = BuyerTendencies.for_action(action)
        u = rng.random(3)
        self.action = action
        self.discloses = bool(u[0] < t.disclose)
        self.slips = bool(u[1] < t.slip)
        self.ignores_exit = bool(u[2] < t.ignore_exit)
        self.open_ratio = Decimal(repr(open_ratio))
        self.step_ratio = Decimal("0.01") if action.concession_style == "tiny_steps" else Decimal("0.02")
        self.threshold = Decimal(repr(action.progress_ratio))
        self.stalled = 0
        self.warned = False
        self.disclosed = False
        self.last_seen: Decimal | None = None
        self.offer: Decimal | None = None

    def _limit(self, view: View) -> Decimal:
        if self.slips and self.stalled >= 1:
            return view.retail_price
        if self.disclosed:
            return view.private_value
        return min(view.private_value, view.retail_price)

    def open(self, view: View) -> str:
        self.offer = money(self.open_ratio * view.retail_price)
        return f"Hello! I'm interested in the {view.product_name}. Would you consider ${format_money(self.offer)}?"

    def respond(self, view: View) -> str:
        theirs = view.opponent_offer
        raised = theirs is not None and self.last_seen is not None and theirs > self.last_seen
        if theirs is not None and self.last_seen is not None and not raised:
            drop = (self.last_seen - theirs) / self.last_seen
            self.stalled = self.stalled + 1 if drop < self.threshold else 0
        if theirs is not None:
            self.last_seen = theirs

        if raised:
            if self.action.price_increase_policy == "end_now" or self.warned:
                return "You raised the price, so I will walk away. No deal."
            self.warned = True
            return f"You just raised the price. Please keep it reasonable. Could you do ${format_money(self.offer)}?"

        limit = self._limit(view)
        nxt = money(min(self.offer + self.step_ratio * view.retail_price, limit))
        if theirs is not None and (theirs <= nxt or (self.stalled >= 1 and theirs <= limit)):
            return f"Deal, I accept your offer of ${format_money(theirs)}."
        if self.stalled >= self.action.exit_turns and not self.ignores_exit:
            return "I'm sorry, I cannot afford that. I will walk away."
        self.offer = max(self.offer, nxt)
        if self.discloses and not self.disclosed and view.round == 1:
            self.disclosed = True
            return f"My budget is ${format_money(view.private_value)}. Could you do ${format_money(self.offer)}?"
        return f"Could you do ${format_money(self.offer)} instead?"


class AnchoringSeller:
    """Concedes a fraction of the remaining gap to its floor; anchors to a disclosed budget."""

    identifier = "anchoring-seller"

    def __init__(self, concession: float = 0.3):
        self.concession = Decimal(repr(concession))
        self.ask: Decimal | None = None
        self.anchored = False

    def open(self, view: View) -> str:  # pragma: no cover - sellers never open
        raise NotImplementedError

    def respond(self, view: View) -> str:
        floor = view.private_value
        if self.ask is None:
            self.ask = view.retail_price
            return f"I can offer it to you for ${format_money(self.ask)}. What budget do you have in mind?"
        budget = _disclosed_budget(view.dialogue)
        if budget is not None and budget > self.ask and not self.anchored:
            self.anchored = True
            self.ask = budget
            return f"Given what you can spend, I can offer it to you for ${format_money(self.ask)}."
        self.ask = money(max(floor, self.ask - (self.ask - floor) * self.concession))
        return f"I can offer it to you for ${format_money(self.ask)}."


_BUDGET_DISCLOSURE = re.compile(r"^My budget is \$([\d,]+(?:\.\d+)?)\.")


def _disclosed_budget(dialogue) -> Decimal | None:
    for speaker, text in dialogue:
        m = _BUDGET_DISCLOSURE.match(text) if speaker == Speaker.BUYER.value else None
        if m:
            return money(m.group(1).replace(",", ""))
    return None


class ScriptedNegotiationEnv:
    """Runs a full engine episode with a :class:`StrategyBuyer` on a random catalog product."""

    def __init__(self, products: Sequence[Product], t_max: int = 30):
        if not products:
            raise ValueError("need at least one product")
        self.products = list(products)
        self.t_max = t_max

    def __call__(self, arm: int, level: str, rng: np.random.Generator) -> dict:
        product = self.products[int(rng.integers(len(self.products)))]
        budget = derive_budget(product, BudgetLevel(level))
        buyer = StrategyBuyer(decode_action(arm), rng)
        cfg = NegotiationConfig(product, budget, self.t_max, budget_level=BudgetLevel(level))
        tr = run_negotiation(buyer, AnchoringSeller(), RuleJudge(), RuleAnalyst(), cfg)
        return outcome_flags(tr.outcome)


def outcome_flags(outcome: Outcome) -> dict:
    return {
        "over_budget": outcome.over_budget,
        "over_retail": outcome.over_retail,
        "below_wholesale": outcome.below_wholesale,
        "deadlock": outcome.deadlock,
        "accepted": outcome.accepted,
    }


class LiveNegotiationEnv:
    """Model-backed buyer whose system prompt carries the arm's strategy directives.

    ``make_agents(product, budget, action)`` returns ``(buyer, seller, judge, analyst)``.
    """

    def __init__(self, products: Sequence[Product], make_agents: Callable, t_max: int = 30):
        self.products = list(products)
        self.make_agents = make_agents
        self.t_max = t_max

    def __call__(self, arm: int, level: str, rng: np.random.Generator) -> dict:
        product = self.products[int(rng.integers(len(self.products)))]
        budget = derive_budget(product, BudgetLevel(level))
        buyer, seller, judge, analyst = self.make_agents(product, budget, decode_action(arm))
        cfg = NegotiationConfig(product, budget, self.t_max, budget_level=BudgetLevel(level))
        return outcome_flags(run_negotiation(buyer, seller, judge, analyst, cfg).outcome)
