"""One negotiation episode: greeting, alternating seller/buyer rounds, extraction, judgment."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Callable

from .agents.rules import extract_price
from .agents.types import Analyst, Decision, Judge, Negotiator, Speaker, View
from .catalog import BudgetLevel, Category, Product, format_money, money
from .errors import DealbenchError


class EngineError(DealbenchError):
    pass


class IllegalState(EngineError):
    pass


class AgentFailure(EngineError):
    """An agent call failed mid-episode; ``transcript`` holds the partial record."""

    def __init__(self, message: str, transcript: "Transcript"):
        super().__init__(message)
        self.transcript = transcript


class ProtocolError(AgentFailure):
    pass


@dataclass(frozen=True)
class NegotiationConfig:
    product: Product
    budget: Decimal
    t_max: int = 30
    record_wire: bool = False
    budget_level: BudgetLevel | None = None

    def __post_init__(self):
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")


@dataclass(frozen=True)
class Turn:
    round: int  # 0 is the buyer's opening message
    speaker: Speaker
    text: str
    extracted_price: Decimal | None = None
    decision: Decision | None = None

    def to_record(self) -> dict:
        rec = {
            "round": self.round,
            "speaker": self.speaker.value,
            "text": self.text,
            "extracted_price": None if self.extracted_price is None else format_money(self.extracted_price),
        }
        if self.decision is not None:
            rec["decision"] = self.decision.value
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "Turn":
        price = rec.get("extracted_price")
        dec = rec.get("decision")
        return cls(
            round=int(rec["round"]),
            speaker=Speaker(rec["speaker"]),
            text=rec["text"],
            extracted_price=None if price is None else money(price),
            decision=None if dec is None else Decision(dec),
        )


@dataclass(frozen=True)
class Outcome:
    decision: str  # accept | reject
    final_price: Decimal | None
    rounds_used: int
    deadlock: bool
    trajectory: tuple[tuple[int, Decimal], ...]
    over_budget: bool = False
    below_wholesale: bool = False
    over_retail: bool = False
    protocol_error: bool = False

    @property
    def accepted(self) -> bool:
        return self.decision == "accept"

    def flags(self) -> dict:
        return {
            "over_budget": self.over_budget,
            "below_wholesale": self.below_wholesale,
            "over_retail": self.over_retail,
            "protocol_error": self.protocol_error,
        }

    def to_record(self) -> dict:
        return {
            "decision": self.decision,
            "final_price": None if self.final_price is None else format_money(self.final_price),
            "rounds_used": self.rounds_used,
            "deadlock": self.deadlock,
            "trajectory": [[r, format_money(p)] for r, p in self.trajectory],
        }

    @classmethod
    def from_record(cls, rec: dict, flags: dict) -> "Outcome":
        price = rec.get("final_price")
        return cls(
            decision=rec["decision"],
            final_price=None if price is None else money(price),
            rounds_used=int(rec["rounds_used"]),
            deadlock=bool(rec["deadlock"]),
            trajectory=tuple((int(r), money(p)) for r, p in rec["trajectory"]),
            over_budget=bool(flags.get("over_budget", False)),
            below_wholesale=bool(flags.get("below_wholesale", False)),
            over_retail=bool(flags.get("over_retail", False)),
            protocol_error=bool(flags.get("protocol_error", False)),
        )


@dataclass
class NegotiationState:
    config: NegotiationConfig
    turns: list[Turn] = field(default_factory=list)
    standing_offer: Decimal | None = None
    buyer_offer: Decimal | None = None
    trajectory: list[tuple[int, Decimal]] = field(default_factory=list)
    round: int = 0
    decision: Decision | None = None
    deadlock: bool = False
    protocol_error: bool = False

    @property
    def terminal(self) -> bool:
        return self.deadlock or self.decision in (Decision.ACCEPTANCE, Decision.REJECTION)


def finalize(state: NegotiationState) -> Outcome:
    if not state.terminal:
        raise IllegalState("negotiation has not reached a terminal condition")
    cfg = state.config
    accepted = state.decision is Decision.ACCEPTANCE and state.standing_offer is not None
    protocol_error = state.protocol_error or (state.decision is Decision.ACCEPTANCE and not accepted)
    price = state.standing_offer if accepted else None
    return Outcome(
        decision="accept" if accepted else "reject",
        final_price=price,
        rounds_used=state.round,
        deadlock=state.deadlock,
        trajectory=tuple(state.trajectory),
        over_budget=accepted and price > cfg.budget,
        below_wholesale=accepted and price < cfg.product.wholesale_price,
        over_retail=accepted and price > cfg.product.retail_price,
        protocol_error=protocol_error,
    )


@dataclass
class Transcript:
    config: NegotiationConfig
    turns: list[Turn]
    outcome: Outcome | None
    buyer_id: str
    seller_id: str
    judge_id: str = "rule_based"
    analyst_id: str = "rule_based"
    status: str = "completed"  # completed | aborted
    error: str | None = None
    timing: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        cfg = self.config
        rec = {
            **self.meta,
            "product_name": cfg.product.name,
            "category": cfg.product.category.value,
            "budget_level": None if cfg.budget_level is None else BudgetLevel(cfg.budget_level).value,
            "beta": format_money(cfg.budget),
            "retail_price": format_money(cfg.product.retail_price),
            "wholesale_price": format_money(cfg.product.wholesale_price),
            "t_max": cfg.t_max,
            "buyer_model": self.buyer_id,
            "seller_model": self.seller_id,
            "judge": self.judge_id,
            "analyst": self.analyst_id,
            "status": self.status,
            "error": self.error,
            "turns": [t.to_record() for t in self.turns],
            "outcome": None if self.outcome is None else self.outcome.to_record(),
            "flags": None if self.outcome is None else self.outcome.flags(),
        }
        return rec


def _view(state: NegotiationState, role: Speaker, rnd: int) -> View:
    cfg = state.config
    buyer = role is Speaker.BUYER
    return View(
        role=role,
        round=rnd,
        t_max=cfg.t_max,
        product_name=cfg.product.name,
        retail_price=cfg.product.retail_price,
        private_value=cfg.budget if buyer else cfg.product.wholesale_price,
        features=cfg.product.features,
        opponent_offer=state.standing_offer if buyer else state.buyer_offer,
        own_offer=state.buyer_offer if buyer else state.standing_offer,
        dialogue=tuple((t.speaker.value, t.text) for t in state.turns),
    )


def run_negotiation(
    buyer: Negotiator,
    seller: Negotiator,
    judge: Judge,
    analyst: Analyst,
    config: NegotiationConfig,
    buyer_extractor: Callable[[str], Decimal | None] = extract_price,
    clock: Callable[[], float] = time.time,
) -> Transcript:
    """Run one episode to termination.

    Seller prices come from ``analyst`` and set the standing offer; buyer prices are
    read with ``buyer_extractor`` for bookkeeping only and never become the deal price.
    """
    state = NegotiationState(config)
    started = clock()
    transcript = Transcript(
        config, state.turns, None,
        buyer_id=getattr(buyer, "identifier", "buyer"),
        seller_id=getattr(seller, "identifier", "seller"),
        judge_id=getattr(judge, "identifier", "judge"),
        analyst_id=getattr(analyst, "identifier", "analyst"),
    )

    def fail(exc: Exception, what: str):
        transcript.status = "aborted"
        transcript.error = f"{what}: {type(exc).__name__}: {exc}"
        transcript.timing = {"started": started, "finished": clock()}
        if isinstance(exc, ProtocolError):
            exc.transcript = transcript
            return exc
        return AgentFailure(transcript.error, transcript)

    def speak(fn, view: View, who: str) -> str:
        try:
            text = fn(view)
        except Exception as exc:  # transport errors and anything else an agent raises
            raise fail(exc, f"{who} failed") from exc
        if not text or not text.strip():
            raise fail(ProtocolError(f"{who} produced an empty utterance", transcript), who)
        return text

    greeting = speak(buyer.open, _view(state, Speaker.BUYER, 0), "buyer greeting")
    state.buyer_offer = buyer_extractor(greeting)
    state.turns.append(Turn(0, Speaker.BUYER, greeting, state.buyer_offer))

    for t in range(1, config.t_max + 1):
        state.round = t
        seller_text = speak(seller.respond, _view(state, Speaker.SELLER, t), "seller")
        try:
            offer = analyst.extract(seller_text)
        except Exception as exc:
            raise fail(exc, "analyst failed") from exc
        if offer is not None:
            state.standing_offer = offer
            state.trajectory.append((t, offer))
        state.turns.append(Turn(t, Speaker.SELLER, seller_text, offer))

        buyer_text = speak(buyer.respond, _view(state, Speaker.BUYER, t), "buyer")
        buyer_price = buyer_extractor(buyer_text)
        if buyer_price is not None:
            state.buyer_offer = buyer_price
        try:
            decision = judge.decide(buyer_text, seller_text)
        except Exception as exc:
            raise fail(exc, "judge failed") from exc
        state.turns.append(Turn(t, Speaker.BUYER, buyer_text, buyer_price, decision))

        if decision in (Decision.ACCEPTANCE, Decision.REJECTION):
            state.decision = decision
            break
    else:
        state.deadlock = True
        state.decision = Decision.REJECTION

    transcript.outcome = finalize(state)
    transcript.timing = {"started": started, "finished": clock()}
    return transcript


def transcript_from_record(rec: dict) -> Transcript:
    product = Product(
        name=rec["product_name"],
        retail_price=money(rec["retail_price"]),
        wholesale_price=money(rec["wholesale_price"]),
        category=Category.parse(rec.get("category")),
    )
    level = rec.get("budget_level")
    cfg = NegotiationConfig(product, money(rec["beta"]), int(rec.get("t_max", 30)),
                            budget_level=None if level is None else BudgetLevel(level))
    turns = [Turn.from_record(t) for t in rec.get("turns", [])]
    outcome = None if rec.get("outcome") is None else Outcome.from_record(rec["outcome"], rec.get("flags") or {})
    known = {"product_name", "category", "budget_level", "beta", "retail_price", "wholesale_price", "t_max",
             "buyer_model", "seller_model", "judge", "analyst", "status", "error", "turns", "outcome", "flags"}
    return Transcript(
        cfg, turns, outcome,
        buyer_id=rec["buyer_model"], seller_id=rec["seller_model"],
        judge_id=rec.get("judge", "rule_based"), analyst_id=rec.get("analyst", "rule_based"),
        status=rec.get("status", "completed"), error=rec.get("error"),
        meta={k: v for k, v in rec.items() if k not in known},
    )
