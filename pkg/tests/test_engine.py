import json
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dealbench.agents import Decision, RuleAnalyst, RuleJudge, ScriptedNegotiator, ScriptedPolicy, Speaker
from dealbench.catalog import Product
from dealbench.engine import (
    AgentFailure,
    IllegalState,
    NegotiationConfig,
    NegotiationState,
    ProtocolError,
    finalize,
    run_negotiation,
    transcript_from_record,
)
from dealbench.metrics import prr


def ladder(role, open_ratio=1.0, step=0.05):
    return ScriptedNegotiator(ScriptedPolicy(role, open_ratio, step))


def scripted_run(p_r, p_w, beta, b_open=0.7, b_step=0.05, s_step=0.05, t_max=30):
    prod = Product("Widget", Decimal(p_r), Decimal(p_w))
    return run_negotiation(ladder(Speaker.BUYER, b_open, b_step), ladder(Speaker.SELLER, 1.0, s_step),
                           RuleJudge(), RuleAnalyst(), NegotiationConfig(prod, Decimal(beta), t_max))


def test_crossing_scenario():
    o = scripted_run("100", "60", "100").outcome
    assert (o.decision, o.final_price, o.rounds_used, o.deadlock) == ("accept", Decimal("85.00"), 4, False)
    assert [p for _, p in o.trajectory] == [Decimal(x) for x in ("100.00", "95.00", "90.00", "85.00")]
    assert o.trajectory[-1][1] == o.final_price


def test_offer_sequences():
    tr = scripted_run("100", "60", "100")
    buyer = [t.extracted_price for t in tr.turns if t.speaker is Speaker.BUYER]
    assert buyer[:4] == [Decimal(x) for x in ("70.00", "75.00", "80.00", "85.00")]
    assert tr.turns[0].round == 0 and tr.turns[0].speaker is Speaker.BUYER


def test_infeasible_deadlock():
    o = scripted_run("100", "80", "65").outcome
    assert (o.decision, o.final_price, o.rounds_used, o.deadlock) == ("reject", None, 30, True)
    assert not any(o.flags().values())


def test_zero_step_immediate_accept():
    o = scripted_run("100", "60", "100", b_open=1.0, b_step=0.0, s_step=0.0).outcome
    assert (o.decision, o.final_price, o.rounds_used) == ("accept", Decimal("100.00"), 1)


class FixedSeller:
    identifier = "fixed"

    def __init__(self, text="I can offer it for $100."):
        self.text = text

    def respond(self, view):
        return self.text


class Talker:
    identifier = "talker"

    def open(self, view):
        return "Hello there, is this available?"

    def respond(self, view):
        return "Okay."


class ConstJudge:
    identifier = "const"

    def __init__(self, d):
        self.d = d

    def decide(self, b, s):
        return self.d


def _cfg(beta="100", t_max=30, p_r="120", p_w="60"):
    return NegotiationConfig(Product("Widget", Decimal(p_r), Decimal(p_w)), Decimal(beta), t_max)


def test_judge_accepts_immediately():
    o = run_negotiation(Talker(), FixedSeller(), ConstJudge(Decision.ACCEPTANCE), RuleAnalyst(), _cfg()).outcome
    assert (o.decision, o.final_price, o.rounds_used) == ("accept", Decimal("100.00"), 1)


def test_accept_without_standing_offer_is_protocol_error():
    o = run_negotiation(Talker(), FixedSeller("Hello! Happy to help."), ConstJudge(Decision.ACCEPTANCE),
                        RuleAnalyst(), _cfg()).outcome
    assert o.decision == "reject" and o.protocol_error and o.final_price is None


def test_priceless_seller_message_keeps_standing_offer():
    class TwoStep:
        identifier = "two"

        def __init__(self):
            self.n = 0

        def respond(self, view):
            self.n += 1
            return "I can offer it for $90." if self.n == 1 else "That is a great choice."

    class AcceptSecond:
        identifier = "j"

        def __init__(self):
            self.n = 0

        def decide(self, b, s):
            self.n += 1
            return Decision.ACCEPTANCE if self.n == 2 else Decision.CONTINUE

    o = run_negotiation(Talker(), TwoStep(), AcceptSecond(), RuleAnalyst(), _cfg()).outcome
    assert o.final_price == Decimal("90.00") and o.rounds_used == 2
    assert o.trajectory == ((1, Decimal("90.00")),)


def test_reject_ends_episode():
    o = run_negotiation(Talker(), FixedSeller(), ConstJudge(Decision.REJECTION), RuleAnalyst(), _cfg()).outcome
    assert (o.decision, o.rounds_used, o.deadlock) == ("reject", 1, False)


def test_deadlock_rounds_equal_t_max():
    o = run_negotiation(Talker(), FixedSeller(), ConstJudge(Decision.CONTINUE), RuleAnalyst(), _cfg(t_max=5)).outcome
    assert o.deadlock and o.rounds_used == 5 and o.decision == "reject"


@pytest.mark.parametrize("price,beta,flag", [("105", "100", "over_budget"), ("59", "100", "below_wholesale"),
                                             ("125", "200", "over_retail")])
def test_anomaly_flags(price, beta, flag):
    seller = FixedSeller(f"I can offer it for ${price}.")
    o = run_negotiation(Talker(), seller, ConstJudge(Decision.ACCEPTANCE), RuleAnalyst(), _cfg(beta)).outcome
    assert o.flags()[flag] is True
    assert sum(o.flags().values()) == 1


def test_finalize_requires_terminal():
    with pytest.raises(IllegalState):
        finalize(NegotiationState(_cfg()))


class Boom:
    identifier = "boom"

    def __init__(self, after=0):
        self.after = after

    def respond(self, view):
        if view.round > self.after:
            raise ConnectionError("endpoint unreachable")
        return "I can offer it for $100."


def test_agent_failure_keeps_partial_transcript():
    with pytest.raises(AgentFailure) as exc:
        run_negotiation(Talker(), Boom(after=2), ConstJudge(Decision.CONTINUE), RuleAnalyst(), _cfg())
    tr = exc.value.transcript
    assert tr.status == "aborted" and tr.outcome is None
    assert len(tr.turns) == 1 + 2 * 2
    assert "ConnectionError" in tr.error


def test_empty_utterance_is_protocol_error():
    with pytest.raises(ProtocolError) as exc:
        run_negotiation(Talker(), FixedSeller("   "), ConstJudge(Decision.CONTINUE), RuleAnalyst(), _cfg())
    assert exc.value.transcript.status == "aborted"


def test_record_roundtrip_and_determinism():
    a = scripted_run("100", "60", "100").to_record()
    b = scripted_run("100", "60", "100").to_record()
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    again = transcript_from_record(json.loads(json.dumps(a))).to_record()
    assert again == a
    assert a["outcome"]["final_price"] == "85.00" and a["flags"]["over_budget"] is False


money_st = st.integers(200, 10**6)


@settings(max_examples=150, deadline=None)
@given(money_st, st.floats(0.1, 0.9), st.floats(0.3, 1.0), st.floats(0.0, 0.2), st.floats(0.0, 0.2),
       st.sampled_from(["0.8", "1.0", "1.2"]))
def test_scripted_limits_and_zero_sum(pr_cents, w_frac, b_open, b_step, s_step, beta_frac):
    p_r = Decimal(pr_cents) / 100
    p_w = (p_r * Decimal(repr(round(w_frac, 3)))).quantize(Decimal("0.01"))
    if p_w <= 0 or p_w >= p_r:
        return
    beta = (p_r * Decimal(beta_frac)).quantize(Decimal("0.01"))
    tr = scripted_run(p_r, p_w, beta, round(b_open, 3), round(b_step, 3), round(s_step, 3), t_max=15)
    for t in tr.turns:
        if t.extracted_price is None:
            continue
        if t.speaker is Speaker.BUYER and t.decision is not Decision.ACCEPTANCE:
            assert t.extracted_price <= beta
        if t.speaker is Speaker.SELLER:
            assert t.extracted_price >= p_w
    o = tr.outcome
    assert o.rounds_used <= 15
    if o.accepted:
        assert o.final_price <= beta
        assert abs(prr(p_r, o.final_price) + float(o.final_price / p_r) - 1.0) <= 1e-12
