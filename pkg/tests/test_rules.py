from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dealbench.agents import (
    Decision,
    classify_decision,
    extract_price,
    parse_analyst_reply,
    parse_judge_reply,
)

ANALYST_EXAMPLES = [
    ("I can offer you this car for $25000, which is a fair price considering its features.", Decimal("25000")),
    ("Thank you for your interest in our product. Let me know if you have any specific questions about its features.", None),
    ("I understand your budget constraints, but the best I can do is $22900 and include a $3000 warranty.", Decimal("22900")),
    ("I can sell it to you for $15500. We also offer an extended warranty for $1200 if you're interested.", Decimal("15500")),
]


@pytest.mark.parametrize("msg,expected", ANALYST_EXAMPLES)
def test_analyst_examples(msg, expected):
    assert extract_price(msg) == expected


EXTRA = [
    ("The price is $1,299.99 today only.", Decimal("1299.99")),
    ("I could go to $24k if you decide today.", Decimal("24000")),
    ("I can offer it to you for 23,500 dollars.", Decimal("23500")),
    ("Retail is $30000, but I can do $27500 for you.", Decimal("27500")),
    ("You offered $20000, which is too low. My price is $26000.", Decimal("26000")),
    ("For $450 you get the mixer, and a $50 gift card as a bonus.", Decimal("450")),
    ("Add insurance for $900 and the car is yours at $21000.", Decimal("21000")),
    ("Accessories run $300 extra; the headphones alone are $349.", Decimal("349")),
    ("I can't go any lower, sorry.", None),
    ("", None),
    ("We sold 3 units yesterday.", None),
    ("Best I can do is $ 18,750.", Decimal("18750")),
]


@pytest.mark.parametrize("msg,expected", EXTRA)
def test_extract_more(msg, expected):
    assert extract_price(msg) == expected


def test_extract_none_input():
    assert extract_price(None) is None


_words = st.sampled_from(["great", "car", "today", "really", "deal", "yes", "fine", "now", "the", "is", "price"])


@settings(max_examples=200)
@given(st.lists(_words, max_size=6), st.lists(_words, max_size=6), st.integers(1, 10**7), st.integers(0, 99))
def test_single_price_without_addons_is_returned(pre, post, dollars, cents):
    amount = Decimal(dollars) + Decimal(cents) / 100
    msg = " ".join([*pre, f"${amount:.2f}", *post])
    assert extract_price(msg) == amount


@pytest.mark.parametrize("reply,expected", [
    ("$25000", Decimal("25000")), ("25000", Decimal("25000")), ("Price: $25,000", Decimal("25000")),
    ("  $15500.50\n", Decimal("15500.50")), ("None", None), ("'None'", None), ("none.", None), ("", None),
    ("no price", None),
])
def test_parse_analyst_reply(reply, expected):
    assert parse_analyst_reply(reply) == expected


@pytest.mark.parametrize("reply,expected", [
    ("ACCEPTANCE", Decision.ACCEPTANCE), (" acceptance\n", Decision.ACCEPTANCE), ("REJECTION.", Decision.REJECTION),
    ("Continue", Decision.CONTINUE), ("C. CONTINUE", Decision.CONTINUE), ("unsure", Decision.CONTINUE),
    ("A. ACCEPTANCE", Decision.ACCEPTANCE),
])
def test_parse_judge_reply(reply, expected):
    assert parse_judge_reply(reply) is expected


A, R, C = Decision.ACCEPTANCE, Decision.REJECTION, Decision.CONTINUE

# hand-labelled buyer messages
JUDGE_FIXTURES = [
    ("Deal, I accept your offer of $85.", A),
    ("I cannot afford that, I'm walking away.", R),
    ("Could you do $70 instead?", C),
    ("That works for me. Let's finalize it.", A),
    ("Alright, $24,500 it is. I'll take it!", A),
    ("It's a deal.", A),
    ("Agreed, thank you!", A),
    ("Sounds good, let's proceed at $950.", A),
    ("I'm sorry, but that's beyond my budget. I'll have to pass.", R),
    ("No deal. Goodbye.", R),
    ("I'm not interested at that price.", R),
    ("I can't accept that price, it's too high.", R),
    ("Unfortunately I can't afford $30,000.", R),
    ("This isn't going to work for me, so I'll look elsewhere.", R),
    ("I will end the negotiation here. Thank you for your time.", R),
    ("I can't afford $30,000. Could you do $25,000?", C),
    ("How about $22,000?", C),
    ("What about meeting in the middle at $23,000?", C),
    ("Is there any flexibility on the price?", C),
    ("Does it come with a warranty?", C),
    ("I'd pay $800 if you include delivery.", C),
    ("That's still a bit high for me. Could you do $75.00 instead?", C),
    ("Thanks for the offer. I was hoping for something lower.", C),
    ("I appreciate it, but I can offer $19,000.", C),
    ("If you can do $900, we have a deal.", C),
    ("I accept, if you can do $880?", C),
    ("Hmm, let me think about it.", C),
    ("You raised the price, so I will walk away. No deal.", R),
    ("Deal! See you tomorrow for pickup.", A),
    ("I don't agree with that number. My offer is $600.", C),
]


def test_judge_fixture_count():
    assert len(JUDGE_FIXTURES) == 30


@pytest.mark.parametrize("msg,expected", JUDGE_FIXTURES)
def test_judge_hand_labels(msg, expected):
    assert classify_decision(msg, "I can offer it for $1000.") is expected


def test_judge_rejects_empty_buyer_message():
    with pytest.raises(ValueError):
        classify_decision("   ", None)
