"""Rule-based analyst (price extraction) and judge (decision classification)."""
from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

from ..catalog import money
from .types import Decision

# $1,299,000.50 | $ 25000 | $25k | 25000 dollars | 25,000 USD
_PRICE = re.compile(
    r"""
    (?:\$\s?(?P<d_num>\d[\d,]*(?:\.\d+)?)(?P<d_k>\s?[kK]\b)?)
    |
    (?:(?P<w_num>\d[\d,]*(?:\.\d+)?)(?P<w_k>\s?[kK])?\s?(?:dollars|usd|USD)\b)
    """,
    re.VERBOSE,
)
_TOKEN = re.compile(r"\S+")
_SENTENCE_END = re.compile(r"[.!?](?:\s|$)")

ADDON_WINDOW = 8
OFFER_WINDOW = 6
_ADDON = re.compile(r"^(warrant|insur|gift|accessor|add-?on|addon|extras?\b|protection)", re.IGNORECASE)
_OFFER_WORDS = {"offer", "offering", "sell", "selling", "do", "for", "at", "price", "accept", "take", "go"}


@dataclass(frozen=True)
class _Mention:
    value: Decimal
    token_index: int
    sentence: int


def _to_decimal(num: str, k: str | None) -> Decimal | None:
    try:
        value = Decimal(num.replace(",", ""))
    except InvalidOperation:
        return None
    if k:
        value *= 1000
    return value


def _tokenize(message: str) -> list[tuple[int, int, str, int]]:
    """(start, end, lowercase word, sentence index) for every whitespace token."""
    sentence_breaks = [m.end() for m in _SENTENCE_END.finditer(message)]
    out = []
    for m in _TOKEN.finditer(message):
        sentence = sum(1 for b in sentence_breaks if b <= m.start())
        word = m.group().strip(".,;:!?\"'()").lower()
        out.append((m.start(), m.end(), word, sentence))
    return out


def _mentions(message: str, tokens) -> list[_Mention]:
    found = []
    for m in _PRICE.finditer(message):
        if m.group("d_num") is not None:
            value = _to_decimal(m.group("d_num"), m.group("d_k"))
        else:
            value = _to_decimal(m.group("w_num"), m.group("w_k"))
        if value is None or value <= 0:
            continue
        idx = next(i for i, t in enumerate(tokens) if t[0] <= m.start() < t[1] or t[0] >= m.start())
        found.append(_Mention(money(value), idx, tokens[idx][3]))
    return found


def extract_price(seller_message: str | None) -> Decimal | None:
    """Main-product price offered in a seller message, or None.

    Add-on keywords (warranty, insurance, gift, accessories, ...) are attached to the
    nearest price mention within ADDON_WINDOW tokens, and those mentions are dropped.
    Of the remaining mentions, one preceded by an offer word wins; ties go to the last.
    """
    if not seller_message:
        return None
    tokens = _tokenize(seller_message)
    mentions = _mentions(seller_message, tokens)
    if not mentions:
        return None

    excluded: set[int] = set()
    for i, (_, _, word, _) in enumerate(tokens):
        if not _ADDON.match(word):
            continue
        near = [(abs(m.token_index - i), -m.token_index, k) for k, m in enumerate(mentions)
                if abs(m.token_index - i) <= ADDON_WINDOW]
        if near:
            # nearest; equal distance favours the later mention ("$99 for a warranty")
            excluded.add(min(near)[2])

    candidates = [m for k, m in enumerate(mentions) if k not in excluded]
    if not candidates:
        return None

    def has_offer_cue(m: _Mention) -> bool:
        lo = max(0, m.token_index - OFFER_WINDOW)
        window = tokens[lo:m.token_index]
        words = [w for _, _, w, s in window if s == m.sentence]
        if any(w in _OFFER_WORDS for w in words):
            return True
        return "price is" in " ".join(words)

    cued = [m for m in candidates if has_offer_cue(m)]
    pool = cued or candidates
    return pool[-1].value


_LLM_PRICE = re.compile(r"\$?\s?(\d[\d,]*(?:\.\d+)?)")


def parse_analyst_reply(reply: str) -> Decimal | None:
    """Tolerant parse of a model's analyst output: '$25000', '25000', 'Price: $25000', 'None'."""
    text = reply.strip()
    if not text or text.strip("'\"").lower().startswith("none"):
        return None
    m = _LLM_PRICE.search(text)
    if not m:
        return None
    value = _to_decimal(m.group(1), None)
    if value is None or value <= 0:
        return None
    return money(value)


def parse_judge_reply(reply: str) -> Decision:
    """Case-insensitive match of the single keyword; anything unrecognised is CONTINUE."""
    words = re.findall(r"[A-Za-z]+", reply.upper())
    for word in words:
        if word in ("ACCEPTANCE", "ACCEPT", "ACCEPTED"):
            return Decision.ACCEPTANCE
        if word in ("REJECTION", "REJECT", "REJECTED"):
            return Decision.REJECTION
        if word == "CONTINUE":
            return Decision.CONTINUE
    return Decision.CONTINUE


# -- judge ------------------------------------------------------------------

_ACCEPT = re.compile(
    r"\b(i accept|i'll accept|i will accept|accept your|accepted|it'?s a deal|we have a deal|you have a deal|"
    r"(?<!no )deal[!.,]|^deal\b|agreed|i agree|i'll take it|i will take it|let'?s do it|let'?s proceed|"
    r"sounds good|works for me|that works|i'm happy with|i am happy with|let'?s finali[sz]e)",
)
_NEG_ACCEPT = re.compile(r"\b(can ?not|can'?t|won'?t|will not|unable to|not able to|don'?t|do not|not)\s+(accept|agree|take)")
_STRONG_REJECT = re.compile(
    r"\b(walk(ing)? away|no deal|not interested|i('ll| will)? (have to |must )?(pass|decline)|"
    r"i reject|reject (the|your) offer|end (the|this|our) negotiation|ending (the|this|our) negotiation|"
    r"goodbye|i'?m out|look elsewhere|i('ll| will) look elsewhere|not going to work)"
)
_AFFORD = re.compile(
    r"\b(can ?not|can'?t|unable to|not able to) afford|beyond my budget|over my budget|exceeds? my budget|"
    r"out of my budget|above my budget|more than my budget"
)
_COUNTER = re.compile(
    r"\b(could you|can you|would you|will you|how about|what about|would it be possible|is there any|"
    r"any chance|instead|meet (me|in the middle)|counter|my offer is|i can offer|i could offer|i'?d offer|"
    r"i can do|i could do|i'?d pay|i can pay|i could pay|i'?m willing to pay|i am willing to pay|lower)\b"
)
_CONDITIONAL = re.compile(r"^\s*(if|unless|otherwise)\b")


def _sentences(text: str) -> list[str]:
    parts = re.split(r"(?<=[.!?])\s+", text.strip())
    return [p for p in parts if p]


def classify_decision(buyer_message: str, seller_message: str | None = None) -> Decision:
    """Keyword judge over the buyer's latest message; ambiguous input is CONTINUE."""
    if not buyer_message or not buyer_message.strip():
        raise ValueError("buyer_message must be non-empty")
    accept = strong_reject = refused = afford = counter = priced_counter = False
    for sentence in _sentences(buyer_message.lower()):
        conditional = bool(_CONDITIONAL.match(sentence))
        has_price = bool(_PRICE.search(sentence))
        is_counter = bool(_COUNTER.search(sentence))
        if sentence.rstrip().endswith("?"):
            is_counter = is_counter or has_price
        if is_counter:
            counter = True
            priced_counter = priced_counter or has_price
        if conditional:
            continue
        negated = bool(_NEG_ACCEPT.search(sentence))
        if _ACCEPT.search(sentence) and not negated:
            accept = True
        if _STRONG_REJECT.search(sentence):
            strong_reject = True
        refused = refused or negated
        if _AFFORD.search(sentence):
            afford = True

    if (strong_reject or (refused and not counter)) and not accept:
        return Decision.REJECTION
    if afford and not accept:
        return Decision.CONTINUE if counter else Decision.REJECTION
    if accept:
        return Decision.CONTINUE if priced_counter else Decision.ACCEPTANCE
    return Decision.CONTINUE
