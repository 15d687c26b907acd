from .remote import (
    AgentEndpoint,
    AuthError,
    ChatClient,
    EmptyCompletion,
    LLMAnalyst,
    LLMJudge,
    LLMNegotiator,
    RateLimited,
    RateLimiter,
    TransportError,
    chat_complete,
)
from .rules import classify_decision, extract_price, parse_analyst_reply, parse_judge_reply
from .scripted import RuleAnalyst, RuleJudge, ScriptedNegotiator, ScriptedPolicy, planned_offer, scripted_step
from .types import ChatMessage, Decision, Speaker, View

__all__ = [
    "AgentEndpoint",
    "AuthError",
    "ChatClient",
    "ChatMessage",
    "Decision",
    "EmptyCompletion",
    "LLMAnalyst",
    "LLMJudge",
    "LLMNegotiator",
    "RateLimited",
    "RateLimiter",
    "RuleAnalyst",
    "RuleJudge",
    "ScriptedNegotiator",
    "ScriptedPolicy",
    "Speaker",
    "TransportError",
    "View",
    "chat_complete",
    "classify_decision",
    "extract_price",
    "parse_analyst_reply",
    "parse_judge_reply",
    "planned_offer",
    "scripted_step",
]
