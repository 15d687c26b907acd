"""Chat-completion transport and model-backed negotiators, judge and analyst."""
from __future__ import annotations

import dataclasses
import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Callable, Sequence

import httpx

from ..catalog import Product
from ..errors import DealbenchError
from .. import prompts
from .rules import parse_analyst_reply, parse_judge_reply
from .types import ChatMessage, Decision, Speaker, View

log = logging.getLogger(__name__)


class TransportError(DealbenchError):
    pass


class AuthError(TransportError):
    pass


class RateLimited(TransportError):
    pass


class EmptyCompletion(TransportError):
    pass


@dataclass(frozen=True)
class AgentEndpoint:
    base_url: str
    model_name: str
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 60.0
    max_retries: int = 3
    temperature: float | None = None
    backoff_base: float = 1.0
    backoff_factor: float = 2.0

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if not 0 <= self.max_retries <= 5:
            raise ValueError("max_retries must be in [0, 5]")
        if self.temperature is not None and self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "AgentEndpoint":
        return cls(
            base_url=d["base_url"],
            model_name=d["model"],
            api_key_env=d.get("key_env", "OPENAI_API_KEY"),
            timeout=float(d.get("timeout", 60.0)),
            max_retries=int(d.get("max_retries", 3)),
            temperature=d.get("temperature"),
            backoff_base=float(d.get("backoff_base", 1.0)),
            backoff_factor=float(d.get("backoff_factor", 2.0)),
        )


class RateLimiter:
    """Token bucket shared by every caller holding a reference to it."""

    def __init__(self, per_minute: float, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        if per_minute <= 0:
            raise ValueError("per_minute must be positive")
        self.rate = per_minute / 60.0
        self.capacity = max(1.0, per_minute / 60.0)
        self._tokens = self.capacity
        self._clock = clock
        self._sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)


@dataclass
class ChatClient:
    """Posts chat histories to an OpenAI-style ``/chat/completions`` endpoint."""

    endpoint: AgentEndpoint
    rate_limiter: RateLimiter | None = None
    wire_log: list | None = None
    transport: httpx.BaseTransport | None = None
    sleep: Callable[[float], None] = time.sleep
    rng: random.Random = field(default_factory=random.Random)
    retries_used: int = 0

    def _url(self) -> str:
        base = self.endpoint.base_url.rstrip("/")
        return base if base.endswith("/chat/completions") else f"{base}/chat/completions"

    def complete(self, history: Sequence[ChatMessage]) -> str:
        return chat_complete(self.endpoint, history, client=self)


def _validate_history(history: Sequence[ChatMessage]) -> None:
    if not history or history[0].role != "system":
        raise ValueError("history must start with a system message")
    if sum(1 for m in history if m.role == "system") != 1:
        raise ValueError("history must contain exactly one system message")


def chat_complete(endpoint: AgentEndpoint, history: Sequence[ChatMessage], client: ChatClient | None = None) -> str:
    _validate_history(history)
    client = client or ChatClient(endpoint)
    key = os.environ.get(endpoint.api_key_env)
    if not key:
        raise AuthError(f"environment variable {endpoint.api_key_env} is not set")

    body = {"model": endpoint.model_name, "messages": [m.to_wire() for m in history]}
    if endpoint.temperature is not None:
        body["temperature"] = endpoint.temperature
    headers = {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    attempt = 0
    last_error: Exception | None = None
    with httpx.Client(timeout=endpoint.timeout, transport=client.transport) as http:
        while attempt <= endpoint.max_retries:
            if attempt:
                delay = endpoint.backoff_base * endpoint.backoff_factor ** (attempt - 1)
                client.sleep(delay * (0.5 + client.rng.random()))
                client.retries_used += 1
            attempt += 1
            if client.rate_limiter is not None:
                client.rate_limiter.acquire()
            try:
                resp = http.post(client._url(), json=body, headers=headers)
            except httpx.TransportError as exc:
                last_error = TransportError(f"{type(exc).__name__}: {exc}")
                log.warning("transport failure on %s (attempt %d): %s", endpoint.model_name, attempt, exc)
                continue
            if client.wire_log is not None:
                client.wire_log.append({"request": body, "status": resp.status_code, "response": resp.text})
            if resp.status_code in (401, 403):
                raise AuthError(f"{endpoint.model_name}: HTTP {resp.status_code}")
            if resp.status_code == 429:
                last_error = RateLimited(f"{endpoint.model_name}: HTTP 429")
                continue
            if resp.status_code >= 500:
                last_error = TransportError(f"{endpoint.model_name}: HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise TransportError(f"{endpoint.model_name}: HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                content = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise TransportError(f"malformed completion payload: {exc}") from None
            if not content or not str(content).strip():
                raise EmptyCompletion(f"{endpoint.model_name} returned an empty completion")
            return str(content).strip()
    if isinstance(last_error, RateLimited):
        raise last_error
    raise TransportError(f"retries exhausted for {endpoint.model_name}: {last_error}")


class LLMNegotiator:
    """Chat-model buyer or seller. Own turns are sent as ``assistant``, the opponent's as ``user``."""

    def __init__(self, client: ChatClient, role: Speaker, product: Product, budget: Decimal | None = None,
                 system_prompt: str | None = None, identifier: str | None = None):
        self.client = client
        self.role = role
        self.product = product
        self.budget = budget
        self.identifier = identifier or client.endpoint.model_name
        if system_prompt is None:
            if role is Speaker.BUYER:
                system_prompt = prompts.render(prompts.load_template("buyer_system"),
                                               prompts.buyer_context(product, budget))
            else:
                system_prompt = prompts.render(prompts.load_template("seller_system"),
                                               prompts.seller_context(product))
        self.system_prompt = system_prompt

    def _history(self, view: View) -> list[ChatMessage]:
        msgs = [ChatMessage("system", self.system_prompt)]
        for speaker, text in view.dialogue:
            msgs.append(ChatMessage("assistant" if speaker == self.role.value else "user", text))
        return msgs

    def open(self, view: View) -> str:
        greeting = prompts.render(prompts.load_template("buyer_greeting"),
                                  prompts.greeting_context(self.product, self.budget))
        return self.client.complete([ChatMessage("system", greeting)])

    def respond(self, view: View) -> str:
        return self.client.complete(self._history(view))


def _deterministic(client: ChatClient) -> ChatClient:
    """Classifier roles default to temperature 0 unless the endpoint sets one."""
    if client.endpoint.temperature is not None:
        return client
    return dataclasses.replace(client, endpoint=dataclasses.replace(client.endpoint, temperature=0.0))


class LLMJudge:
    def __init__(self, client: ChatClient):
        self.client = _deterministic(client)
        self.identifier = client.endpoint.model_name
        self.template = prompts.load_template("judge")

    def decide(self, buyer_message: str, seller_message: str | None) -> Decision:
        text = prompts.render(self.template, prompts.judge_context(buyer_message, seller_message))
        return parse_judge_reply(self.client.complete([ChatMessage("system", text)]))


class LLMAnalyst:
    def __init__(self, client: ChatClient):
        self.client = _deterministic(client)
        self.identifier = client.endpoint.model_name
        self.template = prompts.load_template("analyst")

    def extract(self, message: str) -> Decimal | None:
        text = prompts.render(self.template, prompts.analyst_context(message))
        return parse_analyst_reply(self.client.complete([ChatMessage("system", text)]))


def dump_wire_log(entries: list, path) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        for e in entries:
            fh.write(json.dumps(e, sort_keys=True) + "\n")
