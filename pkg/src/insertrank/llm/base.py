from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Protocol

ROLES = ("system", "user")


class LLMError(RuntimeError):
    """Base class for provider failures. ``retryable`` drives the backoff loop."""

    retryable = False

    def __init__(self, message: str, provider: str | None = None):
        self.provider = provider
        self.provider_message = message
        prefix = f"[{provider}] " if provider else ""
        super().__init__(prefix + message)


class AuthError(LLMError):
    pass


class RateLimitError(LLMError):
    retryable = True


class TransportError(LLMError):
    retryable = True


class ContentError(LLMError):
    """The provider answered but refused or returned an unusable payload."""


class ScriptExhausted(LLMError):
    pass


@dataclass(frozen=True)
class ChatRequest:
    provider: str
    model: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    max_output_tokens: int | None = None
    # Side-channel for mock providers (candidate ids, qrels keys). Not part of
    # the cache digest; real providers ignore it.
    context: Mapping[str, Any] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        msgs = tuple((str(r), str(c)) for r, c in self.messages)
        object.__setattr__(self, "messages", msgs)
        object.__setattr__(self, "temperature", float(self.temperature))
        if not any(role == "user" for role, _ in msgs):
            raise ValueError("request needs at least one user message")
        for role, content in msgs:
            if role not in ROLES:
                raise ValueError(f"unsupported role {role!r}")
            if not content:
                raise ValueError("message content must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens is not None and self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")

    @classmethod
    def user(cls, provider: str, model: str, prompt: str, **kwargs) -> "ChatRequest":
        return cls(provider, model, (("user", prompt),), **kwargs)

    @property
    def prompt(self) -> str:
        """Content of the last user message."""
        return [c for r, c in self.messages if r == "user"][-1]

    def canonical(self) -> dict:
        return {
            "provider": self.provider,
            "model": self.model,
            "messages": [{"role": r, "content": c} for r, c in self.messages],
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
        }


@dataclass(frozen=True)
class ChatResponse:
    text: str
    usage: tuple[int, int] | None = None
    cached: bool = False
    provider_latency_ms: int | None = None
    attempts: int = 1


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def cache_key(request: ChatRequest) -> str:
    """SHA-256 hex digest of the canonical request serialization."""
    return hashlib.sha256(canonical_json(request.canonical()).encode("utf-8")).hexdigest()


class Provider(Protocol):
    name: str

    def send(self, request: ChatRequest) -> ChatResponse: ...
