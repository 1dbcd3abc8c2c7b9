"""OpenAI-compatible chat-completion providers, configured by data."""

from __future__ import annotations

import os
import re
import time
from dataclasses import dataclass, field, fields
from typing import Any

import httpx

from .base import AuthError, ChatRequest, ChatResponse, ContentError, RateLimitError, TransportError

ENV_PREFIX = "INSERTRANK_API_KEY_"


def credential_env_var(provider: str) -> str:
    return ENV_PREFIX + re.sub(r"[^0-9A-Za-z]", "_", provider).upper()


@dataclass(frozen=True)
class ProviderSpec:
    name: str
    base_url: str
    path: str = "/chat/completions"
    auth_header: str = "Authorization"
    auth_scheme: str = "Bearer"
    model_field: str = "model"
    messages_field: str = "messages"
    temperature_field: str = "temperature"
    max_tokens_field: str = "max_tokens"
    text_path: tuple = ("choices", 0, "message", "content")
    usage_prompt_path: tuple = ("usage", "prompt_tokens")
    usage_completion_path: tuple = ("usage", "completion_tokens")
    timeout_s: float = 600.0
    extra_body: dict = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, name: str, data: dict) -> "ProviderSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"provider {name!r}: unknown keys {sorted(unknown)}")
        kwargs = dict(data)
        for key in ("text_path", "usage_prompt_path", "usage_completion_path"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        kwargs["name"] = name
        return cls(**kwargs)


BUILTIN_PROVIDERS = {
    "openai": ProviderSpec("openai", "https://api.openai.com/v1"),
    "deepseek": ProviderSpec("deepseek", "https://api.deepseek.com/v1"),
    "gemini": ProviderSpec("gemini", "https://generativelanguage.googleapis.com/v1beta/openai"),
}


def _dig(obj: Any, path: tuple):
    for key in path:
        try:
            obj = obj[key]
        except (KeyError, IndexError, TypeError):
            return None
    return obj


def _error_message(resp: httpx.Response) -> str:
    try:
        body = resp.json()
    except ValueError:
        return resp.text.strip()[:500] or f"HTTP {resp.status_code}"
    msg = _dig(body, ("error", "message")) or _dig(body, ("message",))
    return str(msg) if msg else str(body)[:500]


class OpenAICompatibleProvider:
    def __init__(self, spec: ProviderSpec, client: httpx.Client | None = None):
        self.spec = spec
        self.name = spec.name
        self._client = client or httpx.Client(timeout=spec.timeout_s)

    def _api_key(self) -> str:
        var = credential_env_var(self.spec.name)
        key = os.environ.get(var)
        if not key:
            raise AuthError(f"missing credential: set environment variable {var}", self.name)
        return key

    def send(self, request: ChatRequest) -> ChatResponse:
        spec = self.spec
        key = self._api_key()
        value = f"{spec.auth_scheme} {key}" if spec.auth_scheme else key
        body = dict(spec.extra_body)
        body[spec.model_field] = request.model
        body[spec.messages_field] = [{"role": r, "content": c} for r, c in request.messages]
        body[spec.temperature_field] = request.temperature
        if request.max_output_tokens is not None:
            body[spec.max_tokens_field] = request.max_output_tokens
        url = spec.base_url.rstrip("/") + spec.path
        started = time.monotonic()
        try:
            resp = self._client.post(url, json=body, headers={spec.auth_header: value})
        except httpx.TransportError as exc:
            raise TransportError(f"{type(exc).__name__}: {exc}", self.name) from exc
        latency = int((time.monotonic() - started) * 1000)
        status = resp.status_code
        if status in (401, 403):
            raise AuthError(_error_message(resp), self.name)
        if status == 429:
            raise RateLimitError(_error_message(resp), self.name)
        if status >= 500 or status == 408:
            raise TransportError(f"HTTP {status}: {_error_message(resp)}", self.name)
        if status >= 400:
            raise ContentError(f"HTTP {status}: {_error_message(resp)}", self.name)
        try:
            payload = resp.json()
        except ValueError:
            raise ContentError("response is not JSON", self.name) from None
        text = _dig(payload, spec.text_path)
        if text is None:
            raise ContentError(f"no text at {list(spec.text_path)} in response", self.name)
        prompt_toks = _dig(payload, spec.usage_prompt_path)
        completion_toks = _dig(payload, spec.usage_completion_path)
        usage = None
        if isinstance(prompt_toks, int) and isinstance(completion_toks, int):
            usage = (prompt_toks, completion_toks)
        return ChatResponse(text=str(text), usage=usage, provider_latency_ms=latency)


def load_registry(path=None) -> dict[str, ProviderSpec]:
    """Built-in provider specs, overridden or extended by a TOML file.

    The file holds one ``[providers.<name>]`` table per provider, with keys
    matching :class:`ProviderSpec` fields.
    """
    registry = dict(BUILTIN_PROVIDERS)
    if path is None:
        return registry
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    for name, table in data.get("providers", {}).items():
        registry[name] = ProviderSpec.from_mapping(name, table)
    return registry
