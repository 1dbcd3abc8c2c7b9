"""Retrying completion and a content-addressed on-disk response cache."""

from __future__ import annotations

import json
import logging
import os
import tempfile
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from .base import ChatRequest, ChatResponse, LLMError, Provider, cache_key, canonical_json

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 5
BASE_DELAY = 1.0
BACKOFF_FACTOR = 2.0


def complete(
    request: ChatRequest,
    provider: Provider,
    *,
    max_attempts: int = MAX_ATTEMPTS,
    base_delay: float = BASE_DELAY,
    factor: float = BACKOFF_FACTOR,
    sleep: Callable[[float], None] = time.sleep,
) -> ChatResponse:
    """Send ``request``, retrying rate-limit and transport failures.

    Delays are ``base_delay * factor**i`` between attempts; non-retryable
    errors (auth, content) surface immediately.
    """
    delay = base_delay
    for attempt in range(1, max_attempts + 1):
        started = time.monotonic()
        try:
            response = provider.send(request)
        except LLMError as exc:
            if not exc.retryable or attempt == max_attempts:
                if exc.retryable:
                    logger.error("%s: giving up after %d attempts: %s",
                                 provider.name, attempt, exc)
                raise
            logger.warning("%s: attempt %d/%d failed (%s); retrying in %.1fs",
                           provider.name, attempt, max_attempts, exc, delay)
            sleep(delay)
            delay *= factor
            continue
        latency = response.provider_latency_ms
        if latency is None:
            latency = int((time.monotonic() - started) * 1000)
        if attempt > 1:
            logger.info("%s: succeeded on attempt %d", provider.name, attempt)
        return ChatResponse(
            text=response.text,
            usage=response.usage,
            cached=False,
            provider_latency_ms=latency,
            attempts=attempt,
        )
    raise AssertionError("unreachable")


def cache_path(cache_dir, digest: str) -> Path:
    return Path(cache_dir) / digest[:2] / f"{digest}.json"


def read_cached(cache_dir, request: ChatRequest) -> ChatResponse | None:
    """Stored response for ``request`` or None; corrupt entries count as misses."""
    digest = cache_key(request)
    path = cache_path(cache_dir, digest)
    try:
        raw = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        return None
    try:
        entry = json.loads(raw)
        if entry["request"] != request.canonical():
            raise ValueError("stored request does not match digest")
        body = entry["response"]
        text = body["text"]
        if not isinstance(text, str):
            raise ValueError("response text is not a string")
        usage = tuple(body["usage"]) if body.get("usage") else None
    except (ValueError, KeyError, TypeError) as exc:
        logger.warning("corrupt cache entry %s (%s); refetching", path, exc)
        return None
    return ChatResponse(
        text=text,
        usage=usage,
        cached=True,
        provider_latency_ms=body.get("provider_latency_ms"),
    )


def write_cached(cache_dir, request: ChatRequest, response: ChatResponse) -> Path:
    path = cache_path(cache_dir, cache_key(request))
    path.parent.mkdir(parents=True, exist_ok=True)
    entry = {
        "request": request.canonical(),
        "response": {
            "text": response.text,
            "usage": list(response.usage) if response.usage else None,
            "provider_latency_ms": response.provider_latency_ms,
        },
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(canonical_json(entry))
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def cached_complete(cache_dir, request: ChatRequest, provider: Provider, **retry) -> ChatResponse:
    """Serve from ``cache_dir`` when possible, else ``complete`` and persist."""
    if cache_dir is None:
        return complete(request, provider, **retry)
    hit = read_cached(cache_dir, request)
    if hit is not None:
        return hit
    response = complete(request, provider, **retry)
    write_cached(cache_dir, request, response)
    return response
