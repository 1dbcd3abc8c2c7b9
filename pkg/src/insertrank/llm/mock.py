"""Deterministic stand-ins for a chat model, used by tests and dry runs.

Every mock answers with a fenced JSON list of 1-based prompt indices. The
number of candidates comes from ``request.context["n"]`` when the caller
supplies it, otherwise from the ``[i].`` lines in the prompt.
"""

from __future__ import annotations

import re
import threading
from typing import Sequence

from ..corpus import Qrels
from .base import ChatRequest, ChatResponse, ContentError, ScriptExhausted

_DOC_LINE = re.compile(r"^\[(\d+)\]\. ", re.MULTILINE)


def format_ranking(indices: Sequence[int]) -> str:
    return "```json\n[" + ", ".join(str(i) for i in indices) + "]\n```"


def _n_candidates(request: ChatRequest) -> int:
    ctx = request.context or {}
    if "n" in ctx:
        return int(ctx["n"])
    return len(_DOC_LINE.findall(request.prompt))


class IdentityProvider:
    name = "mock-identity"

    def send(self, request: ChatRequest) -> ChatResponse:
        n = _n_candidates(request)
        return ChatResponse(format_ranking(range(1, n + 1)))


class ReverseProvider:
    name = "mock-reverse"

    def send(self, request: ChatRequest) -> ChatResponse:
        n = _n_candidates(request)
        return ChatResponse(format_ranking(range(n, 0, -1)))


class OracleProvider:
    """Ranks prompt indices by (grade desc, first-stage rank asc).

    Needs ``request.context`` with ``query_id`` and ``candidates``: the
    (doc_id, first_stage_rank) pairs in prompt order.
    """

    name = "mock-oracle"

    def __init__(self, qrels: Qrels):
        self.qrels = qrels

    def send(self, request: ChatRequest) -> ChatResponse:
        ctx = request.context or {}
        try:
            qid = ctx["query_id"]
            candidates = ctx["candidates"]
        except KeyError as exc:
            raise ContentError(f"oracle mock needs context key {exc}", self.name) from None
        order = sorted(
            range(1, len(candidates) + 1),
            key=lambda i: (-self.qrels.grade(qid, candidates[i - 1][0]), candidates[i - 1][1]),
        )
        return ChatResponse(format_ranking(order))


class ScriptedProvider:
    """Replays a fixed sequence; exception entries are raised instead."""

    name = "mock-scripted"

    def __init__(self, responses: Sequence[str | BaseException]):
        self._responses = list(responses)
        self._next = 0
        self._lock = threading.Lock()
        self.calls = 0

    def send(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.calls += 1
            if self._next >= len(self._responses):
                raise ScriptExhausted(
                    f"script exhausted after {len(self._responses)} responses", self.name
                )
            item = self._responses[self._next]
            self._next += 1
        if isinstance(item, BaseException):
            raise item
        return ChatResponse(item)


MOCK_KINDS = ("identity", "reverse", "oracle", "scripted")


def mock_provider(kind: str, config: dict | None = None):
    config = config or {}
    if kind == "identity":
        return IdentityProvider()
    if kind == "reverse":
        return ReverseProvider()
    if kind == "oracle":
        if "qrels" not in config:
            raise ValueError("oracle mock requires 'qrels'")
        return OracleProvider(config["qrels"])
    if kind == "scripted":
        if "responses" not in config:
            raise ValueError("scripted mock requires 'responses'")
        return ScriptedProvider(config["responses"])
    raise ValueError(f"unknown mock kind {kind!r}; expected one of {MOCK_KINDS}")
