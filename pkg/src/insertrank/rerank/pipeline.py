from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from ..bm25 import ScoredCandidate
from ..corpus import CorpusStore, Query
from ..llm import ChatRequest, ContentError, LLMError, Provider, cache_key, cached_complete
from .ordering import OrderMode, order_candidates
from .parse import parse_ranking
from .prompts import TEMPLATES, build_prompt, truncate_tokens
from .scores import ScoreMode, display_scores

logger = logging.getLogger(__name__)

HYDE_TEMPLATE = "Write a passage that answers the following question. Question: {query}. Passage:"


@dataclass(frozen=True)
class RerankConfig:
    score_mode: ScoreMode = ScoreMode.RAW
    order_mode: OrderMode = field(default_factory=OrderMode.bm25_desc)
    topk: int = 10
    max_doc_tokens: int | None = None
    template: str = "bright"
    use_reformulated: bool = True
    score_decimals: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "score_mode", ScoreMode(self.score_mode))
        if self.topk < 1:
            raise ValueError("topk must be >= 1")
        if self.max_doc_tokens is not None and self.max_doc_tokens < 1:
            raise ValueError("max_doc_tokens must be >= 1")
        if self.template not in TEMPLATES:
            raise ValueError(f"unknown template {self.template!r}")

    @property
    def run_tag(self) -> str:
        return f"insertrank:{self.score_mode.value}:{self.order_mode.label}"


@dataclass
class RerankOutcome:
    query_id: str
    ranking: list[int]
    raw_response: str
    repairs: list[str]
    prompt_digest: str | None
    # doc ids in prompt order; ranking indexes into this list
    prompt_doc_ids: list[str] = field(default_factory=list)
    cached: bool = False

    def run_entries(self) -> list[tuple[str, float]]:
        """(doc_id, synthetic score) pairs; score = n - position + 1."""
        n = len(self.prompt_doc_ids)
        return [
            (self.prompt_doc_ids[i - 1], float(n - pos + 1))
            for pos, i in enumerate(self.ranking, 1)
        ]


class QueryFailed(RuntimeError):
    def __init__(self, query_id: str, cause: Exception):
        self.query_id = query_id
        self.cause = cause
        super().__init__(f"query {query_id}: {cause}")


def prepare_request(
    query: Query,
    candidates: Sequence[ScoredCandidate],
    corpus: CorpusStore,
    config: RerankConfig,
    provider_name: str,
    model: str,
    temperature: float = 0.0,
    max_output_tokens: int | None = None,
) -> tuple[ChatRequest, list[ScoredCandidate]]:
    """Build the chat request for one query; also returns the prompt order."""
    ordered = order_candidates(candidates, config.order_mode.for_query(query.query_id))
    texts = []
    for cand in ordered:
        text = corpus.get(cand.doc_id).full_text
        if config.max_doc_tokens is not None:
            text = truncate_tokens(text, config.max_doc_tokens)
        texts.append(text)
    shown = display_scores([c.score for c in ordered], config.score_mode, config.score_decimals)
    prompt = build_prompt(
        query.search_text(config.use_reformulated), texts, shown, config.topk, config.template
    )
    request = ChatRequest.user(
        provider_name,
        model,
        prompt,
        temperature=temperature,
        max_output_tokens=max_output_tokens,
        context={
            "query_id": query.query_id,
            "n": len(ordered),
            "candidates": [(c.doc_id, c.first_stage_rank) for c in ordered],
        },
    )
    return request, ordered


def rerank_query(
    query: Query,
    candidates: Sequence[ScoredCandidate],
    corpus: CorpusStore,
    config: RerankConfig,
    provider: Provider,
    *,
    model: str,
    cache_dir=None,
    temperature: float = 0.0,
    max_output_tokens: int | None = None,
    retry: Mapping | None = None,
) -> RerankOutcome:
    if not candidates:
        return RerankOutcome(query.query_id, [], "", ["no_candidates"], None)
    request, ordered = prepare_request(
        query, candidates, corpus, config, provider.name, model, temperature, max_output_tokens
    )
    try:
        response = cached_complete(cache_dir, request, provider, **(retry or {}))
    except LLMError as exc:
        raise QueryFailed(query.query_id, exc) from exc
    n = len(ordered)
    ranking, repairs = parse_ranking(response.text, n, config.topk, list(range(1, n + 1)))
    if repairs:
        logger.info("query %s: ranking repaired %s", query.query_id, repairs)
    return RerankOutcome(
        query_id=query.query_id,
        ranking=ranking,
        raw_response=response.text,
        repairs=repairs,
        prompt_digest=cache_key(request),
        prompt_doc_ids=[c.doc_id for c in ordered],
        cached=response.cached,
    )


@dataclass
class RerankBatch:
    outcomes: list[RerankOutcome]
    failures: dict[str, Exception]

    @property
    def run(self) -> dict[str, list[tuple[str, float]]]:
        return {o.query_id: o.run_entries() for o in self.outcomes}


def rerank_queries(
    queries: Sequence[Query],
    candidates: Mapping[str, Sequence[ScoredCandidate]],
    corpus: CorpusStore,
    config: RerankConfig,
    provider: Provider,
    *,
    model: str,
    cache_dir=None,
    concurrency: int = 4,
    **kwargs,
) -> RerankBatch:
    """Rerank many queries concurrently; output keeps the input query order.

    A failing query is recorded in ``failures`` and does not stop the rest.
    """

    def one(q: Query):
        try:
            return rerank_query(
                q, candidates.get(q.query_id, []), corpus, config, provider,
                model=model, cache_dir=cache_dir, **kwargs,
            )
        except QueryFailed as exc:
            logger.error("%s", exc)
            return exc

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        results = list(pool.map(one, queries))
    outcomes = [r for r in results if isinstance(r, RerankOutcome)]
    failures = {r.query_id: r.cause for r in results if isinstance(r, QueryFailed)}
    return RerankBatch(outcomes, failures)


def hyde_reformulate(
    query: Query,
    provider: Provider,
    *,
    model: str,
    cache_dir=None,
    template: str = HYDE_TEMPLATE,
    temperature: float = 0.0,
    max_output_tokens: int | None = None,
) -> str:
    """Generate a hypothetical answering passage to use as the search query."""
    prompt = template.format(query=query.text)
    request = ChatRequest.user(
        provider.name, model, prompt,
        temperature=temperature, max_output_tokens=max_output_tokens,
    )
    response = cached_complete(cache_dir, request, provider)
    if not response.text.strip():
        raise ContentError("empty reformulation", provider.name)
    return response.text


def write_raw_response(root, outcome: RerankOutcome) -> Path | None:
    if outcome.prompt_digest is None:
        return None
    path = Path(root) / "responses" / f"{outcome.prompt_digest}.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(outcome.raw_response, encoding="utf-8")
    return path
