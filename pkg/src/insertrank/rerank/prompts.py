"""Listwise reranking prompt templates (BRIGHT and R2MED variants)."""

from __future__ import annotations

from typing import Sequence

RETRIEVER_SENTENCE = "You are also given the BM25 scores from a lexical retriever for each document."

_BRIGHT = (
    "The following passages are related to query: {query}\n"
    "\n"
    "{retriever_prompt}{doc_string}\n"
    "First identify the essential problem in the query.\n"
    "Think step by step to reason about why each document is relevant or irrelevant.\n"
    "Rank these passages based on their relevance to the query.\n"
    "Please output the ranking result of passages as a list, where the first element is "
    "the id of the most relevant passage, the second element is the id of the second most "
    "element, etc.\n"
    "Please strictly follow the format to output a list of {topk} ids corresponding to the "
    "most relevant {topk} passages:\n"
    "```json\n"
    "[...]\n"
    "```"
)

# "irrelevant.." is verbatim from the published R2MED prompt
_R2MED = (
    'The following passages are related to the query: "{query}".\n'
    "\n"
    "{retriever_prompt}{doc_string}\n"
    "First, identify the essential problem or topic in the query.\n"
    "Think step by step to reason about why each document is relevant or irrelevant..\n"
    "Rank these passages based on their relevance to the query.\n"
    "Please output the ranking result of passages as a list, where the first element is "
    "the id of the most relevant passage, the second element is the id of the second most "
    "element, etc.\n"
    "Finally, output a ranked list of the top {topk} most relevant passages by their index "
    "number.\n"
    "Please strictly follow the format to output a list of {topk} ids corresponding to the "
    "most relevant {topk} passages:\n"
    "```json\n"
    "[...]\n"
    "```"
)

TEMPLATES = {"bright": _BRIGHT, "r2med": _R2MED}


def truncate_tokens(text: str, max_tokens: int) -> str:
    """Keep the first ``max_tokens`` whitespace tokens, joined by single spaces."""
    if max_tokens < 1:
        raise ValueError("max_tokens must be >= 1")
    tokens = text.split()
    if len(tokens) <= max_tokens:
        return text
    return " ".join(tokens[:max_tokens])


def doc_block(texts: Sequence[str], scores: Sequence[str] | None) -> str:
    if scores is None:
        return "\n".join(f"[{i}]. {t}" for i, t in enumerate(texts, 1))
    if len(scores) != len(texts):
        raise ValueError("one display score per document is required")
    return "\n".join(
        f"[{i}]. {t} BM25 score: {s}" for i, (t, s) in enumerate(zip(texts, scores), 1)
    )


def build_prompt(
    query: str,
    texts: Sequence[str],
    scores: Sequence[str] | None,
    topk: int,
    template: str = "bright",
) -> str:
    """Render the reranking prompt for documents already in prompt order.

    ``scores`` holds the formatted per-document scores, or None for the
    vanilla prompt without the retriever sentence.
    """
    if not texts:
        raise ValueError("cannot build a prompt without candidates")
    try:
        tmpl = TEMPLATES[template]
    except KeyError:
        raise ValueError(f"unknown template {template!r}; expected one of {sorted(TEMPLATES)}") from None
    retriever_prompt = "" if scores is None else RETRIEVER_SENTENCE + "\n\n"
    return tmpl.format(
        query=query,
        retriever_prompt=retriever_prompt,
        doc_string=doc_block(texts, scores),
        topk=min(topk, len(texts)),
    )
