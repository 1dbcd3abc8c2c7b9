"""Extract and repair a ranking from free-form model output."""

from __future__ import annotations

import json
import re
from typing import Sequence

_INT_ARRAY = re.compile(r"\[\s*-?\d+(?:\s*,\s*-?\d+)*\s*\]")


def extract_last_int_array(text: str) -> list[int] | None:
    """The last non-empty JSON array of integers in ``text``, fenced or bare."""
    for match in reversed(list(_INT_ARRAY.finditer(text))):
        try:
            values = json.loads(match.group(0))
        except ValueError:  # e.g. leading zeros
            continue
        return values
    return None


def parse_ranking(
    raw: str,
    n: int,
    topk: int,
    fallback_order: Sequence[int],
) -> tuple[list[int], list[str]]:
    """Return a valid ranking of 1-based indices plus the repairs applied.

    The result never contains duplicates or out-of-range indices and always
    has length ``min(topk, n)``. Repair tags: ``oob``, ``dup``, ``fill``,
    ``no_parse``; each appears at most once, in the order first needed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    want = min(topk, n)
    values = extract_last_int_array(raw)
    if values is None:
        return list(fallback_order[:want]), ["no_parse"]

    repairs: list[str] = []
    ranking: list[int] = []
    seen: set[int] = set()
    for v in values:
        if not 1 <= v <= n:
            tag = "oob"
        elif v in seen:
            tag = "dup"
        else:
            seen.add(v)
            ranking.append(v)
            continue
        if tag not in repairs:
            repairs.append(tag)
    if len(ranking) < want:
        repairs.append("fill")
        for v in fallback_order:
            if v not in seen:
                seen.add(v)
                ranking.append(v)
                if len(ranking) == want:
                    break
    return ranking[:want], repairs
