"""Candidate ordering: first-stage order, or a seeded joint shuffle."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence, TypeVar

T = TypeVar("T")

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 (Steele, Lea & Flood 2014); state is the raw 64-bit seed."""

    def __init__(self, seed: int):
        if not 0 <= seed <= _MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.state = seed

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection sampling."""
        limit = ((1 << 64) // n) * n
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n


def shuffled(items: Sequence[T], seed: int) -> list[T]:
    """Fisher-Yates shuffle driven by SplitMix64(seed)."""
    out = list(items)
    rng = SplitMix64(seed)
    for i in range(len(out) - 1, 0, -1):
        j = rng.below(i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def query_seed(seed: int, query_id: str) -> int:
    """Per-query seed: ``seed`` XOR a stable 64-bit hash of the query id."""
    h = hashlib.blake2b(query_id.encode("utf-8"), digest_size=8).digest()
    return seed ^ int.from_bytes(h, "big")


@dataclass(frozen=True)
class OrderMode:
    kind: str = "bm25_desc"
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in ("bm25_desc", "shuffle"):
            raise ValueError(f"unknown order mode {self.kind!r}")
        if self.kind == "shuffle":
            if self.seed is None:
                raise ValueError("shuffle order requires a seed")
            if not 0 <= self.seed <= _MASK64:
                raise ValueError("seed must be an unsigned 64-bit integer")

    @classmethod
    def bm25_desc(cls) -> "OrderMode":
        return cls("bm25_desc")

    @classmethod
    def shuffle(cls, seed: int) -> "OrderMode":
        return cls("shuffle", seed)

    @property
    def label(self) -> str:
        return self.kind if self.kind == "bm25_desc" else f"shuffle-{self.seed}"

    def for_query(self, query_id: str) -> "OrderMode":
        if self.kind == "bm25_desc":
            return self
        return OrderMode("shuffle", query_seed(self.seed, query_id))


def order_candidates(candidates: Sequence[T], mode: OrderMode) -> list[T]:
    """Return candidates in prompt order; shuffling moves whole tuples."""
    if mode.kind == "bm25_desc":
        return list(candidates)
    return shuffled(candidates, mode.seed)
