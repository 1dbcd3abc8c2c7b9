from __future__ import annotations

import math
from enum import Enum
from typing import Sequence


class ScoreMode(str, Enum):
    NONE = "none"
    RAW = "raw"
    NORM01 = "norm01"
    NORM0100 = "norm0100"

    def __str__(self) -> str:
        return self.value


DEFAULT_DECIMALS = {ScoreMode.RAW: 2, ScoreMode.NORM01: 3, ScoreMode.NORM0100: 1}


def normalize_scores(scores: Sequence[float], mode: ScoreMode | str) -> list[float]:
    """Numeric values shown to the model, before formatting.

    Normalization is min-max over the given list; if every score is equal
    the normalized value is 1.0 (100.0 on the 0-100 scale).
    """
    mode = ScoreMode(mode)
    values = [float(s) for s in scores]
    for s in values:
        if not math.isfinite(s):
            raise ValueError(f"scores must be finite, got {s}")
    if mode is ScoreMode.NONE:
        return []
    if mode is ScoreMode.RAW:
        return values
    lo, hi = min(values), max(values)
    if hi == lo:
        unit = [1.0] * len(values)
    else:
        span = hi - lo
        unit = [(s - lo) / span for s in values]
    if mode is ScoreMode.NORM0100:
        return [100.0 * u for u in unit]
    return unit


def display_scores(
    scores: Sequence[float],
    mode: ScoreMode | str,
    decimals: int | None = None,
) -> list[str] | None:
    """Formatted per-document scores, or None when scores are not shown."""
    mode = ScoreMode(mode)
    if mode is ScoreMode.NONE:
        return None
    if not scores:
        raise ValueError("cannot display an empty score list")
    places = DEFAULT_DECIMALS[mode] if decimals is None else decimals
    return [f"{v:.{places}f}" for v in normalize_scores(scores, mode)]
