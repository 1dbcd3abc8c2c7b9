"""NDCG@k evaluation, TREC run files and ablation tables."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .corpus import DataFormatError, Qrels

logger = logging.getLogger(__name__)

Run = dict  # query_id -> list[(doc_id, score)], best first

MISSING = "—"


def _gain(grade: int, gain: str) -> float:
    if gain == "linear":
        return float(grade)
    if gain == "exponential":
        return float(2**grade - 1)
    raise ValueError(f"unknown gain {gain!r}")


def ndcg_at_k(
    ranking: Sequence[str],
    qrels: Qrels,
    query_id: str,
    k: int,
    gain: str = "linear",
) -> float:
    """trec_eval-style NDCG@k; the ideal list uses every judged document."""
    if k < 1:
        raise ValueError("k must be >= 1")
    judged = qrels.judged(query_id)
    ideal = sorted((g for g in judged.values() if g > 0), reverse=True)[:k]
    if not ideal:
        return 0.0
    idcg = sum(_gain(g, gain) / math.log2(i + 1) for i, g in enumerate(ideal, 1))
    dcg = 0.0
    seen: set[str] = set()
    pos = 0
    for doc_id in ranking:
        if doc_id in seen:
            continue
        seen.add(doc_id)
        pos += 1
        if pos > k:
            break
        grade = judged.get(doc_id, 0)
        if grade:
            dcg += _gain(grade, gain) / math.log2(pos + 1)
    return dcg / idcg


@dataclass
class EvalReport:
    per_query: dict[str, float]
    mean: float
    k: int
    run_tag: str = ""
    missing: list[str] = field(default_factory=list)


def evaluate_run(run: Mapping, qrels: Qrels, k: int = 10, run_tag: str = "",
                 gain: str = "linear") -> EvalReport:
    """Per-query NDCG@k over every query in ``qrels``; absent queries score 0."""
    per_query: dict[str, float] = {}
    missing: list[str] = []
    for qid in qrels.query_ids():
        entries = run.get(qid)
        if not entries:
            missing.append(qid)
            per_query[qid] = 0.0
            continue
        per_query[qid] = ndcg_at_k([d for d, _ in entries], qrels, qid, k, gain)
    if missing:
        logger.warning("%d judged queries have no run entries (scored 0): %s",
                       len(missing), " ".join(missing))
    mean = math.fsum(per_query.values()) / len(per_query) if per_query else 0.0
    return EvalReport(per_query, mean, k, run_tag, missing)


# -- run files ----------------------------------------------------------------

def format_run(run: Mapping, tag: str, header: Iterable[str] = ()) -> str:
    lines = [f"# {h}" for h in header]
    for qid, entries in run.items():
        for rank, (doc_id, score) in enumerate(entries, 1):
            lines.append(f"{qid} Q0 {doc_id} {rank} {score:.6f} {tag}")
    return "".join(line + "\n" for line in lines)


def write_run(run: Mapping, path, tag: str, header: Iterable[str] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_run(run, tag, header))


def read_run(path) -> Run:
    """Read a 6-column TREC run; ``#`` lines are comments.

    Entries are re-sorted by (score desc, doc_id asc); a warning is logged
    when the file's rank column disagreed with that order.
    """
    raw: dict[str, list[tuple[int, str, float]]] = {}
    seen: set[tuple[str, str]] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split()
            if len(cols) != 6:
                raise DataFormatError(path, lineno, f"expected 6 columns, got {len(cols)}")
            qid, _, doc_id, rank, score, _tag = cols
            try:
                rank_i, score_f = int(rank), float(score)
            except ValueError:
                raise DataFormatError(path, lineno, "rank/score not numeric") from None
            if not math.isfinite(score_f):
                raise DataFormatError(path, lineno, f"non-finite score {score}")
            if (qid, doc_id) in seen:
                raise DataFormatError(path, lineno, f"duplicate document {doc_id!r} for query {qid!r}")
            seen.add((qid, doc_id))
            raw.setdefault(qid, []).append((rank_i, doc_id, score_f))
    run: Run = {}
    for qid, rows in raw.items():
        by_score = sorted(rows, key=lambda r: (-r[2], r[1]))
        by_rank = sorted(rows, key=lambda r: r[0])
        if [r[1] for r in by_rank] != [r[1] for r in by_score]:
            logger.warning("%s: query %s rank column disagrees with score order; "
                           "using score order", path, qid)
        run[qid] = [(doc_id, score) for _, doc_id, score in by_score]
    return run


# -- ablation tables ----------------------------------------------------------

@dataclass
class AblationCell:
    split: str
    setting: str
    report: EvalReport | None  # None marks a failed setting


@dataclass
class AblationTable:
    settings: list[str]
    splits: list[str]
    values: dict[tuple[str, str], float | None]

    def row(self, setting: str) -> list[float | None]:
        vals = [self.values.get((setting, s)) for s in self.splits]
        avg = None if any(v is None for v in vals) else math.fsum(vals) / len(vals)
        return vals + [avg]

    def to_tsv(self, header: Iterable[str] = ()) -> str:
        lines = [f"# {h}" for h in header]
        lines.append("\t".join(["setting", *self.splits, "Avg"]))
        for s in self.settings:
            lines.append("\t".join([s, *(_fmt(v) for v in self.row(s))]))
        return "".join(line + "\n" for line in lines)

    def to_text(self) -> str:
        rows = [["Setting", *self.splits, "Avg"]]
        rows += [[s, *(_fmt(v) for v in self.row(s))] for s in self.settings]
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        out = []
        for r in rows:
            cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
            out.append("  ".join(cells).rstrip())
        return "\n".join(out) + "\n"


def _fmt(value: float | None) -> str:
    if value is None:
        return MISSING
    text = f"{value:.3f}"
    return text[1:] if text.startswith("0.") else text


def ablation_table(cells: Sequence[AblationCell]) -> AblationTable:
    """Rows are settings, columns are splits plus their unweighted mean."""
    ks = {c.report.k for c in cells if c.report is not None}
    if len(ks) > 1:
        raise ValueError(f"reports mix different cutoffs: k in {sorted(ks)}")
    settings: list[str] = []
    splits: list[str] = []
    values: dict[tuple[str, str], float | None] = {}
    for c in cells:
        if c.setting not in settings:
            settings.append(c.setting)
        if c.split not in splits:
            splits.append(c.split)
        values[(c.setting, c.split)] = None if c.report is None else c.report.mean
    return AblationTable(settings, splits, values)
