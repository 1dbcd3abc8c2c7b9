"""Loaders for BEIR-style corpora, queries, reformulations and qrels."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

logger = logging.getLogger(__name__)


class DataFormatError(ValueError):
    """Raised when an input file violates its expected format."""

    def __init__(self, path, lineno: int | None, message: str):
        self.path = str(path)
        self.lineno = lineno
        where = f"{self.path}:{lineno}" if lineno is not None else self.path
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    title: str | None = None

    @property
    def full_text(self) -> str:
        """Text used for indexing and prompting (title, newline, body)."""
        if self.title:
            return f"{self.title}\n{self.text}"
        return self.text

    def to_json(self) -> dict:
        out = {"_id": self.doc_id, "text": self.text}
        if self.title is not None:
            out["title"] = self.title
        return out


@dataclass(frozen=True)
class Query:
    query_id: str
    text: str
    reformulated: str | None = None

    def __post_init__(self):
        if self.reformulated is not None and not self.reformulated:
            raise ValueError(f"query {self.query_id}: reformulation must be non-empty")

    def search_text(self, use_reformulated: bool = True) -> str:
        if use_reformulated and self.reformulated is not None:
            return self.reformulated
        return self.text


class CorpusStore:
    """Immutable, ordered document collection with id lookup."""

    def __init__(self, documents: Iterable[Document] = ()):
        docs = []
        lookup: dict[str, int] = {}
        for doc in documents:
            if not doc.doc_id:
                raise ValueError("document id must be non-empty")
            if doc.doc_id in lookup:
                raise ValueError(f"duplicate document id {doc.doc_id!r}")
            lookup[doc.doc_id] = len(docs)
            docs.append(doc)
        self._docs = tuple(docs)
        self._lookup = lookup

    def __len__(self) -> int:
        return len(self._docs)

    def __iter__(self) -> Iterator[Document]:
        return iter(self._docs)

    def __getitem__(self, position: int) -> Document:
        return self._docs[position]

    def __contains__(self, doc_id: object) -> bool:
        return doc_id in self._lookup

    @property
    def documents(self) -> tuple[Document, ...]:
        return self._docs

    def position(self, doc_id: str) -> int:
        return self._lookup[doc_id]

    def get(self, doc_id: str) -> Document:
        return self._docs[self._lookup[doc_id]]

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(d.to_json(), ensure_ascii=False) + "\n" for d in self._docs
        )


class Qrels:
    """Graded relevance judgments; unjudged pairs have grade 0."""

    def __init__(self, judgments: Mapping[str, Mapping[str, int]] | None = None):
        self._data: dict[str, dict[str, int]] = {}
        for qid, docs in (judgments or {}).items():
            for did, grade in docs.items():
                self.set(qid, did, grade)

    def set(self, query_id: str, doc_id: str, grade: int) -> None:
        if not isinstance(grade, int) or grade < 0:
            raise ValueError(f"grade must be a non-negative integer, got {grade!r}")
        self._data.setdefault(query_id, {})[doc_id] = grade

    def grade(self, query_id: str, doc_id: str) -> int:
        return self._data.get(query_id, {}).get(doc_id, 0)

    def judged(self, query_id: str) -> dict[str, int]:
        return dict(self._data.get(query_id, {}))

    def query_ids(self) -> list[str]:
        return list(self._data)

    def __contains__(self, query_id: object) -> bool:
        return query_id in self._data

    def __len__(self) -> int:
        return len(self._data)


def _open_lines(path) -> Iterator[tuple[int, str]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if line.strip():
                yield lineno, line


def _json_line(path, lineno: int, line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DataFormatError(path, lineno, f"malformed JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise DataFormatError(path, lineno, "expected a JSON object")
    return obj


def _string_field(path, lineno: int, obj: dict, key: str, required: bool = True):
    value = obj.get(key)
    if value is None:
        if required:
            raise DataFormatError(path, lineno, f"missing field {key!r}")
        return None
    if isinstance(value, (int, float)) and not isinstance(value, bool) and key == "_id":
        value = str(value)
    if not isinstance(value, str):
        raise DataFormatError(path, lineno, f"field {key!r} must be a string")
    return value


def load_corpus(path, format: str = "jsonl") -> CorpusStore:
    if format != "jsonl":
        raise ValueError(f"unsupported corpus format {format!r}")
    docs: list[Document] = []
    seen: set[str] = set()
    for lineno, line in _open_lines(path):
        obj = _json_line(path, lineno, line)
        doc_id = _string_field(path, lineno, obj, "_id")
        if not doc_id:
            raise DataFormatError(path, lineno, "empty '_id'")
        if doc_id in seen:
            raise DataFormatError(path, lineno, f"duplicate document id {doc_id!r}")
        seen.add(doc_id)
        text = _string_field(path, lineno, obj, "text")
        title = _string_field(path, lineno, obj, "title", required=False)
        docs.append(Document(doc_id=doc_id, text=text, title=title))
    return CorpusStore(docs)


def _sniff_query_format(path) -> str:
    return "jsonl" if str(path).endswith((".jsonl", ".json")) else "tsv"


def load_queries(path, format: str | None = None) -> list[Query]:
    format = format or _sniff_query_format(path)
    queries: list[Query] = []
    seen: set[str] = set()
    for lineno, line in _open_lines(path):
        if format == "jsonl":
            obj = _json_line(path, lineno, line)
            qid = _string_field(path, lineno, obj, "_id")
            text = _string_field(path, lineno, obj, "text")
        elif format == "tsv":
            cols = line.split("\t")
            if len(cols) != 2:
                raise DataFormatError(
                    path, lineno, f"expected 2 tab-separated columns, got {len(cols)}"
                )
            qid, text = cols
        else:
            raise ValueError(f"unsupported query format {format!r}")
        if not qid:
            raise DataFormatError(path, lineno, "empty query id")
        if qid in seen:
            raise DataFormatError(path, lineno, f"duplicate query id {qid!r}")
        seen.add(qid)
        queries.append(Query(query_id=qid, text=text))
    return queries


def attach_reformulations(queries: Sequence[Query], path) -> list[Query]:
    """Set ``reformulated`` on every query listed in a two-column TSV."""
    known = {q.query_id for q in queries}
    found: dict[str, str] = {}
    for lineno, line in _open_lines(path):
        cols = line.split("\t")
        if len(cols) != 2:
            raise DataFormatError(
                path, lineno, f"expected 2 tab-separated columns, got {len(cols)}"
            )
        qid, text = cols
        if qid not in known:
            raise DataFormatError(path, lineno, f"unknown query id {qid!r}")
        if not text.strip():
            raise DataFormatError(path, lineno, f"empty reformulation for {qid!r}")
        found[qid] = text
    return [
        replace(q, reformulated=found[q.query_id]) if q.query_id in found else q
        for q in queries
    ]


def load_qrels(path, format: str | None = None) -> Qrels:
    """Read TREC 4-column (``qid 0 docid grade``) or 3-column TSV qrels.

    The format is detected from the first line when not given.
    """
    qrels = Qrels()
    for lineno, line in _open_lines(path):
        if format is None:
            format = "tsv3col" if len(line.split("\t")) == 3 else "trec4col"
        if format == "trec4col":
            cols = line.split()
            if len(cols) != 4:
                raise DataFormatError(path, lineno, f"expected 4 columns, got {len(cols)}")
            qid, _, did, raw = cols
        elif format == "tsv3col":
            cols = line.split("\t")
            if len(cols) != 3:
                raise DataFormatError(path, lineno, f"expected 3 columns, got {len(cols)}")
            qid, did, raw = (c.strip() for c in cols)
            # BEIR qrels TSVs carry a header row
            if lineno == 1 and raw.lower() == "score":
                continue
        else:
            raise ValueError(f"unsupported qrels format {format!r}")
        try:
            grade = int(raw)
        except ValueError:
            raise DataFormatError(path, lineno, f"grade {raw!r} is not an integer") from None
        if grade < 0:
            raise DataFormatError(path, lineno, f"negative grade {grade}")
        if did in qrels._data.get(qid, {}):
            logger.warning("%s:%d: duplicate judgment for (%s, %s) overwrites earlier one",
                           path, lineno, qid, did)
        qrels.set(qid, did, grade)
    return qrels


def write_corpus(store: CorpusStore, path) -> None:
    Path(path).write_text(store.to_jsonl(), encoding="utf-8")
