"""BM25 retrieval over a local JSONL corpus.

Scoring uses the standard Okapi form with the +1 idf smoothing:

    idf(t)  = ln((N - df + 0.5) / (df + 0.5) + 1)
    s(q, d) = sum over unique query terms of
              idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))

Documents scoring zero are omitted; ties break by ascending doc id.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .errors import ConfigError, IngestError
from .types import RetrievedDoc

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

#: Snapshot schema version written by save() and required by load().
FORMAT_VERSION = 1


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric runs; underscores and punctuation separate."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Doc:
    doc_id: str
    text: str
    title: str = ""


class Retriever(Protocol):
    def search(self, query: str, k: int) -> list[RetrievedDoc]: ...


def load_corpus(path: str | Path) -> list[Doc]:
    """Read a JSONL corpus; each line needs "id" and "text", "title" optional."""
    docs = []
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IngestError(f"cannot read corpus {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except ValueError as exc:
            raise IngestError(f"corpus {path} line {lineno}: invalid JSON ({exc})") from exc
        if not isinstance(record, dict) or "id" not in record or "text" not in record:
            raise IngestError(f"corpus {path} line {lineno}: need 'id' and 'text' fields")
        docs.append(
            Doc(
                doc_id=str(record["id"]),
                text=str(record["text"]),
                title=str(record.get("title", "")),
            )
        )
    return docs


class BM25Index:
    """Inverted index with precomputed document lengths.

    Build once with :meth:`build`, or persist with :meth:`save` and reopen
    with :meth:`load`; searches from a reopened snapshot score identically.
    """

    def __init__(
        self,
        docs: list[Doc],
        postings: dict[str, list[tuple[int, int]]],
        doc_lengths: list[int],
        avgdl: float,
        k1: float,
        b: float,
    ):
        self.docs = docs
        self.postings = postings
        self.doc_lengths = doc_lengths
        self.avgdl = avgdl
        self.k1 = k1
        self.b = b

    @classmethod
    def build(cls, docs: Iterable[Doc], k1: float = 1.2, b: float = 0.75) -> "BM25Index":
        doc_list = list(docs)
        if not doc_list:
            raise IngestError("cannot build an index over zero documents")
        if k1 < 0 or not 0 <= b <= 1:
            raise ConfigError(f"bad BM25 parameters: k1={k1}, b={b}")
        seen: set[str] = set()
        postings: dict[str, list[tuple[int, int]]] = {}
        doc_lengths: list[int] = []
        for idx, doc in enumerate(doc_list):
            if doc.doc_id in seen:
                raise IngestError(f"duplicate document id {doc.doc_id!r}")
            seen.add(doc.doc_id)
            tokens = tokenize(doc.text)
            if not tokens:
                raise IngestError(f"document {doc.doc_id!r} has no indexable tokens")
            doc_lengths.append(len(tokens))
            for term, tf in Counter(tokens).items():
                postings.setdefault(term, []).append((idx, tf))
        avgdl = sum(doc_lengths) / len(doc_lengths)
        return cls(doc_list, postings, doc_lengths, avgdl, k1, b)

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        n = len(self.docs)
        return math.log((n - df + 0.5) / (df + 0.5) + 1)

    def search(self, query: str, k: int) -> list[RetrievedDoc]:
        if k < 1:
            raise ConfigError(f"k must be >= 1, got {k}")
        terms = list(dict.fromkeys(tokenize(query)))
        scores: dict[int, float] = {}
        for term in terms:
            posting = self.postings.get(term)
            if not posting:
                continue
            idf = self.idf(term)
            for idx, tf in posting:
                norm = 1 - self.b + self.b * self.doc_lengths[idx] / self.avgdl
                scores[idx] = scores.get(idx, 0.0) + idf * tf * (self.k1 + 1) / (
                    tf + self.k1 * norm
                )
        ranked = sorted(
            (idx for idx, score in scores.items() if score > 0),
            key=lambda idx: (-scores[idx], self.docs[idx].doc_id),
        )[:k]
        return [
            RetrievedDoc(
                doc_id=self.docs[idx].doc_id,
                text=self.docs[idx].text,
                score=scores[idx],
                rank=rank,
                query=query,
            )
            for rank, idx in enumerate(ranked, start=1)
        ]

    def save(self, path: str | Path) -> None:
        snapshot = {
            "format_version": FORMAT_VERSION,
            "k1": self.k1,
            "b": self.b,
            "avgdl": self.avgdl,
            "doc_lengths": self.doc_lengths,
            "docs": [
                {"id": d.doc_id, "title": d.title, "text": d.text} for d in self.docs
            ],
            "postings": {
                term: [[idx, tf] for idx, tf in posting]
                for term, posting in self.postings.items()
            },
        }
        Path(path).write_text(json.dumps(snapshot), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "BM25Index":
        try:
            snapshot = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise IngestError(f"cannot load index {path}: {exc}") from exc
        if snapshot.get("format_version") != FORMAT_VERSION:
            raise IngestError(
                f"index {path} has format_version {snapshot.get('format_version')!r}; "
                f"expected {FORMAT_VERSION}"
            )
        docs = [
            Doc(doc_id=d["id"], text=d["text"], title=d.get("title", ""))
            for d in snapshot["docs"]
        ]
        postings = {
            term: [(int(idx), int(tf)) for idx, tf in posting]
            for term, posting in snapshot["postings"].items()
        }
        return cls(
            docs=docs,
            postings=postings,
            doc_lengths=[int(n) for n in snapshot["doc_lengths"]],
            avgdl=float(snapshot["avgdl"]),
            k1=float(snapshot["k1"]),
            b=float(snapshot["b"]),
        )


def build_index_from_corpus(
    corpus_path: str | Path, k1: float = 1.2, b: float = 0.75
) -> BM25Index:
    return BM25Index.build(load_corpus(corpus_path), k1=k1, b=b)
