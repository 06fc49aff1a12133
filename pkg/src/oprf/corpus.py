"""Documents, pseudo-queries, topics, qrels and TREC run files."""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence


class FormatError(ValueError):
    """An input file violates its format; carries the offending line number."""

    def __init__(self, path: str | Path, lineno: int | None, message: str) -> None:
        self.path = str(path)
        self.lineno = lineno
        where = f"{self.path}:{lineno}" if lineno is not None else self.path
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class Document:
    ext_id: str
    ordinal: int
    text: str


@dataclass(frozen=True)
class PseudoQuery:
    pq_id: int
    text: str
    source_docs: frozenset[int]


@dataclass(frozen=True)
class Topic:
    qid: str
    text: str


class Corpus:
    """Ordered document collection with an invertible ext_id <-> ordinal map."""

    def __init__(self, documents: Sequence[Document]) -> None:
        self.documents = tuple(documents)
        self._ordinals: dict[str, int] = {}
        for i, doc in enumerate(self.documents):
            if doc.ordinal != i:
                raise ValueError(f"document {doc.ext_id!r} has ordinal {doc.ordinal}, expected {i}")
            if doc.ext_id in self._ordinals:
                raise ValueError(f"duplicate document id {doc.ext_id!r}")
            self._ordinals[doc.ext_id] = i

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "Corpus":
        return cls([Document(ext_id, i, text) for i, (ext_id, text) in enumerate(pairs)])

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def __contains__(self, ext_id: object) -> bool:
        return ext_id in self._ordinals

    def ordinal(self, ext_id: str) -> int:
        return self._ordinals[ext_id]

    def ext_id(self, ordinal: int) -> str:
        return self.documents[ordinal].ext_id

    @property
    def ext_ids(self) -> list[str]:
        return [d.ext_id for d in self.documents]

    @property
    def texts(self) -> list[str]:
        return [d.text for d in self.documents]


def _lines(path: Path) -> Iterator[tuple[int, str]]:
    with path.open("r", encoding="utf-8", newline="\n") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if line.strip():
                yield lineno, line


def load_corpus(path: str | Path, format: str | None = None) -> Corpus:
    """Load documents from TSV (``id\\ttext``) or JSONL (``{"id", "text"}``).

    Ordinals follow file order. The format is inferred from the suffix when
    not given.
    """
    path = Path(path)
    if format is None:
        format = "jsonl" if path.suffix.lower() in {".jsonl", ".json"} else "tsv"
    if format not in {"tsv", "jsonl"}:
        raise ValueError(f"unsupported corpus format {format!r}")

    docs: list[Document] = []
    seen: dict[str, int] = {}
    for lineno, line in _lines(path):
        if format == "tsv":
            parts = line.split("\t", 1)
            if len(parts) != 2:
                raise FormatError(path, lineno, "expected 'id<TAB>text'")
            ext_id, text = parts
        else:
            try:
                obj = json.loads(line)
                ext_id, text = obj["id"], obj["text"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise FormatError(path, lineno, f"bad JSONL record ({exc})") from None
            ext_id = str(ext_id)
            if not isinstance(text, str):
                raise FormatError(path, lineno, "'text' must be a string")
        ext_id = ext_id.strip()
        if not ext_id:
            raise FormatError(path, lineno, "empty document id")
        if ext_id in seen:
            raise FormatError(
                path, lineno, f"duplicate document id {ext_id!r} (first seen on line {seen[ext_id]})"
            )
        if not text.strip():
            raise FormatError(path, lineno, f"empty text for document {ext_id!r}")
        seen[ext_id] = lineno
        docs.append(Document(ext_id, len(docs), text))
    return Corpus(docs)


def write_corpus(path: str | Path, corpus: Corpus) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as f:
        for doc in corpus:
            f.write(f"{doc.ext_id}\t{doc.text}\n")


_WS = re.compile(r"\s+")


def normalize_query_text(text: str) -> str:
    """NFKC, lowercase and collapse whitespace; the dedup key for pseudo-queries."""
    return _WS.sub(" ", unicodedata.normalize("NFKC", text).lower()).strip()


def read_pseudo_query_lines(path: str | Path) -> list[tuple[int, str, str]]:
    """Raw ``(lineno, doc_ext_id, text)`` records in file order."""
    path = Path(path)
    out = []
    for lineno, line in _lines(path):
        parts = line.split("\t", 1)
        if len(parts) != 2:
            raise FormatError(path, lineno, "expected 'doc_id<TAB>pseudo-query'")
        out.append((lineno, parts[0].strip(), parts[1]))
    return out


def dedupe_pseudo_queries(
    records: Iterable[tuple[str, str]], corpus: Corpus, *, path: str | Path = "<memory>"
) -> list[PseudoQuery]:
    """Merge ``(doc_ext_id, text)`` records on normalized text.

    pq_ids are dense in first-occurrence order. Records whose text normalizes
    to nothing are dropped.
    """
    index: dict[str, int] = {}
    texts: list[str] = []
    sources: list[set[int]] = []
    for lineno, (doc_id, text) in enumerate(records, start=1):
        if doc_id not in corpus:
            raise FormatError(path, lineno, f"unknown document id {doc_id!r}")
        key = normalize_query_text(text)
        if not key:
            continue
        pq = index.get(key)
        if pq is None:
            pq = index[key] = len(texts)
            texts.append(key)
            sources.append(set())
        sources[pq].add(corpus.ordinal(doc_id))
    return [PseudoQuery(i, t, frozenset(s)) for i, (t, s) in enumerate(zip(texts, sources))]


def load_pseudo_queries(path: str | Path, corpus: Corpus) -> list[PseudoQuery]:
    path = Path(path)
    records = read_pseudo_query_lines(path)
    for lineno, doc_id, _ in records:
        if doc_id not in corpus:
            raise FormatError(path, lineno, f"unknown document id {doc_id!r}")
    return dedupe_pseudo_queries(((d, t) for _, d, t in records), corpus, path=path)


def write_pseudo_queries(path: str | Path, records: Iterable[tuple[str, str]]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as f:
        for doc_id, text in records:
            f.write(f"{doc_id}\t{text}\n")


def load_topics(path: str | Path) -> list[Topic]:
    path = Path(path)
    topics: list[Topic] = []
    seen: set[str] = set()
    for lineno, line in _lines(path):
        parts = line.split("\t", 1)
        if len(parts) != 2:
            raise FormatError(path, lineno, "expected 'qid<TAB>text'")
        qid = parts[0].strip()
        if qid in seen:
            raise FormatError(path, lineno, f"duplicate topic id {qid!r}")
        seen.add(qid)
        topics.append(Topic(qid, parts[1]))
    return topics


def write_topics(path: str | Path, topics: Iterable[Topic]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as f:
        for t in topics:
            f.write(f"{t.qid}\t{t.text}\n")


@dataclass
class Qrels:
    entries: dict[tuple[str, str], int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._by_qid: dict[str, dict[str, int]] = {}
        for (qid, doc), grade in self.entries.items():
            self._by_qid.setdefault(qid, {})[doc] = grade

    @property
    def qids(self) -> list[str]:
        return list(self._by_qid)

    def judgments(self, qid: str) -> dict[str, int]:
        return self._by_qid.get(qid, {})

    @property
    def max_grade(self) -> int:
        return max(self.entries.values(), default=0)


def load_qrels(path: str | Path) -> Qrels:
    path = Path(path)
    entries: dict[tuple[str, str], int] = {}
    for lineno, line in _lines(path):
        parts = line.split()
        if len(parts) != 4:
            raise FormatError(path, lineno, "expected 'qid 0 doc_id grade'")
        qid, _, doc, grade = parts
        try:
            g = int(grade)
        except ValueError:
            raise FormatError(path, lineno, f"non-integer grade {grade!r}") from None
        if g < 0:
            raise FormatError(path, lineno, f"negative grade {g}")
        if (qid, doc) in entries:
            raise FormatError(path, lineno, f"duplicate judgment ({qid}, {doc})")
        entries[(qid, doc)] = g
    return Qrels(entries)


def write_qrels(path: str | Path, qrels: Qrels) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as f:
        for (qid, doc), g in qrels.entries.items():
            f.write(f"{qid} 0 {doc} {g}\n")


@dataclass(frozen=True)
class RunEntry:
    ext_id: str
    rank: int
    score: float


@dataclass
class RunFile:
    """Ranked results per query. Query order is insertion order."""

    results: dict[str, list[RunEntry]] = field(default_factory=dict)
    tag: str = "oprf"

    @classmethod
    def from_scored(cls, scored: Mapping[str, Iterable[tuple[str, float]]], tag: str = "oprf") -> "RunFile":
        """Rank ``(ext_id, score)`` pairs by score desc, ext_id asc."""
        results = {}
        for qid, pairs in scored.items():
            ranked = sorted(pairs, key=lambda p: (-p[1], p[0]))
            results[qid] = [RunEntry(d, r, float(s)) for r, (d, s) in enumerate(ranked, start=1)]
        return cls(results, tag)

    def ranking(self, qid: str) -> list[str]:
        return [e.ext_id for e in self.results.get(qid, [])]

    def validate(self) -> None:
        for qid, entries in self.results.items():
            seen: set[str] = set()
            for i, e in enumerate(entries):
                if e.rank != i + 1:
                    raise ValueError(f"query {qid}: rank {e.rank} at position {i + 1}")
                if e.ext_id in seen:
                    raise ValueError(f"query {qid}: duplicate document {e.ext_id!r}")
                seen.add(e.ext_id)
                if i and e.score > entries[i - 1].score:
                    raise ValueError(f"query {qid}: score increases at rank {e.rank}")


def write_run(path: str | Path, run: RunFile) -> None:
    """Write TREC 6-column lines; ties in score are re-ordered by ext_id."""
    if not run.tag or any(c.isspace() for c in run.tag):
        raise ValueError(f"invalid run tag {run.tag!r}")
    with Path(path).open("w", encoding="utf-8", newline="\n") as f:
        for qid, entries in run.results.items():
            ordered = sorted(entries, key=lambda e: (-e.score, e.ext_id))
            if len({e.ext_id for e in ordered}) != len(ordered):
                raise ValueError(f"query {qid}: duplicate document in run")
            for rank, e in enumerate(ordered, start=1):
                f.write(f"{qid} Q0 {e.ext_id} {rank} {e.score:.6f} {run.tag}\n")


def read_run(path: str | Path) -> RunFile:
    path = Path(path)
    results: dict[str, list[RunEntry]] = {}
    tag = None
    for lineno, line in _lines(path):
        parts = line.split()
        if len(parts) != 6:
            raise FormatError(path, lineno, f"expected 6 fields, got {len(parts)}")
        qid, _, doc, rank, score, line_tag = parts
        try:
            entry = RunEntry(doc, int(rank), float(score))
        except ValueError:
            raise FormatError(path, lineno, "bad rank or score") from None
        entries = results.setdefault(qid, [])
        if entry.rank != len(entries) + 1:
            raise FormatError(path, lineno, f"rank {entry.rank} out of sequence for query {qid}")
        entries.append(entry)
        tag = tag or line_tag
    return RunFile(results, tag or "oprf")
