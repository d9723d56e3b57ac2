"""Lexical knowledge-base retrieval for the augmented prompting condition.

Change records become small text documents; a BM25 index over them answers
task queries; the retrieved documents get summarized into a bounded block
of prompt context. Everything is deterministic: scores are pure arithmetic
over token statistics, ties break on document id.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .clients import ModelClient
from .errors import EmptyDataset, GenerationExhausted, IndexConflict, InputError
from .model import ChangeRecord, TaskSpec, Condition

BM25_K1 = 1.2
BM25_B = 0.75
DEFAULT_K = 3
DEFAULT_TOKEN_BUDGET = 2000

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercased word and path-segment tokens.

    Splitting on every non-alphanumeric character means `alpha::frob_runs`
    yields the same tokens as "alpha frob runs", so path mentions and prose
    mentions meet in the same term space.
    """
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True, slots=True)
class KbDoc:
    doc_id: str
    change_id: str
    text: str


def doc_from_change(change: ChangeRecord) -> KbDoc:
    """Render one change record as a retrievable document.

    The first line is a fixed-format header (path, kind, version window)
    that downstream consumers can parse back out of prompt context.
    """
    api = change.api
    from_text = str(change.from_version) if change.from_version else "?"
    lines = [
        f"{api.crate_name}::{api.canonical_path} "
        f"[{change.kind.value}] {from_text}->{change.to_version}"
    ]
    if change.new_signature is not None:
        lines.append(f"signature: {change.new_signature.raw_text}")
    if change.old_signature is not None:
        lines.append(f"old signature: {change.old_signature.raw_text}")
    if change.new_doc:
        lines.append(change.new_doc)
    if change.old_doc:
        lines.append(f"previously: {change.old_doc}")
    if change.changelog_note:
        lines.append(f"note: {change.changelog_note}")
    if change.replacement is not None:
        lines.append(
            f"replacement: {change.replacement.crate_name}::"
            f"{change.replacement.canonical_path}"
        )
    return KbDoc(f"kb-{change.change_id}", change.change_id, "\n".join(lines))


class Bm25Index:
    """Immutable token-statistics index over a document set."""

    def __init__(self, docs: Sequence[KbDoc]) -> None:
        seen: set[str] = set()
        for doc in docs:
            if doc.change_id in seen:
                raise IndexConflict(f"duplicate change_id {doc.change_id} in index")
            seen.add(doc.change_id)
        self.docs = tuple(docs)
        self._tokens = {doc.doc_id: tokenize(doc.text) for doc in self.docs}
        self._df: dict[str, int] = {}
        for tokens in self._tokens.values():
            for term in set(tokens):
                self._df[term] = self._df.get(term, 0) + 1
        lengths = [len(t) for t in self._tokens.values()]
        self._avgdl = sum(lengths) / len(lengths) if lengths else 0.0

    def __len__(self) -> int:
        return len(self.docs)

    def by_change_id(self, change_id: str) -> KbDoc | None:
        for doc in self.docs:
            if doc.change_id == change_id:
                return doc
        return None

    def _idf(self, term: str) -> float:
        df = self._df.get(term, 0)
        return math.log(1 + (len(self.docs) - df + 0.5) / (df + 0.5))

    def score(self, query: str, doc: KbDoc) -> float:
        tokens = self._tokens[doc.doc_id]
        dl = len(tokens)
        total = 0.0
        for term in tokenize(query):
            tf = tokens.count(term)
            if tf == 0:
                continue
            norm = BM25_K1 * (1 - BM25_B + BM25_B * dl / self._avgdl)
            total += self._idf(term) * (tf * (BM25_K1 + 1)) / (tf + norm)
        return total

    def retrieve(self, query: str, k: int = DEFAULT_K) -> list[tuple[KbDoc, float]]:
        """Top-k documents, score descending, ties broken by doc_id."""
        if k < 1:
            raise InputError(f"k must be >= 1, got {k}")
        scored = [(doc, self.score(query, doc)) for doc in self.docs]
        scored.sort(key=lambda pair: (-pair[1], pair[0].doc_id))
        return scored[:k]


def build_index(docs: Iterable[KbDoc]) -> Bm25Index:
    return Bm25Index(tuple(docs))


def index_from_changes(changes: Iterable[ChangeRecord]) -> Bm25Index:
    return build_index(doc_from_change(c) for c in changes)


def save_index(index: Bm25Index, path: Path | str) -> None:
    payload = {
        "format": "kb-index-v1",
        "k1": BM25_K1,
        "b": BM25_B,
        "df": index._df,
        "avgdl": index._avgdl,
        "docs": [
            {"doc_id": d.doc_id, "change_id": d.change_id, "text": d.text}
            for d in index.docs
        ],
    }
    Path(path).write_text(
        json.dumps(payload, separators=(",", ":"), sort_keys=True, ensure_ascii=False)
        + "\n",
        encoding="utf-8",
    )


def load_index(path: Path | str) -> Bm25Index:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != "kb-index-v1":
        raise InputError(f"not a knowledge-base index file: {path}")
    return build_index(
        KbDoc(d["doc_id"], d["change_id"], d["text"]) for d in payload["docs"]
    )


def summarize(
    docs: Sequence[KbDoc],
    client: ModelClient,
    *,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
    retries: int = 3,
) -> str:
    """Condense retrieved documents into bounded prompt context."""
    if not docs:
        raise EmptyDataset("nothing to summarize")
    prompt = "task stage: summarize\ndocuments:\n" + "\n\n".join(d.text for d in docs)
    for _ in range(retries):
        out = client.generate(prompt, 0.0, token_budget).strip()
        if out:
            words = out.split(" ")
            if len(words) > token_budget:
                out = " ".join(words[:token_budget]) + " ..."
            return out
    raise GenerationExhausted("summarizer returned nothing")


def build_condition_prompt(
    task: TaskSpec,
    condition: Condition,
    *,
    index: Bm25Index | None = None,
    client: ModelClient | None = None,
    k: int = DEFAULT_K,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> str:
    """Candidate-generation prompt for one task under one condition.

    no_info is the bare query; rag adds a summary of retrieved documents;
    oracle_info adds the exact document of the task's own change.
    """
    base = f"task stage: candidate\nquery: {task.query}\n"
    if condition is Condition.NO_INFO:
        return base
    if index is None:
        raise InputError(f"condition {condition.value} needs a knowledge index")
    if condition is Condition.RAG:
        if client is None:
            raise InputError("rag condition needs a summarizer client")
        hits = index.retrieve(task.query, k)
        summary = summarize([doc for doc, _ in hits], client, token_budget=token_budget)
        return base + "knowledge:\n" + summary + "\n"
    doc = index.by_change_id(task.change_id)
    if doc is None:
        raise InputError(f"no knowledge document for change {task.change_id}")
    return base + "knowledge:\n" + doc.text + "\n"
