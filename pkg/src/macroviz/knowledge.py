"""Retrieval over analytical SQL function documentation.

A small RAG store: function descriptions are tokenized into term-frequency
vectors and ranked against the user's prompt by cosine similarity. The
default backend is deliberately deterministic (no embeddings) so ranking is
stable across runs and platforms; an embedding provider can be plugged in
by swapping the vectorizer.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DuplicateFunctionName

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class FunctionDoc:
    name: str
    signature: str
    description: str
    category: str  # aggregate | window | statistical

    @property
    def text(self) -> str:
        return f"{self.name} {self.signature} {self.description}"


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class FunctionIndex:
    docs: tuple[FunctionDoc, ...]
    vocabulary: tuple[str, ...]
    vectors: tuple[dict[int, int], ...]  # term index -> count, one per doc


def index_docs(docs: Sequence[FunctionDoc]) -> FunctionIndex:
    """Build a deterministic term-frequency index over the doc texts."""
    seen: set[str] = set()
    for doc in docs:
        if doc.name in seen:
            raise DuplicateFunctionName(doc.name)
        seen.add(doc.name)

    vocab: dict[str, int] = {}
    vectors: list[dict[int, int]] = []
    for doc in docs:
        vector: dict[int, int] = {}
        for token in tokenize(doc.text):
            idx = vocab.setdefault(token, len(vocab))
            vector[idx] = vector.get(idx, 0) + 1
        vectors.append(vector)
    return FunctionIndex(
        docs=tuple(docs),
        vocabulary=tuple(vocab),
        vectors=tuple(vectors),
    )


def _cosine(a: dict[int, int], b: dict[int, int]) -> float:
    if not a or not b:
        return 0.0
    dot = sum(count * b.get(idx, 0) for idx, count in a.items())
    if dot == 0:
        return 0.0
    norm_a = math.sqrt(sum(c * c for c in a.values()))
    norm_b = math.sqrt(sum(c * c for c in b.values()))
    return dot / (norm_a * norm_b)


def top_k(index: FunctionIndex, query: str, k: int = 15) -> list[FunctionDoc]:
    """The k most query-similar docs, ties broken by function name."""
    if k < 1:
        raise ValueError("k must be >= 1")
    vocab = {term: i for i, term in enumerate(index.vocabulary)}
    query_vector: dict[int, int] = {}
    for token in tokenize(query):
        idx = vocab.get(token)
        if idx is not None:
            query_vector[idx] = query_vector.get(idx, 0) + 1

    scored = [
        (-_cosine(query_vector, vector), doc.name, doc)
        for doc, vector in zip(index.docs, index.vectors)
    ]
    scored.sort(key=lambda item: (item[0], item[1]))
    return [doc for _, _, doc in scored[:k]]


def load_docs(path: Path) -> list[FunctionDoc]:
    raw = json.loads(path.read_text(encoding="utf-8"))
    return [
        FunctionDoc(
            name=entry["name"],
            signature=entry["signature"],
            description=entry["description"],
            category=entry["category"],
        )
        for entry in raw
    ]


def load_default_docs() -> list[FunctionDoc]:
    return load_docs(Path(__file__).parent / "data" / "functions.json")


def docs_to_prompt_text(docs: Iterable[FunctionDoc]) -> str:
    """Render retrieved docs for injection into the SQL prompt context."""
    docs = list(docs)
    if not docs:
        return ""
    lines = ["These SQL functions are available and may help:"]
    for doc in docs:
        lines.append(f"- {doc.signature}: {doc.description}")
    return "\n".join(lines)
