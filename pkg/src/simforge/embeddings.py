"""Token and document vectors without any training step.

Provides a text-format embedding table, a deterministic hashed fallback
for tests and plumbing, TF-IDF weights, and document vector pooling.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "EmbeddingTable",
    "TfIdfWeights",
    "load_embeddings",
    "save_embeddings",
    "hashed_embeddings",
    "tfidf_index",
    "doc_vector",
]


def _hashed_vector(token: str, seed: int, dim: int) -> np.ndarray:
    """Unit vector derived only from (token, seed, dim), stable across runs."""
    digest = hashlib.blake2b(
        token.encode("utf-8"), key=f"{seed}:{dim}".encode("utf-8"), digest_size=16
    ).digest()
    rng = random.Random(int.from_bytes(digest, "big"))
    while True:
        vec = np.array([rng.uniform(-1.0, 1.0) for _ in range(dim)], dtype=float)
        norm = float(np.linalg.norm(vec))
        if norm > 0.0:
            return vec / norm


@dataclass(frozen=True)
class EmbeddingTable:
    """Immutable token -> vector map with an optional hashed fallback.

    With ``fallback_seed`` set, lookups never fail: unknown tokens get a
    deterministic unit vector. Without it, misses raise ``KeyError``.
    ``duplicate_count`` records how many lines were overwritten at load time.
    """

    dim: int
    vectors: Mapping[str, np.ndarray] = field(default_factory=dict)
    fallback_seed: int | None = None
    duplicate_count: int = 0

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def resolves(self, token: str) -> bool:
        return self.fallback_seed is not None or token in self.vectors

    def lookup(self, token: str) -> np.ndarray:
        stored = self.vectors.get(token)
        if stored is not None:
            return stored
        if self.fallback_seed is None:
            raise KeyError(f"no vector for token {token!r} and no fallback configured")
        return _hashed_vector(token, self.fallback_seed, self.dim)


def load_embeddings(path: str, expected_dim: int | None = None) -> EmbeddingTable:
    """Parse a text embedding file: one token plus its components per line."""
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = expected_dim
    duplicates = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            token, fields = parts[0], parts[1:]
            if not fields:
                raise ValueError(f"line {lineno}: token {token!r} has no components")
            if dim is None:
                dim = len(fields)
            elif len(fields) != dim:
                raise ValueError(
                    f"line {lineno}: expected {dim} components, found {len(fields)}"
                )
            try:
                vec = np.array([float(x) for x in fields], dtype=float)
            except ValueError:
                raise ValueError(f"line {lineno}: non-numeric component") from None
            if token in vectors:
                duplicates += 1
            vectors[token] = vec
    if dim is None or not vectors:
        raise ValueError(f"{path}: no embedding rows found")
    return EmbeddingTable(dim=dim, vectors=vectors, duplicate_count=duplicates)


def save_embeddings(table: EmbeddingTable, path: str) -> None:
    """Write a table back out in the same whitespace-delimited text format."""
    with open(path, "w", encoding="utf-8") as fh:
        for token in table.vectors:
            comps = " ".join(repr(float(x)) for x in table.vectors[token])
            fh.write(f"{token} {comps}\n")


def hashed_embeddings(dim: int, seed: int) -> EmbeddingTable:
    """Table with no stored rows; every lookup is a hashed unit vector."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    return EmbeddingTable(dim=dim, vectors={}, fallback_seed=seed)


@dataclass(frozen=True)
class TfIdfWeights:
    """Inverse-document-frequency weights over a corpus of ``doc_count`` docs."""

    idf: Mapping[str, float]
    doc_count: int

    def weight(self, token: str) -> float:
        known = self.idf.get(token)
        if known is not None:
            return known
        # unseen token: smoothed idf at df = 0
        return math.log((1 + self.doc_count) / 1.0)

    def save_tsv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"#docs\t{self.doc_count}\n")
            for token in sorted(self.idf):
                fh.write(f"{token}\t{repr(self.idf[token])}\n")

    @staticmethod
    def load_tsv(path: str) -> "TfIdfWeights":
        idf: dict[str, float] = {}
        doc_count = 0
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                key, value = line.split("\t")
                if key == "#docs":
                    doc_count = int(value)
                else:
                    idf[key] = float(value)
        return TfIdfWeights(idf=idf, doc_count=doc_count)


def tfidf_index(corpus: Sequence[Sequence[str]], *, smoothed: bool = True) -> TfIdfWeights:
    """Document frequencies -> idf; add-one smoothing unless ``smoothed=False``."""
    if not corpus:
        raise ValueError("corpus must be non-empty")
    n = len(corpus)
    df: dict[str, int] = {}
    for doc in corpus:
        for token in set(doc):
            df[token] = df.get(token, 0) + 1
    if smoothed:
        idf = {t: math.log((1 + n) / (1 + c)) for t, c in df.items()}
    else:
        idf = {t: math.log(n / c) for t, c in df.items()}
    return TfIdfWeights(idf=idf, doc_count=n)


def doc_vector(
    tokens: Iterable[str],
    table: EmbeddingTable,
    mode: str = "mean",
    *,
    weights: TfIdfWeights | None = None,
) -> np.ndarray:
    """Pool token vectors into one document vector.

    Modes: ``mean`` (component-wise average), ``extrema`` (per dimension the
    value of largest magnitude, sign preserved, magnitude ties resolve to the
    positive value), ``tfidf_mean`` (idf-weighted average; requires weights).
    """
    toks = [t for t in tokens if table.resolves(t)]
    if not toks:
        raise ValueError("no token resolvable against the embedding table")
    stack = np.stack([table.lookup(t) for t in toks])
    if mode == "mean":
        return stack.mean(axis=0)
    if mode == "extrema":
        out = np.empty(table.dim, dtype=float)
        for d in range(table.dim):
            col = stack[:, d]
            best = col[0]
            for x in col[1:]:
                if abs(x) > abs(best) or (abs(x) == abs(best) and x > best):
                    best = x
            out[d] = best
        return out
    if mode == "tfidf_mean":
        if weights is None:
            raise ValueError("tfidf_mean requires weights")
        w = np.array([weights.weight(t) for t in toks], dtype=float)
        total = float(w.sum())
        if total == 0.0:
            return stack.mean(axis=0)
        return (stack * w[:, None]).sum(axis=0) / total
    raise ValueError(f"unknown mode {mode!r}")
