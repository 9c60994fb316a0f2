"""Tokenization, n-gram bag algebra, and the sequence primitives (LCS,
Levenshtein, longest common substring) every metric in this package reuses.

All functions are pure and operate on immutable token tuples; nothing here
mutates shared state, so concurrent use is safe.
"""

from __future__ import annotations

import re
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass, field

TokenSeq = tuple[str, ...]

# Sentinel slot value used by genome renderings; never part of a real text.
# Stripped before any metric computation.
EMPTY = ""

_HASHTAG_TOKEN = re.compile(r"[#@]?[\w']+|[^\w\s]", re.UNICODE)


def strip_empty(tokens: Sequence[str]) -> TokenSeq:
    """Drop EMPTY sentinel slots; metrics must never see them."""
    return tuple(t for t in tokens if t != EMPTY)


def tokenize(
    text: str,
    mode: str = "word",
    *,
    keep_whitespace: bool = False,
    lowercase: bool = False,
) -> TokenSeq:
    """Split ``text`` into tokens.

    Modes:
      word          split on runs of whitespace, lossless otherwise
      char          one token per code point; whitespace dropped unless
                    ``keep_whitespace`` is set
      hashtag_aware like word, but punctuation is split off while a leading
                    '#' or '@' stays glued to the following word

    Empty input yields an empty sequence. Lowercasing is off by default;
    normalization is a metric-layer concern.
    """
    if lowercase:
        text = text.lower()
    if mode == "word":
        return tuple(text.split())
    if mode == "char":
        if keep_whitespace:
            return tuple(text)
        return tuple(ch for ch in text if not ch.isspace())
    if mode == "hashtag_aware":
        return tuple(_HASHTAG_TOKEN.findall(text))
    raise ValueError(f"unknown tokenize mode: {mode!r}")


@dataclass(frozen=True)
class NGramBag:
    """Multiset of fixed-arity n-grams with positive integer counts."""

    arity: int
    counts: Counter = field(default_factory=Counter)

    def __post_init__(self) -> None:
        if self.arity < 1:
            raise ValueError("arity must be >= 1")
        # no zero/negative entries; all keys share the declared arity
        for gram, cnt in self.counts.items():
            if cnt <= 0:
                raise ValueError(f"non-positive count for {gram!r}")
            if len(gram) != self.arity:
                raise ValueError(f"gram {gram!r} does not have arity {self.arity}")

    @property
    def size(self) -> int:
        """Total count over all grams (the |.| of bag formulas)."""
        return sum(self.counts.values())

    def distinct(self) -> int:
        return len(self.counts)

    def __bool__(self) -> bool:
        return bool(self.counts)


def ngrams(seq: Sequence[str], n: int) -> NGramBag:
    """Bag of all contiguous n-grams of ``seq``; empty when len(seq) < n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    grams = Counter(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))
    return NGramBag(arity=n, counts=grams)


def bag_combine(op: str, a: NGramBag, b: NGramBag) -> NGramBag:
    """Combine two same-arity bags.

    intersect       per-key min of counts
    left_intersect  a's full count wherever b has the key at all
    sum             per-key count addition
    """
    if a.arity != b.arity:
        raise ValueError(f"incompatible bag arities: {a.arity} vs {b.arity}")
    out: Counter = Counter()
    if op == "intersect":
        for gram, cnt in a.counts.items():
            other = b.counts.get(gram, 0)
            if other:
                out[gram] = min(cnt, other)
    elif op == "left_intersect":
        for gram, cnt in a.counts.items():
            if gram in b.counts:
                out[gram] = cnt
    elif op == "sum":
        out = Counter(a.counts)
        out.update(b.counts)
    else:
        raise ValueError(f"unknown bag op: {op!r}")
    return NGramBag(arity=a.arity, counts=out)


def lcs(a: Sequence[str], b: Sequence[str]) -> tuple[int, TokenSeq]:
    """Longest common subsequence: (length, one witness subsequence).

    Among equally long solutions the witness matches the earliest possible
    indices of ``a``.
    """
    n, m = len(a), len(b)
    # suffix table: length[i][j] = LCS of a[i:], b[j:]
    length = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        row, nxt = length[i], length[i + 1]
        for j in range(m - 1, -1, -1):
            if a[i] == b[j]:
                row[j] = nxt[j + 1] + 1
            else:
                row[j] = nxt[j] if nxt[j] >= row[j + 1] else row[j + 1]
    out: list[str] = []
    i = j = 0
    while i < n and j < m:
        if a[i] == b[j] and length[i][j] == length[i + 1][j + 1] + 1:
            out.append(a[i])
            i += 1
            j += 1
        elif length[i][j + 1] == length[i][j]:
            j += 1  # skipping b keeps a-indices early
        else:
            i += 1
    return length[0][0], tuple(out)


def longest_common_substring(a: Sequence[str], b: Sequence[str]) -> tuple[int, TokenSeq]:
    """Longest contiguous run shared by both sequences.

    Ties resolve to the leftmost occurrence in ``a``.
    """
    n, m = len(a), len(b)
    best_len = 0
    best_end = 0  # exclusive end in a
    prev = [0] * (m + 1)
    for i in range(1, n + 1):
        cur = [0] * (m + 1)
        ai = a[i - 1]
        for j in range(1, m + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
                if cur[j] > best_len:
                    best_len = cur[j]
                    best_end = i
        prev = cur
    return best_len, tuple(a[best_end - best_len : best_end])


def levenshtein(a: Sequence[str], b: Sequence[str]) -> int:
    """Minimum substitutions/insertions/deletions turning ``a`` into ``b``."""
    if len(a) < len(b):
        a, b = b, a  # iterate over the longer, keep rows short
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ta in enumerate(a, start=1):
        cur = [i]
        for j, tb in enumerate(b, start=1):
            cost = 0 if ta == tb else 1
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost))
        prev = cur
    return prev[-1]
