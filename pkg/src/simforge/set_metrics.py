"""Set/bag coefficient family and corpus-count normalized distance.

Coefficients default to the classic set semantics (counts collapsed to 0/1);
``jaccard_bag`` is the one raw-count form, with |A|+|B| in the denominator,
and tversky offers a bag-count extension behind ``collapse=False``.
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from .text_core import NGramBag, bag_combine

SET_KINDS = ("jaccard_set", "jaccard_bag", "dice", "ochiai", "overlap", "tversky")


def _collapsed(bag: NGramBag) -> Counter:
    return Counter({g: 1 for g in bag.counts})


def bag_coefficient(
    kind: str,
    a: NGramBag,
    b: NGramBag,
    *,
    alpha: float = 1.0,
    beta: float = 1.0,
    collapse: bool = True,
) -> float:
    """Similarity coefficient between two same-arity bags, in [0, 1].

    Set kinds (jaccard_set, dice, ochiai, overlap, tversky) collapse counts
    to presence before applying their formula; jaccard_bag works on raw
    counts. ``collapse=False`` switches tversky to bag semantics, where
    relative complements are sum(max(0, cnt_a - cnt_b)).

    Both inputs empty scores 1.0; exactly one empty scores 0.0.
    """
    if kind not in SET_KINDS:
        raise ValueError(f"unknown coefficient kind: {kind!r}")
    if a.arity != b.arity:
        raise ValueError(f"incompatible bag arities: {a.arity} vs {b.arity}")
    if kind == "tversky" and (alpha < 0 or beta < 0):
        raise ValueError("tversky requires alpha >= 0 and beta >= 0")
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0

    if kind == "jaccard_bag":
        inter = bag_combine("intersect", a, b).size
        return inter / (a.size + b.size)

    if kind == "tversky" and not collapse:
        ca, cb = a.counts, b.counts
    else:
        ca, cb = _collapsed(a), _collapsed(b)
    inter = sum(min(c, cb.get(g, 0)) for g, c in ca.items())
    size_a = sum(ca.values())
    size_b = sum(cb.values())

    if kind == "jaccard_set":
        return inter / (size_a + size_b - inter)
    if kind == "dice":
        return 2.0 * inter / (size_a + size_b)
    if kind == "ochiai":
        return inter / math.sqrt(size_a * size_b)
    if kind == "overlap":
        return inter / min(size_a, size_b)
    # tversky: complements relative to the (possibly collapsed) counts
    only_a = size_a - inter
    only_b = size_b - inter
    denom = inter + alpha * only_a + beta * only_b
    if denom == 0:
        return 0.0
    return inter / denom


def jaccard_dice_convert(value: float, direction: str) -> float:
    """Convert between the two coefficients: J = S/(2-S), S = 2J/(1+J)."""
    if not 0.0 <= value <= 1.0:
        raise ValueError("value must lie in [0, 1]")
    if direction == "dice_to_jaccard":
        return value / (2.0 - value)
    if direction == "jaccard_to_dice":
        return 2.0 * value / (1.0 + value)
    raise ValueError(f"unknown direction: {direction!r}")


@dataclass(frozen=True)
class CountIndex:
    """Document-level presence counts backing the normalized distance.

    A pair counts once per document containing both terms; pair_count keys
    are sorted 2-tuples of distinct tokens.
    """

    doc_count: Counter = field(default_factory=Counter)
    pair_count: Counter = field(default_factory=Counter)
    total_docs: int = 0

    def pair(self, x: str, y: str) -> int:
        if x == y:
            return self.doc_count.get(x, 0)
        key = (x, y) if x < y else (y, x)
        return self.pair_count.get(key, 0)

    def save_tsv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"#docs\t{self.total_docs}\n")
            for term in sorted(self.doc_count):
                fh.write(f"{term}\t{self.doc_count[term]}\n")
            for (x, y) in sorted(self.pair_count):
                fh.write(f"{x}\t{y}\t{self.pair_count[(x, y)]}\n")

    @classmethod
    def load_tsv(cls, path) -> "CountIndex":
        doc_count: Counter = Counter()
        pair_count: Counter = Counter()
        total = 0
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if parts[0] == "#docs" and len(parts) == 2:
                    total = int(parts[1])
                elif len(parts) == 2:
                    doc_count[parts[0]] = int(parts[1])
                elif len(parts) == 3:
                    x, y = sorted(parts[:2])
                    pair_count[(x, y)] = int(parts[2])
                else:
                    raise ValueError(f"line {lineno}: expected 2 or 3 tab-separated fields")
        return cls(doc_count=doc_count, pair_count=pair_count, total_docs=total)


def build_count_index(
    corpus: Iterable[Sequence[str]],
    vocabulary: set[str] | None = None,
) -> CountIndex:
    """Count, per document, which tokens and unordered token pairs occur."""
    doc_count: Counter = Counter()
    pair_count: Counter = Counter()
    total = 0
    for doc in corpus:
        total += 1
        present = set(doc)
        if vocabulary is not None:
            present &= vocabulary
        ordered = sorted(present)
        for t in ordered:
            doc_count[t] += 1
        for i, x in enumerate(ordered):
            for y in ordered[i + 1 :]:
                pair_count[(x, y)] += 1
    return CountIndex(doc_count=doc_count, pair_count=pair_count, total_docs=total)


def ngd(x: str, y: str, index: CountIndex) -> float:
    """Normalized co-occurrence distance from document counts.

    (max(log g(x), log g(y)) - log g(x,y)) / (log G - min(log g(x), log g(y))).
    Invariant to the logarithm base. Zero counts are an error; callers
    pre-filter vocabulary when needed.
    """
    gx = index.doc_count.get(x, 0)
    gy = index.doc_count.get(y, 0)
    gxy = index.pair(x, y)
    big_g = index.total_docs
    if gx == 0 or gy == 0:
        raise ValueError(f"ngd undefined: zero document count for {x!r} or {y!r}")
    if gxy == 0:
        raise ValueError(f"ngd undefined: {x!r} and {y!r} never co-occur")
    if big_g <= 1:
        raise ValueError("ngd requires an index over more than one document")
    lx, ly, lxy = math.log(gx), math.log(gy), math.log(gxy)
    numerator = max(lx, ly) - lxy
    if numerator == 0.0:
        return 0.0
    return numerator / (math.log(big_g) - min(lx, ly))
