"""Surface-overlap metrics over token and character sequences.

Sequence arguments follow the (s1, s2) = (reference-side, hypothesis-side)
convention: recall is computed against s1, precision against s2. All
similarity values lie in [0, 1].
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Optional

from .text_core import bag_combine, lcs, levenshtein, ngrams, tokenize


@dataclass(frozen=True)
class MetricResult:
    """Scalar score plus the components most metrics define."""

    metric_id: str
    value: float
    orientation: str = "similarity"  # or "distance"
    precision: Optional[float] = None
    recall: Optional[float] = None
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"metric": self.metric_id, "value": self.value}
        if self.precision is not None:
            out["precision"] = self.precision
        if self.recall is not None:
            out["recall"] = self.recall
        if self.detail:
            out["detail"] = dict(self.detail)
        return out


def _bag_f(metric_id: str, inter: int, size_ref: int, size_hyp: int, **detail) -> MetricResult:
    if size_ref == 0 and size_hyp == 0:
        return MetricResult(metric_id, 1.0, precision=1.0, recall=1.0, detail=detail)
    if size_ref == 0 or size_hyp == 0:
        return MetricResult(metric_id, 0.0, precision=0.0, recall=0.0, detail=detail)
    precision = inter / size_hyp
    recall = inter / size_ref
    value = 2.0 * inter / (size_ref + size_hyp)
    return MetricResult(metric_id, value, precision=precision, recall=recall, detail=detail)


def rouge_n(n: int, s1: Sequence[str], s2: Sequence[str]) -> MetricResult:
    """F-measure over contiguous n-gram bags: 2|b1 ∩ b2| / (|b1| + |b2|)."""
    b1, b2 = ngrams(s1, n), ngrams(s2, n)
    inter = bag_combine("intersect", b1, b2).size
    return _bag_f(f"rouge{n}", inter, b1.size, b2.size, overlap=inter)


def rouge_l(s1: Sequence[str], s2: Sequence[str]) -> MetricResult:
    """LCS-based F: 2 * LCS(s1, s2) / (|s1| + |s2|)."""
    if not s1 and not s2:
        return MetricResult("rougeL", 1.0, precision=1.0, recall=1.0, detail={"lcs_length": 0})
    if not s1 or not s2:
        return MetricResult("rougeL", 0.0, precision=0.0, recall=0.0, detail={"lcs_length": 0})
    length, _ = lcs(s1, s2)
    return MetricResult(
        "rougeL",
        2.0 * length / (len(s1) + len(s2)),
        precision=length / len(s2),
        recall=length / len(s1),
        detail={"lcs_length": length},
    )


def _skip_bigram_bag(seq: Sequence[str], max_skip: Optional[int]) -> Counter:
    out: Counter = Counter()
    for i in range(len(seq)):
        limit = len(seq) if max_skip is None else min(len(seq), i + max_skip + 1)
        for j in range(i + 1, limit):
            out[(seq[i], seq[j])] += 1
    return out


def rouge_s(s1: Sequence[str], s2: Sequence[str], max_skip: Optional[int] = None) -> MetricResult:
    """F-measure over in-order token pairs with position gap <= max_skip.

    The gap is j - i, so max_skip=1 is exactly the bigram bag.
    """
    b1 = _skip_bigram_bag(s1, max_skip)
    b2 = _skip_bigram_bag(s2, max_skip)
    inter = sum(min(c, b2.get(g, 0)) for g, c in b1.items())
    return _bag_f("rougeS", inter, sum(b1.values()), sum(b2.values()), overlap=inter)


def wer(hyp: Sequence[str], ref: Sequence[str]) -> MetricResult:
    """Edit distance over reference length; may exceed 1."""
    if not ref:
        raise ValueError("wer undefined for an empty reference")
    dist = levenshtein(hyp, ref)
    return MetricResult(
        "wer", dist / len(ref), orientation="distance", detail={"edit_distance": dist}
    )


def per(hyp: Sequence[str], ref: Sequence[str]) -> MetricResult:
    """Position-independent error rate; 0 iff the bags of words coincide."""
    if not ref:
        raise ValueError("per undefined for an empty reference")
    if hyp:
        inter = bag_combine("intersect", ngrams(hyp, 1), ngrams(ref, 1)).size
    else:
        inter = 0
    value = (max(len(hyp), len(ref)) - inter) / len(ref)
    return MetricResult("per", value, orientation="distance", detail={"overlap": inter})


def _apply_move(seq: list, start: int, end: int, dest: int) -> list:
    block = seq[start:end]
    rest = seq[:start] + seq[end:]
    return rest[:dest] + block + rest[dest:]


def ter_greedy(hyp: Sequence[str], ref: Sequence[str], max_shift_iters: int = 50) -> MetricResult:
    """Greedy block-shift edit rate: (shifts + final edit distance) / |ref|.

    Each iteration applies the single contiguous-block move that reduces the
    remaining edit distance the most (scan order: block start, block end,
    destination; first best wins). A greedy approximation; the exact search
    is intractable in general.
    """
    if not ref:
        raise ValueError("ter undefined for an empty reference")
    work = list(hyp)
    dist = levenshtein(work, ref)
    shifts = 0
    for _ in range(max_shift_iters):
        if dist == 0:
            break
        best_dist = dist
        best_seq = None
        for start in range(len(work)):
            for end in range(start + 1, len(work) + 1):
                for dest in range(len(work) - (end - start) + 1):
                    if dest == start:
                        continue
                    cand = _apply_move(work, start, end, dest)
                    d = levenshtein(cand, ref)
                    if d < best_dist:
                        best_dist = d
                        best_seq = cand
        if best_seq is None:
            break
        work = best_seq
        dist = best_dist
        shifts += 1
    return MetricResult(
        "ter",
        (shifts + dist) / len(ref),
        orientation="distance",
        detail={"shift_count": shifts, "edit_distance": dist},
    )


def simple_english_stemmer(token: str) -> str:
    """Tiny suffix stripper; optional hook for the stem matching stage."""
    for suffix in ("ing", "edly", "ed", "ies", "es", "s"):
        if token.endswith(suffix) and len(token) > len(suffix) + 2:
            return token[: -len(suffix)]
    return token


@dataclass(frozen=True)
class MeteorConfig:
    recall_weight: float = 0.9
    stages: tuple = ("exact", "stem", "synonym")
    penalty_gamma: float = 0.5
    penalty_power: float = 3.0
    synonym_table: Optional[Mapping[str, frozenset]] = None
    stemmer: Callable[[str], str] = staticmethod(lambda t: t)

    def __post_init__(self) -> None:
        if not (0.0 < self.recall_weight < 1.0):
            raise ValueError("recall_weight must lie in (0, 1)")
        if not self.stages or self.stages[0] != "exact":
            raise ValueError("stages must be non-empty and start with 'exact'")
        for s in self.stages:
            if s not in ("exact", "stem", "synonym"):
                raise ValueError(f"unknown matching stage: {s!r}")
        if not (0.0 <= self.penalty_gamma <= 1.0):
            raise ValueError("penalty_gamma must lie in [0, 1]")


def _stage_matcher(stage: str, cfg: MeteorConfig) -> Callable[[str, str], bool]:
    if stage == "exact":
        return lambda h, r: h == r
    if stage == "stem":
        stem = cfg.stemmer
        return lambda h, r: stem(h) == stem(r)
    table = cfg.synonym_table or {}
    return lambda h, r: r in table.get(h, ()) or h in table.get(r, ())


def meteor_lite(
    hyp: Sequence[str], ref: Sequence[str], cfg: MeteorConfig | None = None
) -> MetricResult:
    """Staged one-to-one unigram alignment scored by a recall-weighted F.

    Stages run in order (exact, then stem images, then synonym sets), each
    pairing leftover tokens left to right. F = P*R / ((1-w)P + wR) with
    w = recall_weight, then scaled by (1 - gamma*(chunks/matches)^power)
    where chunks counts maximal runs contiguous in both sequences.
    """
    cfg = cfg or MeteorConfig()
    if not hyp or not ref:
        return MetricResult("meteor", 0.0, precision=0.0, recall=0.0,
                            detail={"matches": 0, "chunks": 0})
    hyp_free = [True] * len(hyp)
    ref_free = [True] * len(ref)
    pairs: list[tuple[int, int]] = []
    for stage in cfg.stages:
        match = _stage_matcher(stage, cfg)
        for i, h in enumerate(hyp):
            if not hyp_free[i]:
                continue
            for j, r in enumerate(ref):
                if ref_free[j] and match(h, r):
                    pairs.append((i, j))
                    hyp_free[i] = False
                    ref_free[j] = False
                    break
    matches = len(pairs)
    if matches == 0:
        return MetricResult("meteor", 0.0, precision=0.0, recall=0.0,
                            detail={"matches": 0, "chunks": 0})
    precision = matches / len(hyp)
    recall = matches / len(ref)
    w = cfg.recall_weight
    f = precision * recall / ((1.0 - w) * precision + w * recall)
    pairs.sort()
    chunks = 1
    for (i0, j0), (i1, j1) in zip(pairs, pairs[1:]):
        if i1 != i0 + 1 or j1 != j0 + 1:
            chunks += 1
    penalty = cfg.penalty_gamma * (chunks / matches) ** cfg.penalty_power
    return MetricResult(
        "meteor",
        f * (1.0 - penalty),
        precision=precision,
        recall=recall,
        detail={"matches": matches, "chunks": chunks, "penalty": penalty},
    )


def chrf(hyp, ref, n: int = 6, beta: float = 2.0) -> MetricResult:
    """Character n-gram F over orders 1..n, recall weighted beta times.

    Accepts strings or token sequences (tokens are joined with spaces);
    whitespace characters never enter the n-grams.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    hyp_chars = tokenize(hyp if isinstance(hyp, str) else " ".join(hyp), "char")
    ref_chars = tokenize(ref if isinstance(ref, str) else " ".join(ref), "char")
    if not ref_chars:
        raise ValueError("chrf undefined for an empty reference")
    precisions, recalls = [], []
    for order in range(1, n + 1):
        bh, br = ngrams(hyp_chars, order), ngrams(ref_chars, order)
        if not bh and not br:
            continue
        inter = bag_combine("intersect", bh, br).size if bh and br else 0
        precisions.append(inter / bh.size if bh.size else 0.0)
        recalls.append(inter / br.size if br.size else 0.0)
    p = sum(precisions) / len(precisions)
    r = sum(recalls) / len(recalls)
    if p == 0.0 and r == 0.0:
        value = 0.0
    else:
        b2 = beta * beta
        value = (1.0 + b2) * p * r / (b2 * p + r)
    return MetricResult("chrf", value, precision=p, recall=r, detail={"orders": len(precisions)})


def _longest_free_run(s1, s2, free1, free2) -> tuple[int, int, int]:
    """Longest run over still-free positions; ties leftmost in s1.

    Returns (length, start1, start2); length 0 when nothing matches.
    """
    best = (0, 0, 0)
    m = len(s2)
    prev = [0] * (m + 1)
    for i in range(1, len(s1) + 1):
        cur = [0] * (m + 1)
        if free1[i - 1]:
            t = s1[i - 1]
            for j in range(1, m + 1):
                if free2[j - 1] and s2[j - 1] == t:
                    cur[j] = prev[j - 1] + 1
                    if cur[j] > best[0]:
                        best = (cur[j], i - cur[j], j - cur[j])
        prev = cur
    return best


def gtm(s1: Sequence[str], s2: Sequence[str], p: float = 1.0) -> MetricResult:
    """Greedy tiling F-measure with an L^p size that rewards longer runs.

    Repeatedly removes the longest contiguous run shared by the residuals
    (ties leftmost in s1). Match size M = (sum run^p)^(1/p); value is the
    harmonic mean of M/|s1| and M/|s2|.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if not s1 and not s2:
        return MetricResult("gtm", 1.0, precision=1.0, recall=1.0, detail={"tiles": 0})
    if not s1 or not s2:
        return MetricResult("gtm", 0.0, precision=0.0, recall=0.0, detail={"tiles": 0})
    free1 = [True] * len(s1)
    free2 = [True] * len(s2)
    runs: list[int] = []
    while True:
        length, start1, start2 = _longest_free_run(s1, s2, free1, free2)
        if length < 1:
            break
        runs.append(length)
        for k in range(length):
            free1[start1 + k] = False
            free2[start2 + k] = False
    if not runs:
        return MetricResult("gtm", 0.0, precision=0.0, recall=0.0, detail={"tiles": 0})
    match_size = sum(r**p for r in runs) ** (1.0 / p)
    precision = match_size / len(s2)
    recall = match_size / len(s1)
    value = 2.0 * precision * recall / (precision + recall)
    return MetricResult(
        "gtm",
        value,
        precision=precision,
        recall=recall,
        detail={"tiles": len(runs), "match_size": match_size},
    )
