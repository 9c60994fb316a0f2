"""Similarity, distance, divergence, and correlation kernels on real vectors.

Also hosts the embedding-consuming comparators: greedy matching, the
precision/recall F1 over max-cosine alignments, word mover's distance, and
the length-penalized inner product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from .embeddings import EmbeddingTable
from .lexical_metrics import MetricResult

__all__ = [
    "SIMILARITY_KINDS",
    "DISTANCE_KINDS",
    "DIVERGENCE_KINDS",
    "CORRELATION_KINDS",
    "TransportPlan",
    "vector_similarity",
    "vector_distance",
    "divergence",
    "correlation",
    "greedy_match_similarity",
    "embed_f1",
    "wmd",
    "simile",
]

SIMILARITY_KINDS = ("cosine", "jaccard_vec", "dice_vec", "overlap_vec", "inner")
DISTANCE_KINDS = ("lp", "chebyshev", "canberra", "chi_square", "cosine_distance")
DIVERGENCE_KINDS = ("kl", "js", "js_distance")
CORRELATION_KINDS = ("pearson", "spearman", "kendall")


def _vec(x: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"{name} must be a non-empty 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def _pair(a: Sequence[float], b: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    va, vb = _vec(a, "a"), _vec(b, "b")
    if va.size != vb.size:
        raise ValueError(f"dimension mismatch: {va.size} vs {vb.size}")
    return va, vb


def vector_similarity(kind: str, a: Sequence[float], b: Sequence[float]) -> float:
    va, vb = _pair(a, b)
    dot = float(np.dot(va, vb))
    if kind == "inner":
        return dot
    na2, nb2 = float(np.dot(va, va)), float(np.dot(vb, vb))
    if kind == "cosine":
        if na2 == 0.0 or nb2 == 0.0:
            raise ValueError("cosine undefined for a zero vector")
        return dot / math.sqrt(na2 * nb2)
    if kind == "jaccard_vec":
        denom = na2 + nb2 - dot
        if denom == 0.0:
            raise ValueError("jaccard_vec undefined: zero denominator")
        return dot / denom
    if kind == "dice_vec":
        if na2 + nb2 == 0.0:
            raise ValueError("dice_vec undefined for two zero vectors")
        return 2.0 * dot / (na2 + nb2)
    if kind == "overlap_vec":
        denom = min(na2, nb2)
        if denom == 0.0:
            raise ValueError("overlap_vec undefined for a zero vector")
        return dot / denom
    raise ValueError(f"unknown similarity kind {kind!r}")


def vector_distance(
    kind: str, a: Sequence[float], b: Sequence[float], *, p: float | None = None
) -> float:
    va, vb = _pair(a, b)
    diff = va - vb
    if kind == "lp":
        if p is None:
            p = 2.0
        if p < 1:
            raise ValueError(f"p must be >= 1, got {p}")
        return float(np.sum(np.abs(diff) ** p) ** (1.0 / p))
    if kind == "chebyshev":
        return float(np.max(np.abs(diff)))
    if kind in ("canberra", "chi_square"):
        if np.any(va < 0) or np.any(vb < 0):
            raise ValueError(f"{kind} requires nonnegative components")
        total = va + vb
        live = total > 0
        if kind == "canberra":
            return float(np.sum(np.abs(diff[live]) / total[live]))
        return float(np.sum(diff[live] ** 2 / total[live]))
    if kind == "cosine_distance":
        return 1.0 - vector_similarity("cosine", va, vb)
    raise ValueError(f"unknown distance kind {kind!r}")


def _simplex(x: Sequence[float], name: str) -> np.ndarray:
    v = _vec(x, name)
    if np.any(v < 0):
        raise ValueError(f"{name} has negative mass")
    if abs(float(v.sum()) - 1.0) > 1e-9:
        raise ValueError(f"{name} does not sum to 1")
    return v


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    live = p > 0
    if np.any(q[live] == 0):
        raise ValueError("kl undefined: q is zero where p has mass")
    return float(np.sum(p[live] * np.log(p[live] / q[live])))


def divergence(kind: str, p: Sequence[float], q: Sequence[float]) -> float:
    vp, vq = _simplex(p, "p"), _simplex(q, "q")
    if vp.size != vq.size:
        raise ValueError(f"dimension mismatch: {vp.size} vs {vq.size}")
    if kind == "kl":
        return _kl(vp, vq)
    if kind in ("js", "js_distance"):
        mid = (vp + vq) / 2.0
        js = 0.5 * _kl(vp, mid) + 0.5 * _kl(vq, mid)
        js = max(js, 0.0)
        return math.sqrt(js) if kind == "js_distance" else js
    raise ValueError(f"unknown divergence kind {kind!r}")


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size, dtype=float)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and x[order[j + 1]] == x[order[i]]:
            j += 1
        # tied block shares the average of ranks i+1 .. j+1
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    return ranks


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = float(np.dot(dx, dx)), float(np.dot(dy, dy))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("correlation undefined: zero variance")
    return float(np.dot(dx, dy) / math.sqrt(sx * sy))


def _kendall_tau_b(x: np.ndarray, y: np.ndarray) -> float:
    n = x.size
    concordant = discordant = ties_x = ties_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx, dy = x[i] - x[j], y[i] - y[j]
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                ties_x += 1
            elif dy == 0:
                ties_y += 1
            elif (dx > 0) == (dy > 0):
                concordant += 1
            else:
                discordant += 1
    n0 = n * (n - 1) // 2
    denom = math.sqrt((n0 - _tie_term(x)) * (n0 - _tie_term(y)))
    if denom == 0.0:
        raise ValueError("correlation undefined: all values tied")
    return (concordant - discordant) / denom


def _tie_term(x: np.ndarray) -> float:
    _, counts = np.unique(x, return_counts=True)
    return float(sum(c * (c - 1) // 2 for c in counts))


def correlation(kind: str, x: Sequence[float], y: Sequence[float]) -> float:
    vx, vy = _pair(x, y)
    if vx.size < 2:
        raise ValueError("correlation needs at least 2 points")
    if kind == "pearson":
        return _pearson(vx, vy)
    if kind == "spearman":
        return _pearson(_average_ranks(vx), _average_ranks(vy))
    if kind == "kendall":
        return _kendall_tau_b(vx, vy)
    raise ValueError(f"unknown correlation kind {kind!r}")


def _cosine_matrix(rows_a: Sequence[Sequence[float]], rows_b: Sequence[Sequence[float]]) -> np.ndarray:
    if not len(rows_a) or not len(rows_b):
        raise ValueError("vector lists must be non-empty")
    ma = np.stack([_vec(v, "A") for v in rows_a])
    mb = np.stack([_vec(v, "B") for v in rows_b])
    if ma.shape[1] != mb.shape[1]:
        raise ValueError("dimension mismatch between lists")
    na = np.linalg.norm(ma, axis=1)
    nb = np.linalg.norm(mb, axis=1)
    if np.any(na == 0) or np.any(nb == 0):
        raise ValueError("cosine undefined for a zero vector")
    return (ma / na[:, None]) @ (mb / nb[:, None]).T


def greedy_match_similarity(
    a_vectors: Sequence[Sequence[float]], b_vectors: Sequence[Sequence[float]]
) -> float:
    cos = _cosine_matrix(a_vectors, b_vectors)
    return 0.5 * (float(cos.max(axis=1).mean()) + float(cos.max(axis=0).mean()))


def embed_f1(
    a_vectors: Sequence[Sequence[float]], b_vectors: Sequence[Sequence[float]]
) -> MetricResult:
    cos = _cosine_matrix(a_vectors, b_vectors)
    recall = float(cos.max(axis=1).mean())
    precision = float(cos.max(axis=0).mean())
    f = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return MetricResult(metric_id="embedf1", value=f, precision=precision, recall=recall)


@dataclass(frozen=True)
class TransportPlan:
    """Mass flows between two word supports, indexed into the sorted supports."""

    flows: Mapping[tuple[int, int], float]
    cost: float
    relaxed: bool = False
    source_words: tuple[str, ...] = field(default=())
    target_words: tuple[str, ...] = field(default=())


def _bow_support(bow: Mapping[str, float], name: str) -> tuple[list[str], np.ndarray]:
    words = sorted(w for w, m in bow.items() if m != 0.0)
    if not words:
        raise ValueError(f"{name} has no mass")
    masses = np.array([bow[w] for w in words], dtype=float)
    if np.any(masses < 0):
        raise ValueError(f"{name} has negative mass")
    if abs(float(masses.sum()) - 1.0) > 1e-9:
        raise ValueError(f"{name} masses must sum to 1")
    return words, masses


def wmd(
    a_bow: Mapping[str, float],
    b_bow: Mapping[str, float],
    table: EmbeddingTable,
    *,
    max_exact_support: int = 64,
) -> tuple[float, TransportPlan]:
    """Minimum cumulative transport cost between two normalized bags of words.

    Exact LP solve up to ``max_exact_support`` words per side; larger inputs
    get the max of the two one-sided greedy relaxations, flagged relaxed.
    """
    a_words, a_mass = _bow_support(a_bow, "a_bow")
    b_words, b_mass = _bow_support(b_bow, "b_bow")
    for word in (*a_words, *b_words):
        if not table.resolves(word):
            raise ValueError(f"no embedding for word {word!r}")

    if a_words == b_words and np.allclose(a_mass, b_mass, atol=1e-12):
        flows = {(i, i): float(m) for i, m in enumerate(a_mass)}
        return 0.0, TransportPlan(
            flows=flows,
            cost=0.0,
            source_words=tuple(a_words),
            target_words=tuple(b_words),
        )

    ea = np.stack([table.lookup(w) for w in a_words])
    eb = np.stack([table.lookup(w) for w in b_words])
    cost = np.linalg.norm(ea[:, None, :] - eb[None, :, :], axis=2)
    m, n = len(a_words), len(b_words)

    if max(m, n) > max_exact_support:
        from_a = float(np.sum(a_mass * cost.min(axis=1)))
        from_b = float(np.sum(b_mass * cost.min(axis=0)))
        if from_a >= from_b:
            flows = {(i, int(j)): float(a_mass[i]) for i, j in enumerate(cost.argmin(axis=1))}
            bound = from_a
        else:
            flows = {(int(i), j): float(b_mass[j]) for j, i in enumerate(cost.argmin(axis=0))}
            bound = from_b
        return bound, TransportPlan(
            flows=flows,
            cost=bound,
            relaxed=True,
            source_words=tuple(a_words),
            target_words=tuple(b_words),
        )

    a_eq = np.zeros((m + n, m * n))
    for i in range(m):
        a_eq[i, i * n : (i + 1) * n] = 1.0
    for j in range(n):
        a_eq[m + j, j::n] = 1.0
    res = linprog(
        cost.ravel(),
        A_eq=a_eq,
        b_eq=np.concatenate([a_mass, b_mass]),
        bounds=(0, None),
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"transport solve failed: {res.message}")
    plan = res.x.reshape(m, n)
    flows = {
        (i, j): float(plan[i, j]) for i in range(m) for j in range(n) if plan[i, j] > 1e-12
    }
    distance = float(res.fun)
    return distance, TransportPlan(
        flows=flows,
        cost=distance,
        source_words=tuple(a_words),
        target_words=tuple(b_words),
    )


def simile(
    a: Sequence[float], b: Sequence[float], len_a: int, len_b: int, k: float = 0.25
) -> float:
    """Length-penalized inner product: exp(1 - max/min)^k scales <a, b>."""
    va, vb = _pair(a, b)
    if len_a < 1 or len_b < 1:
        raise ValueError("lengths must be >= 1")
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    penalty = math.exp(1.0 - max(len_a, len_b) / min(len_a, len_b))
    return penalty**k * float(np.dot(va, vb))
