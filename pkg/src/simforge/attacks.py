"""Evasion machinery for overlap and embedding scorers, plus the defence.

Contents: a multi-objective GA that samples sequences across ROUGE space,
bag-to-sequence reconstruction attacks, a single-objective GA that evolves
universal non-alphanumeric triggers against an embedding scorer, a fixed
candidate probe, and a surface-form sanitizer.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .embeddings import TfIdfWeights
from .lexical_metrics import MetricResult, meteor_lite, rouge_l, rouge_n
from .text_core import NGramBag, bag_combine, ngrams

__all__ = [
    "Genome",
    "GAConfig",
    "ParetoSample",
    "SanitizePolicy",
    "SanitizeReport",
    "TriggerRun",
    "ga_sample_rouge_space",
    "pareto_front",
    "oracle_bag",
    "heuristic_bag",
    "bag_to_sequence",
    "rouge_attack",
    "ga_universal_trigger",
    "ga_universal_trigger_run",
    "backdoor_probe",
    "sanitize",
]

IMMIGRANT_FRACTION = 0.1


@dataclass(frozen=True)
class Genome:
    """Fixed-length slot vector; index == vocab size means an empty slot."""

    slots: tuple[int, ...]

    def render(self, vocab: Sequence[str]) -> tuple[str, ...]:
        empty = len(vocab)
        return tuple(vocab[i] for i in self.slots if i != empty)


@dataclass(frozen=True)
class GAConfig:
    population: int = 50
    generations: int = 200
    mutation_rate: float | None = None  # None -> 1/genome_length
    crossover_rate: float = 0.9
    seed: int = 0
    elitism: int = 1
    objective_mode: str = "multi_rouge"

    def __post_init__(self) -> None:
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if self.mutation_rate is not None and not 0 < self.mutation_rate < 1:
            raise ValueError("mutation_rate must lie in (0, 1)")
        if not 0 < self.crossover_rate < 1:
            raise ValueError("crossover_rate must lie in (0, 1)")
        if self.elitism < 1 or self.elitism >= self.population:
            raise ValueError("elitism must satisfy 1 <= elitism < population")
        if self.objective_mode not in ("multi_rouge", "single_scalar"):
            raise ValueError(f"unknown objective_mode {self.objective_mode!r}")


@dataclass(frozen=True)
class ParetoSample:
    text: tuple[str, ...]
    r1: float
    r2: float
    rl: float


def _score_text(ref: Sequence[str], text: Sequence[str]) -> tuple[float, float, float]:
    return (
        rouge_n(1, ref, text).value,
        rouge_n(2, ref, text).value,
        rouge_l(tuple(ref), tuple(text)).value,
    )


def _dominates(a: tuple[float, ...], b: tuple[float, ...]) -> bool:
    return all(x >= y for x, y in zip(a, b)) and any(x > y for x, y in zip(a, b))


def _non_dominated_fronts(scores: Sequence[tuple[float, ...]]) -> list[list[int]]:
    n = len(scores)
    dominated_by = [0] * n
    dominates_list: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i != j and _dominates(scores[i], scores[j]):
                dominates_list[i].append(j)
            elif i != j and _dominates(scores[j], scores[i]):
                dominated_by[i] += 1
    fronts = [[i for i in range(n) if dominated_by[i] == 0]]
    while fronts[-1]:
        nxt = []
        for i in fronts[-1]:
            for j in dominates_list[i]:
                dominated_by[j] -= 1
                if dominated_by[j] == 0:
                    nxt.append(j)
        fronts.append(nxt)
    return fronts[:-1]


def _crowding(front: Sequence[int], scores: Sequence[tuple[float, ...]]) -> dict[int, float]:
    dist = {i: 0.0 for i in front}
    if len(front) <= 2:
        return {i: math.inf for i in front}
    n_obj = len(scores[front[0]])
    for k in range(n_obj):
        ordered = sorted(front, key=lambda i: (scores[i][k], i))
        lo, hi = scores[ordered[0]][k], scores[ordered[-1]][k]
        dist[ordered[0]] = dist[ordered[-1]] = math.inf
        if hi == lo:
            continue
        for pos in range(1, len(ordered) - 1):
            gap = scores[ordered[pos + 1]][k] - scores[ordered[pos - 1]][k]
            dist[ordered[pos]] += gap / (hi - lo)
    return dist


def _random_genome(rng: random.Random, length: int, n_symbols: int) -> Genome:
    return Genome(slots=tuple(rng.randrange(n_symbols) for _ in range(length)))


def _uniform_crossover(
    rng: random.Random, a: Genome, b: Genome, rate: float
) -> tuple[Genome, Genome]:
    if rng.random() >= rate:
        return a, b
    left, right = [], []
    for x, y in zip(a.slots, b.slots):
        if rng.random() < 0.5:
            left.append(x)
            right.append(y)
        else:
            left.append(y)
            right.append(x)
    return Genome(slots=tuple(left)), Genome(slots=tuple(right))


def _mutate(rng: random.Random, g: Genome, rate: float, n_symbols: int) -> Genome:
    slots = tuple(
        rng.randrange(n_symbols) if rng.random() < rate else s for s in g.slots
    )
    return Genome(slots=slots)


def ga_sample_rouge_space(
    ref: Sequence[str], vocab: Sequence[str], cfg: GAConfig, genome_len: int
) -> list[ParetoSample]:
    """Evolve a population maximizing (R1, R2, RL) against ``ref``.

    Non-dominated sorting with crowding keeps the trade-off surface; a fixed
    fraction of every generation is replaced by fresh random genomes so the
    final population keeps low- and mid-score members too.
    """
    if not vocab:
        raise ValueError("vocab must be non-empty")
    if genome_len < 1:
        raise ValueError("genome_len must be >= 1")
    rng = random.Random(cfg.seed)
    ref = tuple(ref)
    n_symbols = len(vocab) + 1  # final index is the empty slot
    mut_rate = cfg.mutation_rate if cfg.mutation_rate is not None else 1.0 / genome_len
    n_imm = max(1, round(IMMIGRANT_FRACTION * cfg.population))

    cache: dict[tuple[int, ...], tuple[float, float, float]] = {}

    def score(g: Genome) -> tuple[float, float, float]:
        if g.slots not in cache:
            cache[g.slots] = _score_text(ref, g.render(vocab))
        return cache[g.slots]

    population = [
        _random_genome(rng, genome_len, n_symbols) for _ in range(cfg.population)
    ]

    def rank_map(scores: Sequence[tuple[float, ...]]) -> tuple[dict[int, int], dict[int, float]]:
        fronts = _non_dominated_fronts(scores)
        ranks: dict[int, int] = {}
        crowd: dict[int, float] = {}
        for level, front in enumerate(fronts):
            for i in front:
                ranks[i] = level
            crowd.update(_crowding(front, scores))
        return ranks, crowd

    for _ in range(cfg.generations):
        scores = [score(g) for g in population]
        if cfg.objective_mode == "single_scalar":
            order = sorted(
                range(len(population)), key=lambda i: (-sum(scores[i]), i)
            )
            key = {i: pos for pos, i in enumerate(order)}

            def better(i: int, j: int) -> int:
                return i if key[i] < key[j] else j

        else:
            ranks, crowd = rank_map(scores)

            def better(i: int, j: int) -> int:
                if ranks[i] != ranks[j]:
                    return i if ranks[i] < ranks[j] else j
                if crowd[i] != crowd[j]:
                    return i if crowd[i] > crowd[j] else j
                return min(i, j)

        children: list[Genome] = []
        while len(children) < cfg.population:
            p1 = better(rng.randrange(len(population)), rng.randrange(len(population)))
            p2 = better(rng.randrange(len(population)), rng.randrange(len(population)))
            c1, c2 = _uniform_crossover(rng, population[p1], population[p2], cfg.crossover_rate)
            children.append(_mutate(rng, c1, mut_rate, n_symbols))
            if len(children) < cfg.population:
                children.append(_mutate(rng, c2, mut_rate, n_symbols))

        merged = population + children
        merged_scores = [score(g) for g in merged]
        survivors: list[Genome] = []
        n_keep = cfg.population - n_imm
        if cfg.objective_mode == "single_scalar":
            order = sorted(
                range(len(merged)), key=lambda i: (-sum(merged_scores[i]), i)
            )
            survivors = [merged[i] for i in order[:n_keep]]
        else:
            fronts = _non_dominated_fronts(merged_scores)
            for front in fronts:
                if len(survivors) + len(front) <= n_keep:
                    survivors.extend(merged[i] for i in sorted(front))
                    continue
                crowd = _crowding(front, merged_scores)
                chosen = sorted(front, key=lambda i: (-crowd[i], i))
                survivors.extend(merged[i] for i in chosen[: n_keep - len(survivors)])
                break
        population = survivors + [
            _random_genome(rng, genome_len, n_symbols) for _ in range(n_imm)
        ]

    out = []
    for g in population:
        text = g.render(vocab)
        r1, r2, rl = _score_text(ref, text)
        out.append(ParetoSample(text=text, r1=r1, r2=r2, rl=rl))
    return out


def pareto_front(samples: Sequence[ParetoSample]) -> list[ParetoSample]:
    """Members not dominated on (r1, r2, rl) by any other member."""
    triples = [(s.r1, s.r2, s.rl) for s in samples]
    return [
        s
        for i, s in enumerate(samples)
        if not any(j != i and _dominates(triples[j], triples[i]) for j in range(len(samples)))
    ]


def oracle_bag(doc: Sequence[str], ref: Sequence[str]) -> NGramBag:
    """Unigram bag intersection of the reference with the document."""
    return bag_combine("intersect", ngrams(tuple(ref), 1), ngrams(tuple(doc), 1))


def heuristic_bag(doc: Sequence[str], idf: TfIdfWeights, top_k: int) -> NGramBag:
    """Top-k document unigrams by tf*idf, counts capped at 2."""
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    tf = Counter(doc)
    ranked = sorted(tf, key=lambda t: (-tf[t] * idf.weight(t), t))
    counts = Counter({(t,): min(tf[t], 2) for t in ranked[:top_k]})
    return NGramBag(arity=1, counts=counts)


def bag_to_sequence(doc: Sequence[str], bag: NGramBag, c: int) -> tuple[str, ...]:
    """Extract salient contiguous document runs covering the bag.

    Each pass marks positions left to right while the bag still holds the
    token (marks reserve counts, so one pass never over-consumes), takes the
    longest marked run (ties leftmost), stops once runs drop below ``c``.
    """
    if bag.arity != 1:
        raise ValueError("bag must hold unigrams")
    if c < 1:
        raise ValueError("c must be >= 1")
    doc = tuple(doc)
    avail = Counter({gram[0]: cnt for gram, cnt in bag.counts.items()})
    out: list[str] = []
    while True:
        remaining = Counter(avail)
        marked = []
        for token in doc:
            if remaining[token] > 0:
                remaining[token] -= 1
                marked.append(True)
            else:
                marked.append(False)
        best_start, best_len = -1, 0
        i = 0
        while i < len(doc):
            if not marked[i]:
                i += 1
                continue
            j = i
            while j < len(doc) and marked[j]:
                j += 1
            if j - i > best_len:
                best_start, best_len = i, j - i
            i = j
        if best_len < c or best_len == 0:
            return tuple(out)
        run = doc[best_start : best_start + best_len]
        out.extend(run)
        for token in run:
            avail[token] -= 1
            if avail[token] <= 0:
                del avail[token]


def rouge_attack(
    doc: Sequence[str],
    ref: Sequence[str] | None,
    idf: TfIdfWeights | None,
    c: int,
    mode: str = "oracle",
    *,
    top_k: int = 16,
) -> tuple[tuple[str, ...], dict[str, MetricResult]]:
    """Reconstruct a scoring-bag cover from the document and score it.

    ``oracle`` mode intersects with the reference (upper-bound attack);
    ``heuristic`` ranks document words by tf*idf and never reads the
    reference (realistic floor).
    """
    if mode == "oracle":
        if ref is None:
            raise ValueError("oracle mode requires a reference")
        bag = oracle_bag(doc, ref)
    elif mode == "heuristic":
        if idf is None:
            raise ValueError("heuristic mode requires idf weights")
        bag = heuristic_bag(doc, idf, top_k)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    text = bag_to_sequence(doc, bag, c)
    scores: dict[str, MetricResult] = {}
    if ref is not None:
        ref_t = tuple(ref)
        scores["rouge1"] = rouge_n(1, ref_t, text)
        scores["rouge2"] = rouge_n(2, ref_t, text)
        scores["rougeL"] = rouge_l(ref_t, text)
        scores["meteor"] = meteor_lite(text, ref_t)
    return text, scores


def _check_alphabet(alphabet: Sequence[str]) -> None:
    if not alphabet:
        raise ValueError("alphabet must be non-empty")
    for tok in alphabet:
        if not tok or any(ch.isalnum() for ch in tok):
            raise ValueError(f"alphabet token {tok!r} contains alphanumeric characters")


@dataclass(frozen=True)
class TriggerRun:
    """Everything one universal-trigger optimization produced."""

    trigger: tuple[str, ...]
    round_targets: tuple[int, ...]
    round_traces: tuple[tuple[float, ...], ...]  # best fitness per generation
    final_scores: tuple[float, ...]  # trigger vs every ref


def ga_universal_trigger_run(
    refs: Sequence[Sequence[str]],
    scorer: Callable[[Sequence[str], Sequence[str]], float],
    alphabet: Sequence[str],
    cfg: GAConfig,
    trigger_len: int,
    fitness_threshold: float = 0.88,
    max_rounds: int = 5,
) -> TriggerRun:
    """Evolve one token sequence scoring high against every reference.

    Each round runs a tournament GA against the current target reference
    until the threshold or the generation budget; the next round targets the
    reference the current trigger handles worst.
    """
    _check_alphabet(alphabet)
    if not refs:
        raise ValueError("refs must be non-empty")
    if trigger_len < 1:
        raise ValueError("trigger_len must be >= 1")
    rng = random.Random(cfg.seed)
    mut_rate = cfg.mutation_rate if cfg.mutation_rate is not None else 1.0 / trigger_len
    refs = [tuple(r) for r in refs]

    def render(g: Genome) -> tuple[str, ...]:
        return tuple(alphabet[i] for i in g.slots)

    target = 0
    population = [
        Genome(slots=tuple(rng.randrange(len(alphabet)) for _ in range(trigger_len)))
        for _ in range(cfg.population)
    ]
    best_trigger: tuple[str, ...] | None = None
    best_min = -math.inf
    round_targets: list[int] = []
    round_traces: list[tuple[float, ...]] = []

    for _ in range(max_rounds):
        round_targets.append(target)
        ref = refs[target]
        fits = [scorer(render(g), ref) for g in population]
        trace: list[float] = []
        reached = False
        for _gen in range(cfg.generations):
            order = sorted(range(len(population)), key=lambda i: (-fits[i], i))
            trace.append(fits[order[0]])
            if fits[order[0]] >= fitness_threshold:
                reached = True
                break
            elites = [population[i] for i in order[: cfg.elitism]]
            children = list(elites)
            while len(children) < cfg.population:
                picks = [rng.randrange(len(population)) for _ in range(4)]
                p1 = max(picks[:2], key=lambda i: (fits[i], -i))
                p2 = max(picks[2:], key=lambda i: (fits[i], -i))
                c1, c2 = _uniform_crossover(
                    rng, population[p1], population[p2], cfg.crossover_rate
                )
                children.append(_mutate(rng, c1, mut_rate, len(alphabet)))
                if len(children) < cfg.population:
                    children.append(_mutate(rng, c2, mut_rate, len(alphabet)))
            population = children
            fits = [scorer(render(g), ref) for g in population]
        order = sorted(range(len(population)), key=lambda i: (-fits[i], i))
        if not reached:
            trace.append(fits[order[0]])
        round_traces.append(tuple(trace))

        # the champion steers the next round's target; the best trigger may be
        # any member, judged by its worst score across all references
        per_ref_all = {i: [scorer(render(population[i]), r) for r in refs] for i in order}
        for i in order:
            worst_i = min(per_ref_all[i])
            if worst_i > best_min:
                best_min = worst_i
                best_trigger = render(population[i])
        champion_scores = per_ref_all[order[0]]
        if best_min >= fitness_threshold:
            break
        target = min(range(len(refs)), key=lambda i: (champion_scores[i], i))

    final_scores = tuple(scorer(best_trigger, r) for r in refs)
    return TriggerRun(
        trigger=best_trigger,
        round_targets=tuple(round_targets),
        round_traces=tuple(round_traces),
        final_scores=final_scores,
    )


def ga_universal_trigger(
    refs: Sequence[Sequence[str]],
    scorer: Callable[[Sequence[str], Sequence[str]], float],
    alphabet: Sequence[str],
    cfg: GAConfig,
    trigger_len: int,
    fitness_threshold: float = 0.88,
    max_rounds: int = 5,
) -> tuple[str, ...]:
    run = ga_universal_trigger_run(
        refs, scorer, alphabet, cfg, trigger_len, fitness_threshold, max_rounds
    )
    return run.trigger


def backdoor_probe(
    candidate: Sequence[str],
    refs: Sequence[Sequence[str]],
    scorer: Callable[[Sequence[str], Sequence[str]], float],
) -> tuple[float, float, float]:
    """(mean, min, max) of the fixed candidate's score against every ref."""
    if not refs:
        raise ValueError("refs must be non-empty")
    scores = [scorer(tuple(candidate), tuple(r)) for r in refs]
    return (sum(scores) / len(scores), min(scores), max(scores))


@dataclass(frozen=True)
class SanitizePolicy:
    run_len: int = 5
    max_rep: int = 8
    min_ratio: float = 0.5


@dataclass(frozen=True)
class SanitizeReport:
    flags: tuple[Mapping, ...]
    passed: bool


def sanitize(text: str, policy: SanitizePolicy | None = None) -> SanitizeReport:
    """Surface checks for scrambled attack outputs.

    Flags: a run of >= run_len non-alphanumeric non-space characters, empty
    or whitespace-only text, any token repeated more than max_rep times, and
    a letter share of the non-space characters below min_ratio.
    """
    policy = policy or SanitizePolicy()
    flags: list[dict] = []
    if not text.strip():
        flags.append({"kind": "empty"})
        return SanitizeReport(flags=tuple(flags), passed=False)

    longest, current = 0, 0
    for ch in text:
        if not ch.isalnum() and not ch.isspace():
            current += 1
            longest = max(longest, current)
        else:
            current = 0
    if longest >= policy.run_len:
        flags.append({"kind": "non_alnum_run", "length": longest})

    counts = Counter(text.split())
    for token, cnt in sorted(counts.items()):
        if cnt > policy.max_rep:
            flags.append({"kind": "excessive_repetition", "token": token, "count": cnt})

    solid = [ch for ch in text if not ch.isspace()]
    ratio = sum(ch.isalpha() for ch in solid) / len(solid)
    if ratio < policy.min_ratio:
        flags.append({"kind": "low_letter_ratio", "ratio": ratio})

    return SanitizeReport(flags=tuple(flags), passed=not flags)
