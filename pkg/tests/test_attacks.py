"""GA samplers, bag reconstruction attacks, trigger search, and the sanitizer."""

import json
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simforge.attacks import (
    GAConfig,
    Genome,
    ParetoSample,
    SanitizePolicy,
    backdoor_probe,
    bag_to_sequence,
    ga_sample_rouge_space,
    ga_universal_trigger,
    ga_universal_trigger_run,
    heuristic_bag,
    oracle_bag,
    pareto_front,
    rouge_attack,
    sanitize,
)
from simforge.embeddings import TfIdfWeights, hashed_embeddings
from simforge.lexical_metrics import meteor_lite, rouge_l, rouge_n
from simforge.text_core import NGramBag, ngrams
from simforge.vector_metrics import embed_f1

REF = tuple(
    "the quick brown fox jumps over the lazy dog while rain falls on "
    "quiet streets and children watch from bright windows".split()
)
FILLER = tuple(f"pad{i:02d}" for i in range(80))
VOCAB = tuple(sorted(set(REF))) + FILLER


def embed_scorer(table):
    seen = {}

    def vec(token):
        if token not in seen:
            seen[token] = table.lookup(token)
        return seen[token]

    def score(hyp, ref):
        return embed_f1([vec(t) for t in hyp], [vec(t) for t in ref]).value

    return score


class TestGenome:
    def test_render_drops_empty_slots(self):
        vocab = ["a", "b", "c"]
        g = Genome(slots=(0, 3, 2, 3, 1))
        assert g.render(vocab) == ("a", "c", "b")

    def test_render_all_empty(self):
        assert Genome(slots=(2, 2)).render(["x", "y"]) == ()


class TestGAConfig:
    def test_defaults(self):
        cfg = GAConfig()
        assert cfg.population == 50
        assert cfg.generations == 200
        assert cfg.mutation_rate is None
        assert cfg.crossover_rate == 0.9
        assert cfg.elitism == 1
        assert cfg.objective_mode == "multi_rouge"

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"population": 1},
            {"generations": 0},
            {"mutation_rate": 0.0},
            {"mutation_rate": 1.0},
            {"crossover_rate": 1.0},
            {"elitism": 0},
            {"elitism": 10, "population": 10},
            {"objective_mode": "tri_objective"},
        ],
    )
    def test_rejects_bad_fields(self, kwargs):
        with pytest.raises(ValueError):
            GAConfig(**kwargs)


class TestSampler:
    def test_deterministic_for_fixed_seed(self):
        cfg = GAConfig(population=8, generations=10, seed=3)
        a = ga_sample_rouge_space(REF[:6], VOCAB[:20], cfg, genome_len=10)
        b = ga_sample_rouge_space(REF[:6], VOCAB[:20], cfg, genome_len=10)
        assert a == b

    def test_seed_changes_population(self):
        base = GAConfig(population=8, generations=10, seed=3)
        other = GAConfig(population=8, generations=10, seed=4)
        a = ga_sample_rouge_space(REF[:6], VOCAB[:20], base, genome_len=10)
        b = ga_sample_rouge_space(REF[:6], VOCAB[:20], other, genome_len=10)
        assert a != b

    def test_disjoint_vocab_scores_zero(self):
        cfg = GAConfig(population=6, generations=5, seed=0)
        samples = ga_sample_rouge_space(
            ("aa", "bb", "cc"), ("zz1", "zz2", "zz3"), cfg, genome_len=6
        )
        assert all(s.r1 == s.r2 == s.rl == 0.0 for s in samples)

    def test_full_run_reaches_high_overlap_and_stays_consistent(self):
        # Desk-scale full run shared by several checks to keep runtime down.
        ref = REF[:20]
        cfg = GAConfig(population=50, generations=200, seed=11)
        samples = ga_sample_rouge_space(ref, VOCAB, cfg, genome_len=40)
        assert len(samples) == 50
        assert max(s.r1 for s in samples) >= 0.8
        for s in samples:
            assert 0.0 <= s.r1 <= 1.0
            assert 0.0 <= s.r2 <= 1.0
            assert 0.0 <= s.rl <= 1.0
            assert s.r1 == pytest.approx(rouge_n(1, ref, s.text).value, abs=1e-12)
            assert s.r2 == pytest.approx(rouge_n(2, ref, s.text).value, abs=1e-12)
            assert s.rl == pytest.approx(rouge_l(ref, s.text).value, abs=1e-12)
        front = pareto_front(samples)
        assert front
        triples = [(s.r1, s.r2, s.rl) for s in samples]
        for member in front:
            mt = (member.r1, member.r2, member.rl)
            for other in triples:
                dominates = all(o >= m for o, m in zip(other, mt)) and any(
                    o > m for o, m in zip(other, mt)
                )
                assert not dominates
        # immigrant slots keep weak members around, so the spread stays wide
        assert max(s.r1 for s in samples) - min(s.r1 for s in samples) >= 0.5

    def test_single_scalar_mode_runs_deterministically(self):
        cfg = GAConfig(
            population=8, generations=12, seed=5, objective_mode="single_scalar"
        )
        a = ga_sample_rouge_space(REF[:6], VOCAB[:20], cfg, genome_len=10)
        b = ga_sample_rouge_space(REF[:6], VOCAB[:20], cfg, genome_len=10)
        assert a == b

    def test_rejects_empty_vocab_and_bad_length(self):
        cfg = GAConfig(population=4, generations=2)
        with pytest.raises(ValueError):
            ga_sample_rouge_space(REF[:4], (), cfg, genome_len=4)
        with pytest.raises(ValueError):
            ga_sample_rouge_space(REF[:4], VOCAB[:8], cfg, genome_len=0)


class TestParetoFront:
    def test_hand_fixture(self):
        samples = [
            ParetoSample(text=("a",), r1=1.0, r2=0.0, rl=0.0),
            ParetoSample(text=("b",), r1=0.0, r2=1.0, rl=0.0),
            ParetoSample(text=("c",), r1=0.5, r2=0.5, rl=0.5),
            ParetoSample(text=("d",), r1=0.4, r2=0.4, rl=0.4),
        ]
        front = pareto_front(samples)
        assert samples[0] in front and samples[1] in front and samples[2] in front
        assert samples[3] not in front

    def test_duplicates_both_survive(self):
        twin = ParetoSample(text=("a",), r1=0.5, r2=0.5, rl=0.5)
        assert len(pareto_front([twin, twin])) == 2


class TestOracleBag:
    def test_ref_inside_doc_recovers_ref_bag(self):
        ref = ("cats", "sleep", "cats")
        doc = ("most", "cats", "sleep", "all", "day", "cats", "cats")
        assert oracle_bag(doc, ref).counts == ngrams(ref, 1).counts

    def test_disjoint_is_empty(self):
        assert oracle_bag(("a", "b"), ("c", "d")).size == 0

    def test_random_pairs_match_counter_min(self):
        rng = random.Random(9)
        vocab = ["w%d" % i for i in range(12)]
        for _ in range(100):
            doc = tuple(rng.choice(vocab) for _ in range(rng.randint(0, 30)))
            ref = tuple(rng.choice(vocab) for _ in range(rng.randint(0, 15)))
            expect = Counter(doc) & Counter(ref)
            got = {g[0]: c for g, c in oracle_bag(doc, ref).counts.items()}
            assert got == dict(expect)


class TestHeuristicBag:
    def test_uniform_idf_ranks_by_frequency(self):
        doc = ("b", "a", "b", "c", "b", "a")
        idf = TfIdfWeights(idf={t: 1.0 for t in doc}, doc_count=4)
        bag = heuristic_bag(doc, idf, top_k=2)
        assert bag.counts == Counter({("b",): 2, ("a",): 2})

    def test_counts_capped_at_two(self):
        doc = ("x",) * 7 + ("y",)
        idf = TfIdfWeights(idf={"x": 1.0, "y": 1.0}, doc_count=4)
        bag = heuristic_bag(doc, idf, top_k=5)
        assert bag.counts == Counter({("x",): 2, ("y",): 1})

    def test_hand_ranked_fixture(self):
        # tf*idf: miners 2*3=6, gold 3*1.5=4.5, the 4*0.1=0.4, creek 1*3=3
        doc = (
            "the", "gold", "miners", "the", "gold", "creek",
            "the", "miners", "gold", "the",
        )
        idf = TfIdfWeights(
            idf={"the": 0.1, "gold": 1.5, "miners": 3.0, "creek": 3.0}, doc_count=10
        )
        bag = heuristic_bag(doc, idf, top_k=3)
        assert bag.counts == Counter({("miners",): 2, ("gold",): 2, ("creek",): 1})

    def test_tie_breaks_token_ascending(self):
        doc = ("zeta", "alpha")
        idf = TfIdfWeights(idf={"zeta": 2.0, "alpha": 2.0}, doc_count=4)
        bag = heuristic_bag(doc, idf, top_k=1)
        assert bag.counts == Counter({("alpha",): 1})

    def test_rejects_bad_top_k(self):
        idf = TfIdfWeights(idf={}, doc_count=1)
        with pytest.raises(ValueError):
            heuristic_bag(("a",), idf, top_k=0)


def unigram_bag(counts: dict) -> NGramBag:
    return NGramBag(arity=1, counts=Counter({(t,): c for t, c in counts.items()}))


def is_run_concatenation(out, doc, c):
    """True when ``out`` splits into contiguous doc substrings, each >= c long."""
    n = len(out)
    ok = [False] * (n + 1)
    ok[n] = True
    for start in range(n - 1, -1, -1):
        for end in range(start + c, n + 1):
            piece = out[start:end]
            hit = any(
                doc[k : k + len(piece)] == piece for k in range(len(doc) - len(piece) + 1)
            )
            if hit and ok[end]:
                ok[start] = True
                break
    return ok[0]


class TestBagToSequence:
    def test_single_run_hand_trace(self):
        doc = ("a", "b", "c", "d")
        assert bag_to_sequence(doc, unigram_bag({"a": 1, "b": 1, "c": 1}), 3) == (
            "a", "b", "c",
        )

    def test_disjoint_bag_is_empty(self):
        assert bag_to_sequence(("a", "b"), unigram_bag({"z": 2}), 1) == ()

    def test_cutoff_one_full_bag_returns_doc(self):
        doc = ("to", "be", "or", "not", "to", "be")
        bag = ngrams(doc, 1)
        assert bag_to_sequence(doc, bag, 1) == doc

    def test_two_pass_hand_trace(self):
        # pass 1 takes the later, longer run; pass 2 the remaining short one
        doc = ("x", "a", "b", "y", "a", "b", "c")
        out = bag_to_sequence(doc, unigram_bag({"a": 2, "b": 2, "c": 1}), 2)
        assert out == ("a", "b", "c", "a", "b")

    def test_tied_runs_take_leftmost_first(self):
        doc = ("c", "d", "x", "a", "b")
        out = bag_to_sequence(doc, unigram_bag({"a": 1, "b": 1, "c": 1, "d": 1}), 2)
        assert out == ("c", "d", "a", "b")

    def test_cutoff_stops_short_runs(self):
        doc = ("a", "x", "b", "x", "c")
        out = bag_to_sequence(doc, unigram_bag({"a": 1, "b": 1, "c": 1}), 2)
        assert out == ()

    def test_marking_reserves_counts(self):
        # only one "a" available: the second occurrence must stay unmarked,
        # otherwise the output bag would exceed the budget
        doc = ("a", "b", "a", "b")
        out = bag_to_sequence(doc, unigram_bag({"a": 1, "b": 2}), 1)
        assert Counter(out) == Counter({"a": 1, "b": 2})

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            bag_to_sequence(("a",), ngrams(("a", "b"), 2), 1)
        with pytest.raises(ValueError):
            bag_to_sequence(("a",), unigram_bag({"a": 1}), 0)

    @given(
        doc=st.lists(st.sampled_from("abcde"), max_size=18).map(tuple),
        budget=st.dictionaries(
            st.sampled_from("abcde"), st.integers(min_value=1, max_value=3), max_size=5
        ),
        c=st.integers(min_value=1, max_value=4),
    )
    @settings(max_examples=200, deadline=None)
    def test_output_bag_within_budget_and_runs_contiguous(self, doc, budget, c):
        out = bag_to_sequence(doc, unigram_bag(budget), c)
        bag = Counter(out)
        assert all(bag[t] <= budget.get(t, 0) for t in bag)
        assert is_run_concatenation(out, doc, c)


class TestRougeAttack:
    def test_oracle_cutoff_one_recovers_full_overlap(self):
        ref = ("storms", "hit", "the", "coast")
        doc = ("the", "storms", "hit", "early", "and", "the", "coast", "flooded")
        text, scores = rouge_attack(doc, ref, None, c=1, mode="oracle")
        assert scores["rouge1"].value == pytest.approx(1.0)
        assert Counter(text) == Counter(ref)

    def test_scores_match_direct_recomputation(self):
        ref = REF[:12]
        doc = REF[2:26]
        text, scores = rouge_attack(doc, ref, None, c=2, mode="oracle")
        assert scores["rouge1"].value == pytest.approx(
            rouge_n(1, ref, text).value, abs=1e-12
        )
        assert scores["rouge2"].value == pytest.approx(
            rouge_n(2, ref, text).value, abs=1e-12
        )
        assert scores["rougeL"].value == pytest.approx(
            rouge_l(ref, text).value, abs=1e-12
        )
        assert scores["meteor"].value == pytest.approx(
            meteor_lite(text, ref).value, abs=1e-12
        )

    def test_smaller_cutoff_never_scores_lower(self):
        rng = random.Random(21)
        vocab = ["w%d" % i for i in range(8)]
        for _ in range(100):
            doc = tuple(rng.choice(vocab) for _ in range(30))
            ref = tuple(rng.choice(vocab) for _ in range(10))
            _, loose = rouge_attack(doc, ref, None, c=3, mode="oracle")
            _, tight = rouge_attack(doc, ref, None, c=4, mode="oracle")
            assert loose["rouge1"].value >= tight["rouge1"].value - 1e-12

    def test_heuristic_ignores_reference(self):
        doc = ("the", "gold", "miners", "left", "the", "creek", "at", "dawn")
        idf = TfIdfWeights(
            idf={t: 1.0 + i * 0.3 for i, t in enumerate(sorted(set(doc)))},
            doc_count=8,
        )
        text_none, scores_none = rouge_attack(doc, None, idf, c=1, mode="heuristic")
        text_ref, _ = rouge_attack(doc, ("gold", "dawn"), idf, c=1, mode="heuristic")
        text_other, _ = rouge_attack(doc, ("creek",), idf, c=1, mode="heuristic")
        assert text_none == text_ref == text_other
        assert scores_none == {}

    def test_oracle_without_ref_raises(self):
        with pytest.raises(ValueError):
            rouge_attack(("a",), None, None, c=1, mode="oracle")

    def test_heuristic_without_idf_raises(self):
        with pytest.raises(ValueError):
            rouge_attack(("a",), ("a",), None, c=1, mode="heuristic")

    def test_unknown_mode_raises(self):
        with pytest.raises(ValueError):
            rouge_attack(("a",), ("a",), None, c=1, mode="neural")


ALPHABET = ("#", "@", "%", "&", "*", "~", "^", "!", "?", ";")
# five summaries of one event share most of their vocabulary
TRIGGER_REFS = [
    ("storm", "flood", "river", "coast"),
    ("flood", "river", "rain", "wind"),
    ("storm", "river", "rain", "coast"),
    ("flood", "coast", "rain", "wind"),
    ("storm", "flood", "wind", "rain"),
]


class TestUniversalTrigger:
    def test_rejects_bad_alphabet(self):
        cfg = GAConfig(population=4, generations=2)
        scorer = embed_scorer(hashed_embeddings(dim=8, seed=1))
        with pytest.raises(ValueError):
            ga_universal_trigger(TRIGGER_REFS, scorer, (), cfg, trigger_len=3)
        with pytest.raises(ValueError):
            ga_universal_trigger(
                TRIGGER_REFS, scorer, ("#", "a1"), cfg, trigger_len=3
            )

    def test_rejects_empty_refs_and_bad_length(self):
        cfg = GAConfig(population=4, generations=2)
        scorer = embed_scorer(hashed_embeddings(dim=8, seed=1))
        with pytest.raises(ValueError):
            ga_universal_trigger([], scorer, ALPHABET, cfg, trigger_len=3)
        with pytest.raises(ValueError):
            ga_universal_trigger(TRIGGER_REFS, scorer, ALPHABET, cfg, trigger_len=0)

    def test_output_tokens_drawn_from_alphabet(self):
        cfg = GAConfig(population=6, generations=8, seed=2)
        scorer = embed_scorer(hashed_embeddings(dim=8, seed=1))
        trigger = ga_universal_trigger(
            TRIGGER_REFS, scorer, ALPHABET, cfg, trigger_len=6
        )
        assert len(trigger) == 6
        assert set(trigger) <= set(ALPHABET)

    def test_deterministic_for_fixed_seed(self):
        cfg = GAConfig(population=6, generations=8, seed=2)
        scorer = embed_scorer(hashed_embeddings(dim=8, seed=1))
        a = ga_universal_trigger_run(TRIGGER_REFS, scorer, ALPHABET, cfg, 6)
        b = ga_universal_trigger_run(TRIGGER_REFS, scorer, ALPHABET, cfg, 6)
        assert a == b

    def test_elitism_keeps_round_traces_non_decreasing(self):
        cfg = GAConfig(population=8, generations=25, seed=4)
        scorer = embed_scorer(hashed_embeddings(dim=8, seed=1))
        run = ga_universal_trigger_run(TRIGGER_REFS, scorer, ALPHABET, cfg, 6)
        assert run.round_targets[0] == 0
        for trace in run.round_traces:
            assert all(b >= a - 1e-12 for a, b in zip(trace, trace[1:]))

    def test_final_scores_cover_every_ref(self):
        cfg = GAConfig(population=6, generations=10, seed=7)
        scorer = embed_scorer(hashed_embeddings(dim=8, seed=1))
        run = ga_universal_trigger_run(TRIGGER_REFS, scorer, ALPHABET, cfg, 5)
        assert len(run.final_scores) == len(TRIGGER_REFS)
        for got, ref in zip(run.final_scores, TRIGGER_REFS):
            assert got == pytest.approx(scorer(run.trigger, ref), abs=1e-12)

    def test_beats_random_baseline_on_average(self):
        table = hashed_embeddings(dim=8, seed=1)
        scorer = embed_scorer(table)
        evolved, baseline = [], []
        for seed in range(2):
            cfg = GAConfig(population=10, generations=60, seed=seed)
            run = ga_universal_trigger_run(
                TRIGGER_REFS, scorer, ALPHABET, cfg, trigger_len=6
            )
            evolved.append(min(run.final_scores))
            rng = random.Random(1000 + seed)
            rand = tuple(rng.choice(ALPHABET) for _ in range(6))
            baseline.append(min(scorer(rand, r) for r in TRIGGER_REFS))
        assert sum(evolved) / len(evolved) > sum(baseline) / len(baseline)


class TestBackdoorProbe:
    def test_candidate_equal_to_ref_scores_one(self):
        scorer = embed_scorer(hashed_embeddings(dim=8, seed=3))
        mean, lo, hi = backdoor_probe(TRIGGER_REFS[0], TRIGGER_REFS, scorer)
        assert hi == pytest.approx(1.0)
        assert lo <= mean <= hi

    def test_reproducible_for_fixed_hash_seed(self):
        scorer = embed_scorer(hashed_embeddings(dim=8, seed=3))
        a = backdoor_probe((".",), TRIGGER_REFS, scorer)
        b = backdoor_probe((".",), TRIGGER_REFS, scorer)
        assert a == b

    def test_matches_direct_statistics(self):
        scorer = embed_scorer(hashed_embeddings(dim=8, seed=3))
        scores = [scorer((".",), r) for r in TRIGGER_REFS]
        mean, lo, hi = backdoor_probe((".",), TRIGGER_REFS, scorer)
        assert mean == pytest.approx(sum(scores) / len(scores))
        assert lo == pytest.approx(min(scores))
        assert hi == pytest.approx(max(scores))

    def test_rejects_empty_refs(self):
        with pytest.raises(ValueError):
            backdoor_probe((".",), [], lambda t, r: 0.0)


class TestSanitize:
    def test_scrambled_symbol_run_flagged(self):
        report = sanitize("normal text then \x03\x18$$$$.. tail")
        kinds = {f["kind"] for f in report.flags}
        assert "non_alnum_run" in kinds
        assert not report.passed

    def test_clean_sentence_passes(self):
        report = sanitize("The cat sat.")
        assert report.passed
        assert report.flags == ()

    def test_empty_and_whitespace_only(self):
        for text in ("", "   \t\n"):
            report = sanitize(text)
            assert [f["kind"] for f in report.flags] == ["empty"]
            assert not report.passed

    def test_excessive_repetition_counted(self):
        report = sanitize(("word " * 12).strip())
        flags = [f for f in report.flags if f["kind"] == "excessive_repetition"]
        assert flags == [{"kind": "excessive_repetition", "token": "word", "count": 12}]
        assert not report.passed

    def test_repetition_at_limit_passes(self):
        assert sanitize(("word " * 8).strip()).passed

    def test_low_letter_ratio(self):
        report = sanitize("a 1 2 3 4")
        flags = [f for f in report.flags if f["kind"] == "low_letter_ratio"]
        assert len(flags) == 1
        assert flags[0]["ratio"] == pytest.approx(0.2)

    def test_run_below_threshold_passes(self):
        assert sanitize("odd $$$$ spill").passed

    def test_policy_overrides(self):
        assert not sanitize("odd $$$ spill", SanitizePolicy(run_len=3)).passed
        assert not sanitize(("word " * 4).strip(), SanitizePolicy(max_rep=3)).passed

    def test_flags_are_json_serializable(self):
        report = sanitize("!!!!!!! $$$$$ word word word")
        json.dumps([dict(f) for f in report.flags])

    @given(st.text(max_size=60))
    @settings(max_examples=150, deadline=None)
    def test_passed_iff_no_flags(self, text):
        report = sanitize(text)
        assert report.passed == (len(report.flags) == 0)
