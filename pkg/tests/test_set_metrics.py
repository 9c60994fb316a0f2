import math
import random
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from simforge.set_metrics import (
    CountIndex,
    bag_coefficient,
    build_count_index,
    jaccard_dice_convert,
    ngd,
)
from simforge.text_core import NGramBag, ngrams

token = st.sampled_from(["a", "b", "c", "d", "e"])
bag_strategy = st.lists(token, max_size=10).map(lambda xs: ngrams(tuple(xs), 1))


def random_bag(rng: random.Random, alphabet="abcdef", max_len=12) -> NGramBag:
    toks = [rng.choice(alphabet) for _ in range(rng.randint(0, max_len))]
    return ngrams(tuple(toks), 1)


class TestCoefficients:
    def test_identity_is_one(self):
        b = ngrams(("a", "b"), 1)
        for kind in ("jaccard_set", "dice", "ochiai", "overlap", "tversky"):
            assert bag_coefficient(kind, b, b) == 1.0

    def test_jaccard_bag_uses_size_sum_denominator(self):
        b = ngrams(("a", "b"), 1)
        assert bag_coefficient("jaccard_bag", b, b) == 0.5

    def test_empty_conventions(self):
        empty = ngrams((), 1)
        full = ngrams(("a",), 1)
        for kind in ("jaccard_set", "jaccard_bag", "dice", "ochiai", "overlap", "tversky"):
            assert bag_coefficient(kind, empty, empty) == 1.0
            assert bag_coefficient(kind, empty, full) == 0.0
            assert bag_coefficient(kind, full, empty) == 0.0

    def test_tversky_identities_on_random_bags(self):
        rng = random.Random(7)
        for _ in range(200):
            a, b = random_bag(rng), random_bag(rng)
            assert bag_coefficient("tversky", a, b, alpha=1.0, beta=1.0) == pytest.approx(
                bag_coefficient("jaccard_set", a, b), abs=1e-12
            )
            assert bag_coefficient("tversky", a, b, alpha=0.5, beta=0.5) == pytest.approx(
                bag_coefficient("dice", a, b), abs=1e-12
            )

    def test_tversky_bag_semantics(self):
        # {a:2} vs {a:1}: intersection 1, only_a 1 under raw counts
        a = ngrams(("a", "a"), 1)
        b = ngrams(("a",), 1)
        assert bag_coefficient("tversky", a, b, collapse=False) == pytest.approx(0.5)
        assert bag_coefficient("tversky", a, b) == 1.0  # collapsed: identical sets

    def test_tversky_asymmetry(self):
        a = ngrams(("a", "b", "c"), 1)
        b = ngrams(("a",), 1)
        s_ab = bag_coefficient("tversky", a, b, alpha=1.0, beta=0.0)
        s_ba = bag_coefficient("tversky", b, a, alpha=1.0, beta=0.0)
        assert s_ab != s_ba

    def test_negative_parameters_rejected(self):
        b = ngrams(("a",), 1)
        with pytest.raises(ValueError):
            bag_coefficient("tversky", b, b, alpha=-1.0)

    def test_arity_mismatch(self):
        with pytest.raises(ValueError):
            bag_coefficient("dice", ngrams(("a", "b"), 1), ngrams(("a", "b"), 2))

    @given(bag_strategy, bag_strategy)
    def test_bounded_and_symmetric(self, a, b):
        for kind in ("jaccard_set", "jaccard_bag", "dice", "ochiai", "overlap"):
            s = bag_coefficient(kind, a, b)
            assert 0.0 <= s <= 1.0
            assert s == bag_coefficient(kind, b, a)


class TestConversion:
    def test_fixed_points(self):
        assert jaccard_dice_convert(1.0, "dice_to_jaccard") == 1.0
        assert jaccard_dice_convert(0.0, "jaccard_to_dice") == 0.0

    def test_round_trip(self):
        for i in range(101):
            x = i / 100
            j = jaccard_dice_convert(x, "dice_to_jaccard")
            assert jaccard_dice_convert(j, "jaccard_to_dice") == pytest.approx(x, abs=1e-12)

    def test_dice_converts_to_direct_jaccard(self):
        rng = random.Random(11)
        for _ in range(100):
            a, b = random_bag(rng), random_bag(rng)
            dice = bag_coefficient("dice", a, b)
            jac = bag_coefficient("jaccard_set", a, b)
            assert jaccard_dice_convert(dice, "dice_to_jaccard") == pytest.approx(jac, abs=1e-12)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            jaccard_dice_convert(1.5, "dice_to_jaccard")


class TestCountIndex:
    def test_direct_count(self):
        idx = build_count_index([("a", "b"), ("a",)])
        assert idx.doc_count == Counter({"a": 2, "b": 1})
        assert idx.pair_count == Counter({("a", "b"): 1})
        assert idx.total_docs == 2

    def test_empty_corpus(self):
        idx = build_count_index([])
        assert idx.total_docs == 0
        assert not idx.doc_count and not idx.pair_count

    def test_five_doc_hand_enumeration(self):
        corpus = [
            ("x", "y", "z"),
            ("x", "y"),
            ("y", "z", "z"),
            ("w",),
            ("x", "w"),
        ]
        idx = build_count_index(corpus)
        assert idx.doc_count == Counter({"x": 3, "y": 3, "z": 2, "w": 2})
        assert idx.pair_count == Counter(
            {("x", "y"): 2, ("x", "z"): 1, ("y", "z"): 2, ("w", "x"): 1}
        )

    def test_vocabulary_filter(self):
        idx = build_count_index([("a", "b", "c")], vocabulary={"a", "b"})
        assert idx.doc_count == Counter({"a": 1, "b": 1})
        assert idx.pair_count == Counter({("a", "b"): 1})

    def test_pair_lookup_is_unordered_and_self_pair_is_doc_count(self):
        idx = build_count_index([("a", "b"), ("b", "a")])
        assert idx.pair("a", "b") == idx.pair("b", "a") == 2
        assert idx.pair("a", "a") == 2

    def test_tsv_round_trip(self, tmp_path):
        idx = build_count_index([("a", "b"), ("a", "c"), ("b", "c", "a")])
        path = tmp_path / "counts.tsv"
        idx.save_tsv(path)
        loaded = CountIndex.load_tsv(path)
        assert loaded == idx


class TestNgd:
    def test_self_distance_zero(self):
        idx = build_count_index([("x", "y"), ("x",), ("z",)])
        assert ngd("x", "x", idx) == 0.0

    def test_perfect_cooccurrence(self):
        idx = build_count_index([("a", "b"), ("a", "b"), ("c",)])
        assert ngd("a", "b", idx) == 0.0

    def test_plugged_counts(self):
        # g(x)=4, g(y)=2, g(xy)=1, G=16 -> (log 4 - log 1)/(log 16 - log 2) = 2/3
        idx = CountIndex(
            doc_count=Counter({"x": 4, "y": 2}),
            pair_count=Counter({("x", "y"): 1}),
            total_docs=16,
        )
        assert ngd("x", "y", idx) == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_base_invariance(self):
        idx = CountIndex(
            doc_count=Counter({"x": 5, "y": 3}),
            pair_count=Counter({("x", "y"): 2}),
            total_docs=40,
        )
        got = ngd("x", "y", idx)
        base2 = (max(math.log2(5), math.log2(3)) - math.log2(2)) / (
            math.log2(40) - min(math.log2(5), math.log2(3))
        )
        assert got == pytest.approx(base2, abs=1e-12)

    def test_zero_counts_error(self):
        idx = build_count_index([("a",), ("b",)])
        with pytest.raises(ValueError):
            ngd("a", "missing", idx)
        with pytest.raises(ValueError):
            ngd("a", "b", idx)  # never co-occur

    def test_symmetry(self):
        idx = build_count_index([("a", "b"), ("a",), ("b",), ("a", "b", "c")])
        assert ngd("a", "b", idx) == ngd("b", "a", idx)
