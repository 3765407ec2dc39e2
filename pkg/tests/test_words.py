import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from furstat.errors import MalformedInputError
from furstat.words import (
    GroupWord,
    StepDistribution,
    enumerate_words,
    inverse,
    multiply,
    reduce,
    words_up_to_length,
)


def W(text, rank=2):
    return GroupWord.parse(text, rank)


def raw_letters(rank, max_len=20):
    letter = st.integers(1, rank).flatmap(lambda i: st.sampled_from([i, -i]))
    return st.lists(letter, max_size=max_len)


class TestReduce:
    def test_cancellation(self):
        assert reduce([1, -1], 2).is_identity

    def test_inner_cancellation(self):
        assert reduce([1, 2, -2, 1], 2).letters == (1, 1)

    def test_already_reduced(self):
        assert reduce([2], 2) == W("b")

    def test_nested_cancellation(self):
        assert reduce([1, 2, -2, -1, 2], 2) == W("b")

    @pytest.mark.parametrize("letters", [[3], [0], [-3], [1, 5]])
    def test_letter_out_of_range(self, letters):
        with pytest.raises(MalformedInputError):
            reduce(letters, 2)

    @given(raw_letters(3))
    def test_idempotent(self, letters):
        once = reduce(letters, 3)
        assert reduce(list(once.letters), 3) == once

    @given(raw_letters(3))
    def test_result_has_no_adjacent_inverse_pair(self, letters):
        w = reduce(letters, 3).letters
        assert all(x != -y for x, y in zip(w, w[1:]))


class TestMultiply:
    def test_inverses(self):
        assert (W("a") * W("a^-1")).is_identity

    def test_partial_cancellation(self):
        assert W("a b") * W("b^-1 a") == W("a a")

    def test_identity_left(self):
        assert GroupWord.identity(2) * W("b") == W("b")

    def test_rank_mismatch(self):
        with pytest.raises(MalformedInputError):
            multiply(W("a", 2), W("a", 3))

    @settings(max_examples=200)
    @given(raw_letters(2), raw_letters(2), raw_letters(2))
    def test_associative(self, x, y, z):
        u, v, w = reduce(x, 2), reduce(y, 2), reduce(z, 2)
        assert (u * v) * w == u * (v * w)

    @given(raw_letters(2))
    def test_multiply_matches_reduce_of_concatenation(self, x):
        u = reduce(x, 2)
        assert u * u == reduce(x + x, 2)


class TestInverse:
    def test_word(self):
        assert inverse(W("a b")) == W("b^-1 a^-1")

    def test_identity(self):
        assert inverse(GroupWord.identity(2)).is_identity

    def test_generator(self):
        assert ~W("a") == W("a^-1")

    @settings(max_examples=300)
    @given(raw_letters(3, 20))
    def test_right_and_left_inverse(self, x):
        u = reduce(x, 3)
        assert (u * inverse(u)).is_identity
        assert (inverse(u) * u).is_identity


class TestEnumeration:
    def test_rank2_first_five(self):
        assert [str(w) for w in enumerate_words(2, 5)] == ["e", "a", "a^-1", "b", "b^-1"]

    def test_rank1_first_three(self):
        assert [str(w) for w in enumerate_words(1, 3)] == ["e", "a", "a^-1"]

    def test_rank2_sixth_is_aa(self):
        assert enumerate_words(2, 6)[5] == W("a a")

    def test_length_two_layer_order(self):
        layer = [str(w) for w in enumerate_words(2, 17)[5:]]
        assert layer == ["a a", "a b", "a b^-1", "a^-1 a^-1", "a^-1 b", "a^-1 b^-1",
                         "b a", "b a^-1", "b b", "b^-1 a", "b^-1 a^-1", "b^-1 b^-1"]

    @pytest.mark.parametrize("rank", [1, 2, 3])
    def test_prefix_property(self, rank):
        for k in range(1, 40):
            assert enumerate_words(rank, k) == enumerate_words(rank, k + 1)[:k]

    @pytest.mark.parametrize("rank", [1, 2, 3])
    def test_layer_sizes(self, rank):
        words = words_up_to_length(rank, 3)
        for n in range(4):
            expected = 1 if n == 0 else 2 * rank * (2 * rank - 1) ** (n - 1)
            assert sum(1 for w in words if len(w) == n) == expected

    def test_all_distinct_and_reduced(self):
        words = enumerate_words(3, 500)
        assert len(set(words)) == 500
        assert all(reduce(list(w.letters), 3) == w for w in words)

    def test_count_must_be_positive(self):
        with pytest.raises(MalformedInputError):
            enumerate_words(2, 0)


class TestTextForm:
    @pytest.mark.parametrize("text", ["e", "a", "a b^-1 a", "c^-1 b", "a^-1 a^-1"])
    def test_round_trip(self, text):
        assert str(GroupWord.parse(text, 3)) == text

    def test_glued_tokens(self):
        assert GroupWord.parse("ab^-1", 2) == W("a b^-1")

    def test_parse_reduces(self):
        assert GroupWord.parse("a b b^-1", 2) == W("a")

    def test_generator_name_skips_identity_symbol(self):
        assert str(GroupWord.generator(5, 5)) == "f"

    def test_bad_generator(self):
        with pytest.raises(MalformedInputError):
            GroupWord.parse("a z", 2)


class TestStepDistribution:
    def test_uniform(self):
        m = StepDistribution.uniform(2)
        assert [str(w) for w in m.support] == ["a", "a^-1", "b", "b^-1"]
        assert all(m.prob(w) == 0.25 for w in m.support)
        assert m.is_nearest_neighbor

    def test_sum_must_be_one(self):
        with pytest.raises(MalformedInputError):
            StepDistribution.from_pairs([("a", 0.5), ("b", 0.4)], 2)

    def test_sum_tolerance(self):
        StepDistribution.from_pairs([("a", 0.5), ("b", 0.5 + 5e-13)], 2)

    def test_positive(self):
        with pytest.raises(MalformedInputError):
            StepDistribution.from_pairs([("a", 1.0), ("b", 0.0)], 2)

    def test_distinct_after_reduction(self):
        with pytest.raises(MalformedInputError):
            StepDistribution.from_pairs([("a", 0.5), ("a b b^-1", 0.5)], 2)

    def test_non_nearest_neighbor(self):
        m = StepDistribution.from_pairs([("a b", 0.5), ("b^-1 a^-1", 0.5)], 2)
        assert not m.is_nearest_neighbor
        assert m.prob(W("a")) == 0.0
