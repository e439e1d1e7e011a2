"""Pseudo-distance, separated sets, nets, and capacity estimates."""

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obese_bw.errors import ValidationError
from obese_bw.metrics import (brute_capacity, build_net, build_separated_set,
                              covering_radius, directed_distance, grid_words,
                              greedy_separated, pseudo_distance)
from obese_bw.model import TimedWord

from conftest import load_json
from test_growth import fa_one_state


def word_of(doc):
    return TimedWord(tuple((frozenset(letters), Fraction(str(t)))
                           for letters, t in doc))


def tw(*events):
    return TimedWord(tuple((frozenset(ls), Fraction(t)) for ls, t in events))


@pytest.fixture
def word_pair():
    doc = load_json("word_pair.json")
    return word_of(doc["u"]), word_of(doc["v"])


def test_directed_distance_reference_pair(word_pair):
    u, v = word_pair
    assert directed_distance(u, v) == Fraction(1, 5)
    assert directed_distance(v, u) == Fraction(3, 10)


def test_pseudo_distance_is_max_of_directions(word_pair):
    u, v = word_pair
    assert pseudo_distance(u, v) == Fraction(3, 10)
    assert pseudo_distance(u, v) == pseudo_distance(v, u)


def test_empty_word_conventions():
    empty = TimedWord(())
    w = tw(("a", 1))
    assert directed_distance(empty, w) == 0
    assert directed_distance(w, empty) == math.inf
    assert pseudo_distance(empty, empty) == 0


def test_disjoint_supports_are_infinitely_apart():
    assert pseudo_distance(tw(("a", 1)), tw(("b", 1))) == math.inf


def test_distance_identical_words_zero(word_pair):
    u, _ = word_pair
    assert pseudo_distance(u, u) == 0


small_words = st.lists(
    st.tuples(st.sets(st.sampled_from("ab"), min_size=1, max_size=2),
              st.integers(0, 12)),
    min_size=0, max_size=4).map(
        lambda evs: TimedWord(tuple(
            (frozenset(ls), Fraction(t, 4))
            for ls, t in sorted(evs, key=lambda e: e[1]))))


@given(small_words, small_words, st.integers(0, 8))
@settings(max_examples=80, deadline=None)
def test_joint_shift_invariance(u, v, shift):
    d = Fraction(shift, 4)
    su = TimedWord(tuple((ls, t + d) for ls, t in u.events))
    sv = TimedWord(tuple((ls, t + d) for ls, t in v.events))
    assert pseudo_distance(u, v) == pseudo_distance(su, sv)


@given(small_words, small_words)
@settings(max_examples=80, deadline=None)
def test_distance_symmetric_nonnegative(u, v):
    d = pseudo_distance(u, v)
    assert d == pseudo_distance(v, u)
    assert d >= 0


@given(small_words, small_words, small_words)
@settings(max_examples=60, deadline=None)
def test_directed_distance_triangle(u, v, w):
    duv = directed_distance(u, v)
    dvw = directed_distance(v, w)
    duw = directed_distance(u, w)
    assert duw <= duv + dvw


def test_separated_set_size_powerset():
    # K = ceil(T/eps) - 1 interior grid points; one word per squeezed word
    # of length K-1 over the 2^k powerset letters
    for k in (1, 2):
        fa = fa_one_state("ab"[:k])
        sep = build_separated_set(fa, "s", "s", T=1, epsilon=Fraction(1, 4))
        K = 3
        assert len(sep) == (2 ** k) ** (K - 1)


def test_separated_set_is_verified_on_build():
    fa = fa_one_state("a")
    sep = build_separated_set(fa, "s", "s", T=1, epsilon=Fraction(1, 4))
    for i in range(len(sep)):
        for j in range(i + 1, len(sep)):
            assert pseudo_distance(sep[i], sep[j]) > Fraction(1, 4)


def test_separated_set_rejects_tight_horizon():
    fa = fa_one_state("a")
    with pytest.raises(ValidationError):
        build_separated_set(fa, "s", "s", T=1, epsilon=Fraction(1, 2))


def test_net_size_and_covering():
    fa = fa_one_state("a")
    eps = Fraction(1, 3)
    net = build_net(fa, T=1, epsilon=eps)
    K = 3
    assert len(net) == 2 ** (K + 1)
    # grid-aligned samples are covered within eps
    samples = grid_words(fa, 1, Fraction(1, 3), max_events=2)
    assert covering_radius(net, samples) <= eps


def test_greedy_separated_is_separated_and_maximal():
    fa = fa_one_state("a")
    words = grid_words(fa, 1, Fraction(1, 4), max_events=2)
    eps = Fraction(1, 4)
    kept = greedy_separated(words, eps)
    for i in range(len(kept)):
        for j in range(i + 1, len(kept)):
            assert pseudo_distance(kept[i], kept[j]) > eps
    for w in words:
        assert any(pseudo_distance(w, v) <= eps for v in kept)


def test_brute_capacity_net_not_larger_than_sep():
    fa = fa_one_state("a")
    eps = Fraction(1, 4)
    rep = brute_capacity(lambda: grid_words(fa, 1, Fraction(1, 8),
                                            max_events=2),
                         1, eps, grid_step=Fraction(1, 8))
    assert rep.net_size <= rep.sep_size
    assert rep.capacity == math.log2(rep.sep_size)
    assert rep.entropy == math.log2(rep.net_size)
    assert rep.notes


def test_grid_words_counts_and_errors():
    fa = fa_one_state("a")
    # grid {0, 1/2, 1}; words with <= 1 event: empty + one event per point
    words = grid_words(fa, 1, Fraction(1, 2), max_events=1)
    assert len(words) == 4
    with pytest.raises(ValidationError):
        grid_words(fa, 1, 0)


def test_grid_words_nondecreasing_timestamps():
    fa = fa_one_state("ab")
    for w in grid_words(fa, 1, Fraction(1, 2), max_events=2):
        times = [t for _, t in w.events]
        assert times == sorted(times)
