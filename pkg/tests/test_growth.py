"""Squeezing, determinization, spectral radius, and growth rates."""

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obese_bw.errors import ResourceError, ValidationError
from obese_bw.growth import (FiniteAutomaton, adjacency_matrix, char_poly,
                             count_squeezed, determinize_trim,
                             enumerate_squeezed, growth_rate, parse_fa,
                             spectral_radius, squeeze, support)

from conftest import data_path


def fa_one_state(letters):
    s = "s"
    trans = frozenset((s, frozenset([l]), s) for l in letters)
    return FiniteAutomaton((s,), trans, frozenset([s]), frozenset([s]))


def nfa_accepts(fa, word):
    states = set(fa.initial)
    for letter in word:
        states = {t for s in states for t in fa.successors(s, letter)}
        if not states:
            return False
    return bool(states & fa.final)


@st.composite
def random_fas(draw):
    n = draw(st.integers(1, 4))
    states = tuple(range(n))
    letters = [frozenset([c]) for c in "abc"[:draw(st.integers(1, 3))]]
    m = draw(st.integers(1, 8))
    trans = frozenset(
        (draw(st.integers(0, n - 1)), draw(st.sampled_from(letters)),
         draw(st.integers(0, n - 1)))
        for _ in range(m))
    return FiniteAutomaton(states, trans, frozenset(states), frozenset(states))


@given(random_fas())
@settings(max_examples=60, deadline=None)
def test_squeeze_has_empty_selfloops(fa):
    sq = squeeze(fa)
    for s in fa.states:
        assert (s, frozenset(), s) in sq.transitions


@given(random_fas())
@settings(max_examples=40, deadline=None)
def test_singleton_embedding_in_squeeze(fa):
    # every word of L, read as singleton sets, is a word of the squeezed
    # language (factorize into single letters)
    sq = squeeze(fa)
    frontier = [(s, ()) for s in fa.initial]
    seen = set(frontier)
    words = []
    while frontier and len(words) < 50:
        s, w = frontier.pop()
        if s in fa.final:
            words.append(w)
        if len(w) >= 4:
            continue
        for (a, l, b) in fa.transitions:
            if a == s and (b, w + (l,)) not in seen:
                seen.add((b, w + (l,)))
                frontier.append((b, w + (l,)))
    for w in words:
        assert nfa_accepts(sq, w)


@given(random_fas())
@settings(max_examples=30, deadline=None)
def test_determinize_preserves_squeezed_language(fa):
    sq = squeeze(fa)
    det = determinize_trim(sq)
    alphabet = sorted(sq.alphabet(), key=lambda l: tuple(sorted(l)))

    def words(upto):
        stack = [()]
        while stack:
            w = stack.pop()
            yield w
            if len(w) < upto:
                stack.extend(w + (l,) for l in alphabet)

    for w in words(3):
        assert nfa_accepts(sq, w) == nfa_accepts(det, w)


def test_spectral_radius_trivial_cases():
    assert abs(spectral_radius([[1, 0], [0, 1]]).value - 1) < 1e-9
    assert abs(spectral_radius([[0, 1], [1, 0]]).value - 1) < 1e-9
    assert abs(spectral_radius([[2]]).value - 2) < 1e-9


def test_spectral_radius_reference_matrix():
    rho = spectral_radius([[1, 3, 3], [0, 2, 4], [0, 3, 5]], precision=1e-12)
    assert abs(rho.value - (7 + math.sqrt(57)) / 2) < 1e-9


def test_spectral_radius_provenance_brackets_value():
    rho = spectral_radius([[1, 3, 3], [0, 2, 4], [0, 3, 5]])
    coeffs, lo, hi = rho.provenance
    assert float(lo) - 1e-12 <= rho.value <= float(hi) + 1e-12
    # the characteristic polynomial must vanish at the Perron root
    val = sum(c * rho.value ** i for i, c in enumerate(reversed(coeffs)))
    assert abs(val) < 1e-5 * max(1.0, rho.value ** (len(coeffs) - 1))


def test_char_poly_integer_coefficients():
    coeffs = char_poly([[1, 3, 3], [0, 2, 4], [0, 3, 5]])
    assert all(Fraction(c).denominator == 1 for c in coeffs)
    assert coeffs[0] == 1  # monic


def test_growth_rate_single_selfloop_is_one():
    rate = growth_rate(fa_one_state("a"))
    assert abs(rate.value - 1.0) < 1e-9


def test_growth_rate_k_letter_selfloop_is_k():
    for k in (1, 2, 3):
        rate = growth_rate(fa_one_state("abc"[:k]))
        assert abs(rate.value - k) < 1e-9


def test_growth_rate_rejects_empty():
    empty = FiniteAutomaton(("s",), frozenset(), frozenset(["s"]),
                            frozenset(["s"]))
    with pytest.raises(ValidationError):
        growth_rate(empty)


def test_growth_rate_rejects_bad_precision():
    with pytest.raises(ValidationError):
        spectral_radius([[1]], precision=0)


def test_count_squeezed_selfloop_powers():
    fa = fa_one_state("a")
    for n in range(5):
        assert count_squeezed(fa, n) == 2 ** n
    two = fa_one_state("ab")
    for n in range(4):
        assert count_squeezed(two, n) == 4 ** n


def test_count_squeezed_rejects_large_n():
    with pytest.raises(ResourceError):
        count_squeezed(fa_one_state("a"), 15)


def test_count_zero_is_one():
    assert count_squeezed(fa_one_state("a"), 0) == 1


def test_growth_sandwich_reference_automaton():
    with open(data_path("two_letter_start_fa.json")) as fh:
        fa = parse_fa(fh.read())
    alpha = growth_rate(fa).value
    sigma = 3
    for n in (6, 8, 10):
        c = count_squeezed(fa, n)
        assert abs(math.log2(c) / n - alpha) <= (2 * sigma) / n + 0.05


def test_enumerate_squeezed_matches_count():
    fa = fa_one_state("ab")
    for n in range(4):
        words = enumerate_squeezed(fa, n)
        assert len(words) == count_squeezed(fa, n)
        assert len(set(words)) == len(words)


def test_support_of_timed_automaton(three_spot_ta):
    fa = support(three_spot_ta)
    assert set(fa.states) == {"p", "q", "r"}
    assert fa.initial == frozenset(["p"])
    assert ("p", frozenset(["a"]), "q") in fa.transitions


def test_parse_fa_errors():
    from obese_bw.errors import ParseError
    with pytest.raises(ParseError):
        parse_fa("{not json")
    with pytest.raises(ParseError):
        parse_fa('{"states": ["s"], "transitions": '
                 '[{"from": "s", "letter": "a", "to": "t"}], '
                 '"initial": ["s"], "final": ["s"]}')
