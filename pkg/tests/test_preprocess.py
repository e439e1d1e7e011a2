"""Instrumentation, region splitting, and zero-elimination."""

from fractions import Fraction

from obese_bw.model import TimedWord, ta_from_dict
from obese_bw.preprocess import (add_heartbeat_urgency, check_rsta,
                                 eliminate_zeros, is_urgent, nu_word,
                                 per_clock_ceilings, region_split)

from conftest import load_json


def instrumented(doc_name):
    a, _ = ta_from_dict(load_json(doc_name))
    return add_heartbeat_urgency(a)


def test_instrumentation_adds_clocks_and_beat(three_spot_ta):
    instr = add_heartbeat_urgency(three_spot_ta)
    a = instr.automaton
    # event "b" exists, so the beat letter is renamed with a warning
    assert instr.beat == "b1"
    assert len(instr.warnings) == 1
    assert a.clocks == three_spot_ta.clocks + (instr.h, instr.u)
    assert a.events == three_spot_ta.events + (instr.beat,)
    # one heartbeat self-loop per location, at the end
    n = len(three_spot_ta.edges)
    assert instr.heartbeat_edges == frozenset(range(n, n + len(a.locations)))
    for i in instr.heartbeat_edges:
        e = a.edges[i]
        assert e.src == e.dst
        assert e.letter == frozenset([instr.beat])
        assert e.resets == frozenset([instr.h, instr.u])
    # every original edge now resets u and is bounded by h <= 1
    for old, new in zip(three_spot_ta.edges, a.edges):
        assert instr.u in new.resets
        assert new.guard.max_constant() >= 1


def test_instrumentation_renames_on_collision():
    doc = {
        "clocks": ["h"], "events": ["b"],
        "locations": [{"name": "p", "S": "true", "I": "h == 0", "F": "true"}],
        "edges": [{"from": "p", "to": "p", "letter": "b",
                   "guard": "h < 1", "resets": ["h"]}],
    }
    a, _ = ta_from_dict(doc)
    instr = add_heartbeat_urgency(a)
    assert instr.h != "h" and instr.beat != "b"
    assert len(instr.warnings) == 2


def test_per_clock_ceilings(three_spot_ta):
    assert per_clock_ceilings(three_spot_ta) == (7, 1)
    instr = add_heartbeat_urgency(three_spot_ta)
    ceil = per_clock_ceilings(instr.automaton)
    assert ceil == (7, 1, 1, 0)      # h tested against 1, u never tested


def test_region_split_invariants(three_spot_ta):
    rsta = region_split(add_heartbeat_urgency(three_spot_ta))
    assert not rsta.is_empty
    assert check_rsta(rsta) == []
    assert not rsta.zero_free
    assert rsta.initial and rsta.final
    for q in rsta.locations:
        base, region = q
        assert rsta.S(q) == region
    # locations are exactly the starting map's keys
    assert set(rsta.starting) == set(rsta.locations)


def test_eliminate_zeros_removes_urgency(three_spot_ta):
    rsta = region_split(add_heartbeat_urgency(three_spot_ta))
    sfa = eliminate_zeros(rsta)
    assert sfa.zero_free
    assert check_rsta(sfa) == []
    assert all(not is_urgent(sfa, e) for e in sfa.edges)


def test_eliminate_zeros_deterministic(three_spot_ta):
    rsta = region_split(add_heartbeat_urgency(three_spot_ta))
    a = eliminate_zeros(rsta)
    b = eliminate_zeros(rsta)
    assert a.edges == b.edges
    assert a.locations == b.locations


def test_eliminate_zeros_letters_are_unions(three_spot_ta):
    rsta = region_split(add_heartbeat_urgency(three_spot_ta))
    sfa = eliminate_zeros(rsta)
    alphabet = set(sfa.events)
    for e in sfa.edges:
        assert e.letter and e.letter <= alphabet


def test_nu_word_merges_and_drops():
    w = TimedWord((
        (frozenset("b"), Fraction(0)),
        (frozenset("a"), Fraction(5)),
        (frozenset("b"), Fraction(5)),
        (frozenset("a"), Fraction(5)),
        (frozenset("c"), Fraction(7)),
    ))
    assert nu_word(w).events == (
        (frozenset("ab"), Fraction(5)),
        (frozenset("c"), Fraction(7)),
    )
    assert nu_word(TimedWord(((frozenset("a"), Fraction(0)),))).events == ()
