"""Data model, JSON schema round-trip, and run semantics."""

from fractions import Fraction

import pytest

from obese_bw.errors import ParseError, ValidationError
from obese_bw.model import (Run, TimedWord, closure, export_dot, parse_ta,
                            simulate, ta_from_dict, ta_to_dict,
                            trivially_timed)

from conftest import load_json


def test_parse_three_spot(three_spot_ta):
    a = three_spot_ta
    assert a.locations == ("p", "q", "r")
    assert a.clocks == ("x", "y")
    assert len(a.edges) == 10
    assert a.edges[0].letter == frozenset(["a"])
    assert a.edges[0].resets == frozenset(["x"])
    assert a.max_constant() == 7


def test_roundtrip_through_dict(three_spot_ta):
    doc = ta_to_dict(three_spot_ta)
    again, warnings = ta_from_dict(doc)
    assert warnings == []
    assert ta_to_dict(again) == doc


def test_parse_rejects_bad_documents():
    with pytest.raises(ParseError):
        parse_ta("{broken")
    with pytest.raises(ParseError):
        parse_ta('{"clocks": []}')
    base = load_json("three_spot.json")
    bad = dict(base, edges=[dict(base["edges"][0], letter="zz")])
    with pytest.raises(ParseError):
        ta_from_dict(bad)
    bad = dict(base, edges=[dict(base["edges"][0], to="nowhere")])
    with pytest.raises(ValidationError):
        ta_from_dict(bad)
    bad = dict(base, edges=[dict(base["edges"][0], resets=["zz"])])
    with pytest.raises(ValidationError):
        ta_from_dict(bad)
    bad = dict(base, edges=[dict(base["edges"][0], guard="x < 1 && x > 2")])
    with pytest.raises(ValidationError):
        ta_from_dict(bad)


def test_validate_trims_unreachable():
    base = load_json("three_spot.json")
    doc = dict(base, locations=base["locations"] + [{"name": "island"}])
    a, warnings = ta_from_dict(doc)
    assert "island" not in a.locations
    assert any("island" in w for w in warnings)


def test_timed_word_rejects_decreasing_timestamps():
    with pytest.raises(ValidationError):
        TimedWord(((frozenset("a"), Fraction(2)), (frozenset("a"), Fraction(1))))
    w = TimedWord(((frozenset("a"), Fraction(1)), (frozenset("b"), Fraction(1))))
    assert w.dur() == 1
    assert len(w) == 2


def test_simulate_accepting_run(three_spot_ta):
    # p -a-> q -c-> p with half-unit delays stays inside the open guards
    run = Run.make("p", {"x": 0, "y": 0},
                   [(0, Fraction(1, 2)), (2, Fraction(1, 4))])
    res = simulate(three_spot_ta, run)
    assert res.accepting and not res.rejected
    assert res.word.events == (
        (frozenset("a"), Fraction(1, 2)),
        (frozenset("c"), Fraction(3, 4)))


def test_simulate_rejects_guard_violation(three_spot_ta):
    run = Run.make("p", {"x": 0, "y": 0}, [(0, Fraction(2))])  # x<1 violated
    res = simulate(three_spot_ta, run)
    assert res.rejected and res.rejected_at == 0
    assert res.word is None


def test_simulate_rejects_wrong_source(three_spot_ta):
    run = Run.make("q", {"x": 0, "y": 0}, [(0, Fraction(1, 2))])
    res = simulate(three_spot_ta, run)
    assert res.rejected_at == 0


def test_simulate_non_initial_start_not_accepting(three_spot_ta):
    # starting valuation violates I(p): run is valid but not accepting
    run = Run.make("p", {"x": Fraction(1, 2), "y": Fraction(1, 2)},
                   [(2 - 2, Fraction(1, 4))])
    res = simulate(three_spot_ta, run)
    assert not res.rejected
    assert not res.accepting


def test_simulate_checks_inputs(three_spot_ta):
    with pytest.raises(ValidationError):
        simulate(three_spot_ta, Run.make("ghost", {}, []))
    with pytest.raises(ValidationError):
        simulate(three_spot_ta, Run.make("p", {}, [(99, Fraction(1))]))


def test_closure_makes_boundary_reachable(three_spot_ta):
    closed = closure(three_spot_ta)
    run = Run.make("p", {"x": 0, "y": 0}, [(0, Fraction(1))])  # x == 1
    assert simulate(three_spot_ta, run).rejected
    assert not simulate(closed, run).rejected


def test_trivially_timed_drops_guards(three_spot_ta):
    flat = trivially_timed(three_spot_ta)
    run = Run.make("p", {"x": 0, "y": 0}, [(0, Fraction(5))])
    assert not simulate(flat, run).rejected


def test_export_dot_stable(three_spot_ta):
    dot = export_dot(three_spot_ta)
    assert dot == export_dot(three_spot_ta)
    assert dot.startswith("digraph ta {")
    assert "color=black" in dot
    colored = export_dot(three_spot_ta, edge_colors={0: "red"})
    assert "color=red" in colored
    clustered = export_dot(three_spot_ta, clusters=[("spot 0", ["q"])])
    assert "cluster_0" in clustered and "color=pink" in clustered
