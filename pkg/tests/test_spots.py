"""Red-edge detection, stratification, spot extraction, and abstraction."""

import math

import pytest

from obese_bw.model import ta_from_dict
from obese_bw.preprocess import (add_heartbeat_urgency, eliminate_zeros,
                                 region_split)
from obese_bw.ratio import group_spots
from obese_bw.spots import abstract_wtg, detect_red, extract_spots, stratify

from conftest import load_json

EMPTY = frozenset()


def standard_form(doc_name):
    a, _ = ta_from_dict(load_json(doc_name))
    instr = add_heartbeat_urgency(a)
    rsta = region_split(instr)
    return eliminate_zeros(rsta), (rsta.h, rsta.u)


@pytest.fixture(scope="module")
def three_spot_sfa():
    return standard_form("three_spot.json")


@pytest.fixture(scope="module")
def three_spot_strat(three_spot_sfa):
    sfa, aux = three_spot_sfa
    return stratify(sfa, detect_red(sfa)), aux


def test_fast_loop_is_red():
    sfa, _ = standard_form("reset_loop.json")
    assert detect_red(sfa)


def test_slow_loop_is_not_red():
    sfa, _ = standard_form("window_reset_loop.json")
    assert detect_red(sfa) == frozenset()


def test_red_indices_valid(three_spot_sfa):
    sfa, _ = three_spot_sfa
    red = detect_red(sfa)
    assert red
    assert all(0 <= i < len(sfa.edges) for i in red)
    # redness is a property of (src, dst, guard, resets): parallel edges
    # agree on the verdict
    verdict = {}
    for i, e in enumerate(sfa.edges):
        key = (e.src, e.dst, e.guard_region, e.resets)
        assert verdict.setdefault(key, i in red) == (i in red)


def test_stratify_structure(three_spot_strat):
    strat, _ = three_spot_strat
    rsta = strat.rsta
    for q in rsta.locations:
        base, z = q
        assert isinstance(z, frozenset)
    for f in rsta.final:
        assert f[1] == EMPTY
    for i, e in enumerate(rsta.edges):
        if i in strat.red:
            # red edges carry a commitment superset of their resets and
            # release at most what they reset
            assert e.resets <= e.src[1]
            assert e.src[1] - e.resets <= e.dst[1] <= e.src[1]
        else:
            assert e.src[1] == EMPTY


def test_stratify_dedup_black_preserves_spots(three_spot_sfa):
    sfa, aux = three_spot_sfa
    red = detect_red(sfa)
    full = stratify(sfa, red)
    deduped = stratify(sfa, red, dedup_black=True)
    assert len(deduped.rsta.edges) <= len(full.rsta.edges)
    a = group_spots(extract_spots(full), aux)
    b = group_spots(extract_spots(deduped), aux)
    assert a == b
    # red edges keep their letters under dedup
    red_letters = {frozenset(deduped.rsta.edges[i].letter)
                   for i in deduped.red}
    assert red_letters <= {frozenset(sfa.edges[i].letter)
                           for i in range(len(sfa.edges))}


def test_extract_spots_alphas(three_spot_strat):
    strat, aux = three_spot_strat
    spots = extract_spots(strat)
    assert spots
    groups = group_spots(spots, aux)
    by_members = {tuple(g["members"]): g["alpha"] for g in groups}
    assert set(by_members) == {("p", "q"), ("q",), ("r",)}
    assert abs(by_members[("p", "q")] -
               math.log2((7 + math.sqrt(57)) / 2)) < 1e-6
    assert abs(by_members[("q",)] - 2.0) < 1e-9
    assert abs(by_members[("r",)] - 3.0) < 1e-9


def test_spot_shape_invariants(three_spot_strat):
    strat, _ = three_spot_strat
    for s in extract_spots(strat):
        assert s.resets <= s.Z
        assert len(s.members) == len(set(s.members))
        for m in s.members:
            assert m[1] == s.Z
        assert not s.guard.is_false


def test_abstract_wtg_structure(three_spot_strat):
    strat, _ = three_spot_strat
    spots = extract_spots(strat)
    wtg = abstract_wtg(strat, spots)
    spot_members = {m for s in spots for m in s.members}
    keys = set()
    for e in wtg.edges:
        key = (e.src, e.dst, e.guard, e.resets)
        assert key not in keys      # dedup by semantics
        keys.add(key)
        assert e.kind in ("plain", "copy", "abstract")
        if e.kind == "abstract":
            src = e.src
            assert src[0] == "chk" and src[1] in spot_members
    # intra-spot red edges are gone
    red_pairs = {(strat.rsta.edges[i].src, strat.rsta.edges[i].dst)
                 for i in strat.red}
    for s in spots:
        for e in wtg.edges:
            if e.kind == "plain" and (e.src, e.dst) in red_pairs:
                assert not (e.src in s.members and e.dst in s.members)
    # entry copies carry the spot growth rate as weight
    for s in spots:
        for m in s.members:
            assert wtg.weight[("chk", m)] == s.alpha.value
            assert wtg.weight[m] == 0.0
