"""Maximum cycle ratio computation and the ratio-graph constructions."""

import random
from fractions import Fraction

import pytest

from obese_bw.errors import ValidationError
from obese_bw.model import ta_from_dict
from obese_bw.preprocess import (add_heartbeat_urgency, eliminate_zeros,
                                 region_split)
from obese_bw.ratio import (RatioEdge, RatioGraph, core_ratio_graph,
                            enumerate_simple_cycles, max_ratio,
                            ratio_graph_of_wtg)
from obese_bw.spots import abstract_wtg, detect_red, extract_spots, stratify

from conftest import load_json


def G(*triples):
    """RatioGraph from (src, dst, reward, time) tuples."""
    edges = tuple(RatioEdge(s, d, Fraction(r), t, "%s->%s#%d" % (s, d, i))
                  for i, (s, d, r, t) in enumerate(triples))
    nodes = tuple(sorted({e.src for e in edges} | {e.dst for e in edges}))
    return RatioGraph(nodes, edges)


def test_self_loop_ratio():
    r = max_ratio(G(("A", "A", 3, 2)))
    assert r.alpha_exact == Fraction(3, 2)
    assert r.witness_duration == 2
    assert r.obese
    assert r.method == "both"


def test_best_of_two_cycles():
    r = max_ratio(G(("A", "B", 2, 1), ("B", "A", 0, 1), ("A", "A", 3, 2)))
    assert r.alpha_exact == Fraction(3, 2)
    assert r.witness_duration == 2
    assert len(r.witness) == 1


def test_longest_duration_not_best_ratio():
    # the duration-6 cycle has ratio 5/6, the duration-7 one 6/7
    r = max_ratio(G(("A", "B", 5, 3), ("B", "A", 0, 3),
                    ("A", "C", 6, 4), ("C", "A", 0, 3)))
    assert r.alpha_exact == Fraction(6, 7)
    assert r.witness_duration == 7


def test_acyclic_graph_is_empty():
    r = max_ratio(G(("A", "B", 5, 1), ("B", "C", 5, 1)))
    assert r.alpha == 0.0
    assert not r.obese
    assert r.method == "empty"


def test_zero_rewards_give_zero_alpha():
    r = max_ratio(G(("A", "B", 0, 1), ("B", "A", 0, 2)))
    assert r.alpha == 0.0
    assert not r.obese
    assert r.alpha_exact == 0


def test_zero_time_cycle_rejected():
    with pytest.raises(ValidationError):
        max_ratio(G(("A", "B", 1, 0), ("B", "A", 1, 0)))


def test_bad_precision_rejected():
    with pytest.raises(ValidationError):
        max_ratio(G(("A", "A", 1, 1)), precision=0)


def test_bisection_matches_enumeration_when_forced_alone():
    g = G(("A", "B", 7, 2), ("B", "C", 1, 1), ("C", "A", 4, 3),
          ("B", "A", 2, 2), ("C", "C", 5, 4), ("A", "A", 1, 1))
    both = max_ratio(g)
    assert both.method == "both"
    bis = max_ratio(g, enumeration_cap=0)
    assert bis.method == "bisection"
    assert abs(bis.alpha - both.alpha) < 2e-9
    assert bis.alpha_exact == both.alpha_exact


def test_certificate_and_interval_bracket_alpha():
    r = max_ratio(G(("A", "B", 7, 2), ("B", "A", 1, 3), ("A", "A", 2, 1)))
    lo, hi = r.interval
    assert lo - 1e-9 <= r.alpha <= hi
    cert_hi, slack = r.certificate
    assert cert_hi >= r.alpha - 1e-9
    assert slack <= 1e-9


def test_random_graphs_bisection_vs_enumeration():
    rng = random.Random(7)
    for _ in range(40):
        n = rng.randint(2, 6)
        nodes = ["n%d" % i for i in range(n)]
        triples = []
        for _ in range(rng.randint(n, 3 * n)):
            s, d = rng.choice(nodes), rng.choice(nodes)
            triples.append((s, d, rng.randint(0, 9), rng.randint(1, 4)))
        g = G(*triples)
        full = max_ratio(g)
        if full.method == "empty":
            continue
        bis = max_ratio(g, enumeration_cap=0)
        assert abs(bis.alpha - full.alpha) < 2e-9


def test_enumerate_simple_cycles_counts():
    g = G(("A", "B", 1, 1), ("B", "A", 1, 1), ("B", "C", 1, 1),
          ("C", "A", 1, 1), ("A", "A", 1, 1))
    cycles = enumerate_simple_cycles(g.edges)
    # self-loop at A, A-B, and A-B-C
    assert len(cycles) == 3
    assert enumerate_simple_cycles(g.edges, cap=2) is None


def test_enumeration_counts_parallel_edge_choices():
    g = G(("A", "B", 1, 1), ("A", "B", 2, 1), ("B", "A", 0, 1))
    cycles = enumerate_simple_cycles(g.edges)
    assert len(cycles) == 2
    assert {r for r, t, d in cycles} == {Fraction(1), Fraction(2)}


@pytest.fixture(scope="module")
def three_spot_wtg():
    a, _ = ta_from_dict(load_json("three_spot.json"))
    sfa = eliminate_zeros(region_split(add_heartbeat_urgency(a)))
    strat = stratify(sfa, detect_red(sfa))
    return abstract_wtg(strat, extract_spots(strat))


def test_dual_route_ratio_graphs_agree(three_spot_wtg):
    """The compact corner graph and the full corner-point graph are built by
    different code paths; their maximum cycle ratios must coincide."""
    compact = max_ratio(core_ratio_graph(three_spot_wtg))
    full_graph, _ = ratio_graph_of_wtg(three_spot_wtg)
    full = max_ratio(full_graph)
    assert abs(compact.alpha - full.alpha) < 2e-9
    assert compact.witness_duration == full.witness_duration == 7
    assert compact.obese and full.obese


def test_witness_descriptors_render(three_spot_wtg):
    r = max_ratio(core_ratio_graph(three_spot_wtg))
    assert r.witness
    assert all(isinstance(w, str) and w for w in r.witness)
