"""Finite-automata layer: support, squeezing, determinization, spectral
radius, and growth rates.

Letters are frozensets of base events.  Squeezing replaces each factor of a
word by the union of its letters: the squeezed automaton has a transition
(p, B, q) whenever the original has a path from p to q whose labels union
to B (the empty path gives an empty-set self-loop on every state).  The
growth rate of a language is log2 of the Perron root of the adjacency
matrix of its trim deterministic automaton.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import networkx as nx

from .errors import ParseError, ResourceError, ValidationError


def canon_letters(letters):
    return sorted(letters, key=lambda l: (len(l), tuple(sorted(l))))


@dataclass(frozen=True)
class FiniteAutomaton:
    states: tuple
    transitions: frozenset       # of (state, frozenset letter, state)
    initial: frozenset
    final: frozenset

    def alphabet(self):
        return {l for _, l, _ in self.transitions}

    def successors(self, state, letter):
        return {t for s, l, t in self.transitions if s == state and l == letter}


def parse_fa(text):
    """JSON finite-automaton document: states, transitions
    [{from, letter, to}], initial, final."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("invalid JSON at line %d column %d: %s"
                         % (exc.lineno, exc.colno, exc.msg)) from exc
    try:
        states = tuple(doc["states"])
        initial = frozenset(doc["initial"])
        final = frozenset(doc["final"])
        trans = []
        for t in doc["transitions"]:
            letter = t["letter"]
            if isinstance(letter, str):
                letter = [letter]
            trans.append((t["from"], frozenset(letter), t["to"]))
    except KeyError as exc:
        raise ParseError("missing key %s in finite-automaton document" % exc) from exc
    stateset = set(states)
    for s, _, t in trans:
        if s not in stateset or t not in stateset:
            raise ParseError("transition references undeclared state")
    if not (initial <= stateset and final <= stateset):
        raise ParseError("initial/final reference undeclared states")
    return FiniteAutomaton(states, frozenset(trans), initial, final)


def support(automaton, all_states_initial_final=False):
    """Forget timing: each timed edge becomes (src, letter, dst)."""
    trans = frozenset((e.src, e.letter, e.dst) for e in automaton.edges)
    if all_states_initial_final:
        everything = frozenset(automaton.locations)
        return FiniteAutomaton(tuple(automaton.locations), trans, everything, everything)
    clocks = getattr(automaton, "clocks", ())
    initial = frozenset(q for q in automaton.locations
                        if not automaton.I(q).is_false
                        and automaton.I(q).is_satisfiable(clocks))
    final = frozenset(q for q in automaton.locations
                      if not automaton.F(q).is_false
                      and automaton.F(q).is_satisfiable(clocks))
    return FiniteAutomaton(tuple(automaton.locations), trans, initial, final)


def squeeze(fa):
    """Saturate paths into union-labeled transitions (plus empty-set
    self-loops everywhere)."""
    base = {}
    for s, l, t in fa.transitions:
        base.setdefault(s, []).append((l, t))
    new_trans = set()
    for p in fa.states:
        seen = {(p, frozenset())}
        frontier = [(p, frozenset())]
        while frontier:
            q, union = frontier.pop()
            for l, t in base.get(q, ()):
                nxt = (t, union | l)
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        for q, union in seen:
            new_trans.add((p, union, q))
    return FiniteAutomaton(fa.states, frozenset(new_trans), fa.initial, fa.final)


def determinize_trim(fa):
    """Subset construction then trim.

    Output states are frozensets of input states, ordered by BFS discovery
    with letters visited in canonical (size, lexicographic) order, so the
    adjacency matrix is reproducible.
    """
    letters = canon_letters(fa.alphabet())
    succ = {}
    for s, l, t in fa.transitions:
        succ.setdefault((s, l), set()).add(t)
    start = frozenset(fa.initial)
    if not start:
        return FiniteAutomaton((), frozenset(), frozenset(), frozenset())
    order = [start]
    seen = {start}
    trans = set()
    i = 0
    while i < len(order):
        cur = order[i]
        i += 1
        for l in letters:
            nxt = set()
            for s in cur:
                nxt |= succ.get((s, l), set())
            if not nxt:
                continue
            nxt = frozenset(nxt)
            if nxt not in seen:
                seen.add(nxt)
                order.append(nxt)
            trans.add((cur, l, nxt))
    accepting = {s for s in order if s & fa.final}
    # trim: drop states that cannot reach an accepting one
    co = set(accepting)
    changed = True
    while changed:
        changed = False
        for s, _, t in trans:
            if t in co and s not in co:
                co.add(s)
                changed = True
    order = [s for s in order if s in co]
    keep = set(order)
    trans = {(s, l, t) for s, l, t in trans if s in keep and t in keep}
    return FiniteAutomaton(tuple(order), frozenset(trans),
                           frozenset([start]) if start in keep else frozenset(),
                           frozenset(accepting & keep))


def adjacency_matrix(fa):
    """Counts of distinct letters labeling i->j, in fa.states order."""
    idx = {s: i for i, s in enumerate(fa.states)}
    n = len(fa.states)
    m = [[0] * n for _ in range(n)]
    for s, _, t in fa.transitions:
        m[idx[s]][idx[t]] += 1
    return m


# ---------------------------------------------------------------------------
# Spectral radius

@dataclass(frozen=True)
class GrowthRate:
    value: float
    provenance: tuple | None = None     # (charpoly coeffs, lo, hi) as Fractions


def char_poly(matrix):
    """Monic characteristic polynomial coefficients [1, c1, ..., cn] via
    Faddeev-LeVerrier over exact rationals."""
    n = len(matrix)
    m = [[Fraction(x) for x in row] for row in matrix]
    coeffs = [Fraction(1)]
    aux = [[Fraction(0)] * n for _ in range(n)]
    for k in range(1, n + 1):
        # aux = M (aux + c_{k-1} I)
        shifted = [row[:] for row in aux]
        for i in range(n):
            shifted[i][i] += coeffs[-1]
        aux = [[sum(m[i][l] * shifted[l][j] for l in range(n)) for j in range(n)]
               for i in range(n)]
        c = -sum(aux[i][i] for i in range(n)) / k
        coeffs.append(c)
    return coeffs


def eval_poly(coeffs, x):
    acc = Fraction(0)
    for c in coeffs:
        acc = acc * x + c
    return acc


def power_iteration(matrix, precision=1e-9, max_iter=20000):
    """Perron root of an irreducible nonnegative matrix via iteration on
    M + I (primitive), with Collatz-Wielandt bounds checked every step.

    Returns (estimate, lo, hi) with rho guaranteed in [lo, hi].
    """
    n = len(matrix)
    v = [1.0] * n
    lo_best, hi_best = 0.0, math.inf
    for _ in range(max_iter):
        w = [sum(matrix[i][j] * v[j] for j in range(n)) + v[i] for i in range(n)]
        ratios = [w[i] / v[i] for i in range(n)]
        lo, hi = min(ratios), max(ratios)
        assert lo <= hi + 1e-12, "Collatz-Wielandt bounds crossed"
        lo_best = max(lo_best, lo)
        hi_best = min(hi_best, hi)
        assert lo_best <= hi_best + 1e-9, "Collatz-Wielandt interval became empty"
        norm = max(w)
        v = [x / norm for x in w]
        if hi_best - lo_best < precision:
            break
    est = (lo_best + hi_best) / 2 - 1.0
    return max(est, 0.0), max(lo_best - 1.0, 0.0), hi_best - 1.0


def _component_radius(matrix, precision):
    """(value, provenance) for one irreducible block."""
    n = len(matrix)
    if n == 1:
        return float(matrix[0][0]), ((Fraction(1), Fraction(-matrix[0][0])),
                                     Fraction(matrix[0][0]), Fraction(matrix[0][0]))
    est, lo_f, hi_f = power_iteration(matrix, precision=min(precision, 1e-12))
    if n > 12:
        return est, None
    coeffs = char_poly(matrix)
    lo = Fraction(lo_f).limit_denominator(10**15) - Fraction(1, 10**6)
    hi = Fraction(hi_f).limit_denominator(10**15) + Fraction(1, 10**6)
    if lo < 0:
        lo = Fraction(0)
    plo, phi = eval_poly(coeffs, lo), eval_poly(coeffs, hi)
    if not (plo <= 0 <= phi):
        # isolation failed (estimate interval too tight around a near-tie);
        # keep the rigorous iteration estimate without provenance
        return est, None
    target = Fraction(1, 2**60)
    while hi - lo > target:
        mid = (lo + hi) / 2
        pm = eval_poly(coeffs, mid)
        if pm == 0:
            lo = hi = mid
            break
        if pm < 0:
            lo = mid
        else:
            hi = mid
    return float((lo + hi) / 2), (tuple(coeffs), lo, hi)


def spectral_radius(matrix, precision=1e-9):
    """Max Perron root over SCC blocks of a nonnegative integer matrix.

    Returns a GrowthRate whose value is rho(M) (not its log); provenance is
    the characteristic-polynomial record of the winning block when its
    dimension allowed the exact path.
    """
    if precision <= 0:
        raise ValidationError("precision must be positive")
    n = len(matrix)
    if n == 0:
        return GrowthRate(0.0)
    g = nx.DiGraph()
    g.add_nodes_from(range(n))
    for i in range(n):
        for j in range(n):
            if matrix[i][j] > 0:
                g.add_edge(i, j)
    best, best_prov = 0.0, None
    for comp in nx.strongly_connected_components(g):
        nodes = sorted(comp)
        if len(nodes) == 1 and matrix[nodes[0]][nodes[0]] == 0:
            continue
        sub = [[matrix[i][j] for j in nodes] for i in nodes]
        val, prov = _component_radius(sub, precision)
        if val > best:
            best, best_prov = val, prov
    return GrowthRate(best, best_prov)


# ---------------------------------------------------------------------------
# Growth rate of spots / automata

def is_strongly_connected(fa):
    g = nx.DiGraph()
    g.add_nodes_from(fa.states)
    for s, _, t in fa.transitions:
        g.add_edge(s, t)
    return len(fa.states) > 0 and nx.is_strongly_connected(g)


def growth_rate(automaton, precision=1e-9, all_states=False):
    """log2 of the spectral radius of determinize_trim(squeeze(support)).

    Accepts a timed automaton (support is taken first) or a finite one.
    The input needs at least one transition and a nonempty squeezed
    language; alpha > 0 is guaranteed for strongly connected input.
    """
    fa = automaton
    if not isinstance(fa, FiniteAutomaton):
        fa = support(fa, all_states_initial_final=all_states)
    elif all_states:
        everything = frozenset(fa.states)
        fa = FiniteAutomaton(fa.states, fa.transitions, everything, everything)
    if not fa.transitions:
        raise ValidationError("not a spot: input has no transitions")
    # spots are strongly connected by construction; general automata are
    # accepted and rated on their reachable co-reachable part
    det = determinize_trim(squeeze(fa))
    if not det.states:
        raise ValidationError("not a spot: empty squeezed language")
    rho = spectral_radius(adjacency_matrix(det), precision)
    if rho.value <= 0:
        raise ValidationError("not a spot: empty squeezed language")
    return GrowthRate(math.log2(rho.value), rho.provenance)


def _squeezed_dfa(fa, p=None, q=None):
    if (p is None) != (q is None):
        raise ValidationError("give both p and q, or neither")
    if p is not None:
        fa = FiniteAutomaton(fa.states, fa.transitions,
                             frozenset([p]), frozenset([q]))
    else:
        everything = frozenset(fa.states)
        fa = FiniteAutomaton(fa.states, fa.transitions, everything, everything)
    return determinize_trim(squeeze(fa))


def count_squeezed(fa, n, p=None, q=None):
    """#(length-n words of the squeezed language), exactly, by DFA path
    counting.  Full-language variant by default, p->q variant if given."""
    if n > 14:
        raise ResourceError("count_squeezed limited to n <= 14")
    det = _squeezed_dfa(fa, p, q)
    if not det.initial:
        return 1 if n == 0 else 0
    start = next(iter(det.initial))
    counts = {start: 1}
    letters = canon_letters(det.alphabet())
    for _ in range(n):
        nxt = {}
        for state, c in counts.items():
            for l in letters:
                for t in det.successors(state, l):
                    nxt[t] = nxt.get(t, 0) + c
        counts = nxt
    return sum(c for s, c in counts.items() if s in det.final)


def enumerate_squeezed(fa, n, p=None, q=None):
    """All length-n squeezed words (tuples of frozensets), sorted."""
    det = _squeezed_dfa(fa, p, q)
    if not det.initial:
        return [()] if n == 0 else []
    start = next(iter(det.initial))
    letters = canon_letters(det.alphabet())
    out = []
    def rec(state, word):
        if len(word) == n:
            if state in det.final:
                out.append(tuple(word))
            return
        for l in letters:
            for t in det.successors(state, l):
                rec(t, word + [l])
    rec(start, [])
    out.sort(key=lambda w: [(len(l), tuple(sorted(l))) for l in w])
    return out
