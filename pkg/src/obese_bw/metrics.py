"""Brute-force metric layer: pseudo-distance on timed words over powerset
alphabets, grid-restricted separated sets and nets, and desk-scale
capacity/entropy estimation.

All quantities here are oracles for the analytic results: the separated
set is a lower bound on the packing number M_eps, the net an upper bound
on the covering number N_eps, and both are restricted to words with
timestamps on a finite grid, so they bound the true values only up to the
documented grid slack (moving a timestamp to the nearest grid point of
step g changes any distance by at most g, so a grid step g <= eps/4
perturbs the separation/covering radii by < eps/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import InternalConsistencyError, ResourceError, ValidationError
from .growth import enumerate_squeezed
from .model import TimedWord

DEFAULT_WORD_CAP = 100000
EXHAUSTIVE_CHECK_CAP = 512


def directed_distance(w, v):
    """One-sided pseudo-distance: every event occurrence (a, t) of w is
    matched to the nearest timestamp in v carrying the same base letter;
    the result is the worst such match.  min over no match is infinite
    (math.inf); max over no occurrence (w empty) is 0."""
    times = {}
    for letters, s in v.events:
        for b in letters:
            times.setdefault(b, []).append(s)
    worst = Fraction(0)
    for letters, t in w.events:
        for a in letters:
            ts = times.get(a)
            if not ts:
                return math.inf
            m = min(abs(t - s) for s in ts)
            if m > worst:
                worst = m
    return worst


def pseudo_distance(w, v):
    """Symmetric pseudo-distance max(->d(w,v), ->d(v,w)); exact rational
    unless infinite.  Words with disjoint letter supports are at infinite
    distance (min over the empty set), which follows the definition
    literally even though it can inflate capacities on tiny alphabets."""
    return max(directed_distance(w, v), directed_distance(v, w))


def _grid(T, k):
    return [Fraction(T) * i / k for i in range(k + 1)]


def _place(letter_sets, grid_points):
    """Timed word with letter set i at grid point i; empty sets mean "no
    event here" and are dropped."""
    return TimedWord(tuple((ls, t) for ls, t in zip(letter_sets, grid_points)
                           if ls))


def assert_separated(words, epsilon, check_cap=EXHAUSTIVE_CHECK_CAP):
    """Check pairwise distance > epsilon: exhaustively up to check_cap
    words, on a deterministic sample of adjacent/stride pairs beyond."""
    n = len(words)
    if n <= check_cap:
        pairs = ((i, j) for i in range(n) for j in range(i + 1, n))
    else:
        stride = max(1, n // check_cap)
        pairs = [(i, i + 1) for i in range(0, n - 1, stride)]
        pairs += [(i, (i + stride) % n) for i in range(0, n - 1, stride)
                  if i != (i + stride) % n]
    for i, j in pairs:
        if pseudo_distance(words[i], words[j]) <= epsilon:
            raise InternalConsistencyError(
                "separated-set violation: d(word %d, word %d) <= %s"
                % (i, j, epsilon))


def build_separated_set(fa, p, q, T, epsilon, cap=DEFAULT_WORD_CAP,
                        verify=True):
    """Epsilon-separated set of timed words of the p->q language of a
    support automaton, restricted to duration T.

    K = ceil(T/eps) - 1 equidistant grid points (step T/K > eps); every
    length-(K-1) word of the squeezed p->q language is placed with letter
    set i at grid point t_i (i = 1..K-1), so distinct words differ by a
    whole letter at some grid point and are > eps apart.  No events land
    in (0, eps] or [T-eps, T).
    """
    T = Fraction(T)
    epsilon = Fraction(epsilon)
    if epsilon <= 0 or T <= 2 * epsilon:
        raise ValidationError("need T > 2*epsilon (got T=%s, epsilon=%s)"
                              % (T, epsilon))
    K = math.ceil(T / epsilon) - 1
    grid = _grid(T, K)
    squeezed = enumerate_squeezed(fa, K - 1, p, q)
    if len(squeezed) > cap:
        raise ResourceError("separated-set enumeration yields %d words (cap %d)"
                            % (len(squeezed), cap))
    out = tuple(_place(w, grid[1:K]) for w in squeezed)
    if verify:
        assert_separated(out, epsilon)
    return out


def build_net(fa, T, epsilon, cap=DEFAULT_WORD_CAP):
    """Net of timed words for the full language of a support automaton,
    restricted to duration T: K = ceil(T/eps) grid points (step <= eps);
    every length-(K+1) word of the full squeezed language is placed with
    letter set i at grid point t_i (i = 0..K).  Any word of the language
    with timestamps in [0, T] is within eps/2 + grid slack of the net."""
    T = Fraction(T)
    epsilon = Fraction(epsilon)
    if epsilon <= 0 or T <= 0:
        raise ValidationError("need T > 0 and epsilon > 0")
    K = math.ceil(T / epsilon)
    grid = _grid(T, K)
    squeezed = enumerate_squeezed(fa, K + 1)
    if len(squeezed) > cap:
        raise ResourceError("net enumeration yields %d words (cap %d)"
                            % (len(squeezed), cap))
    return tuple(_place(w, grid) for w in squeezed)


def covering_radius(net, samples):
    """Worst distance from a sample word to its nearest net word."""
    worst = Fraction(0)
    for w in samples:
        best = min((pseudo_distance(w, v) for v in net), default=math.inf)
        worst = max(worst, best)
    return worst


@dataclass
class SeparationReport:
    epsilon: Fraction
    T: Fraction
    sep_size: int
    net_size: int
    capacity: float          # log2 of sep_size
    entropy: float           # log2 of net_size
    sep_words: tuple = ()
    net_words: tuple = ()
    notes: list = field(default_factory=list)


def greedy_separated(words, epsilon):
    """Greedy maximal epsilon-separated subset (deterministic order);
    maximality makes it also an epsilon-cover of the candidates."""
    kept = []
    for w in words:
        if all(pseudo_distance(w, v) > epsilon for v in kept):
            kept.append(w)
    return kept


def greedy_cover(words, epsilon):
    """Greedy set cover of the candidates by epsilon-balls centered at
    candidates (largest uncovered gain first, earliest index on ties)."""
    n = len(words)
    balls = []
    for i in range(n):
        balls.append({j for j in range(n)
                      if pseudo_distance(words[i], words[j]) <= epsilon})
    uncovered = set(range(n))
    chosen = []
    while uncovered:
        best_i, best_gain = None, -1
        for i in range(n):
            gain = len(balls[i] & uncovered)
            if gain > best_gain:
                best_i, best_gain = i, gain
        chosen.append(words[best_i])
        uncovered -= balls[best_i]
    return chosen


def brute_capacity(sampler, T, epsilon, grid_step=None, cap=DEFAULT_WORD_CAP):
    """Greedy separated set (lower bound on the packing number) and greedy
    net (upper bound on the covering number) over the candidate words
    produced by `sampler` (an iterable of TimedWord, e.g. grid_words).

    Both bounds are restricted to the candidates: the report's capacity
    and entropy are grid-restricted estimates, not exact values.  The
    maximal separated set is itself a valid epsilon-cover, so the smaller
    of it and the greedy cover is reported as the net.
    """
    epsilon = Fraction(epsilon)
    words = []
    seen = set()
    for w in sampler() if callable(sampler) else sampler:
        if w.events not in seen:
            seen.add(w.events)
            words.append(w)
        if len(words) > cap:
            raise ResourceError("candidate enumeration exceeded %d words" % cap)
    sep = greedy_separated(words, epsilon)
    net = greedy_cover(words, epsilon)
    if len(net) > len(sep):
        net = sep
    notes = ["grid-restricted bounds: sep is a lower bound on the packing "
             "number, net an upper bound on the covering number, both over "
             "the sampled candidates only"]
    if grid_step is not None and Fraction(grid_step) > epsilon / 4:
        notes.append("grid step %s > epsilon/4: grid slack may exceed eps/2"
                     % grid_step)
    return SeparationReport(
        epsilon=epsilon, T=Fraction(T), sep_size=len(sep), net_size=len(net),
        capacity=math.log2(len(sep)) if sep else 0.0,
        entropy=math.log2(len(net)) if net else 0.0,
        sep_words=tuple(sep), net_words=tuple(net), notes=notes)


def grid_words(fa, T, grid_step, max_events=None, cap=DEFAULT_WORD_CAP,
               p=None, q=None):
    """All timed words whose untimed word is accepted by `fa` (p->q if
    given) with timestamps on the grid {0, g, 2g, ..., T}, nondecreasing,
    up to max_events events (default: one per grid point)."""
    T = Fraction(T)
    g = Fraction(grid_step)
    if g <= 0 or T < 0:
        raise ValidationError("need grid_step > 0 and T >= 0")
    steps = int(T / g)
    grid = [g * i for i in range(steps + 1)]
    initial = frozenset([p]) if p is not None else fa.initial
    final = frozenset([q]) if q is not None else fa.final
    if max_events is None:
        max_events = len(grid)
    out_by = {}
    for s, l, t in fa.transitions:
        out_by.setdefault(s, []).append((l, t))
    for lst in out_by.values():
        lst.sort(key=lambda lt: (tuple(sorted(lt[0])), str(lt[1])))
    words = []
    seen = set()

    def rec(state, gi, events):
        if state in final:
            key = tuple(events)
            if key not in seen:
                seen.add(key)
                words.append(TimedWord(key))
                if len(words) > cap:
                    raise ResourceError(
                        "grid enumeration exceeded %d words" % cap)
        if len(events) >= max_events:
            return
        for letter, nxt in out_by.get(state, ()):
            for gj in range(gi, len(grid)):
                rec(nxt, gj, events + [(letter, grid[gj])])

    for s0 in sorted(initial, key=str):
        rec(s0, 0, [])
    return words
