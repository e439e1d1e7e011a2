"""Bandwidth-preserving preprocessing: heartbeat/urgency instrumentation,
diagonal-constraint elimination, region splitting, and zero-elimination.

The pipeline front end turns an arbitrary timed automaton into a
standard-form automaton (SFA): region-split, bounded by the heartbeat
(h <= 1 on every edge, a forced beat letter at h = 1), free of zero-delay
transitions (merged into compound powerset letters), and carrying the
urgency clock u which is reset on every edge and never tested, so a guard
region with u = 0 identifies exactly the zero-delay edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import NamedTuple

from .constraints import ClockConstraint, Guard
from .errors import ResourceError, ValidationError
from .model import Edge, TimedAutomaton, TimedWord
from .regions import Region, enumerate_regions

DEFAULT_LOCATION_CAP = 300000
DEFAULT_SEED_CAP = 4096


def _fresh(name, taken):
    if name not in taken:
        return name
    i = 1
    while "%s%d" % (name, i) in taken:
        i += 1
    return "%s%d" % (name, i)


@dataclass
class Instrumented:
    automaton: TimedAutomaton
    h: str
    u: str
    beat: str
    heartbeat_edges: frozenset      # edge indices of the added self-loops
    warnings: list


def add_heartbeat_urgency(automaton):
    """Add the heartbeat clock/letter (h <= 1 everywhere, beat at h = 1)
    and the urgency clock u (reset on every edge, never tested)."""
    warnings = []
    h = _fresh("h", set(automaton.clocks))
    u = _fresh("u", set(automaton.clocks) | {h})
    beat = _fresh("b", set(automaton.events))
    for want, got in (("h", h), ("u", u), ("b", beat)):
        if want != got:
            warnings.append("instrument: name %r taken, using %r" % (want, got))
    h_le_1 = Guard.of(ClockConstraint(h, None, "<=", 1))
    h_eq_1 = Guard.of(ClockConstraint(h, None, "<=", 1), ClockConstraint(h, None, ">=", 1))
    edges = [replace(e, guard=e.guard.conjoin(h_le_1), resets=e.resets | {u})
             for e in automaton.edges]
    hb = []
    for q in automaton.locations:
        hb.append(len(edges) + len(hb))
    heartbeat = [Edge(q, q, frozenset([beat]), h_eq_1, frozenset([h, u]), origin=None)
                 for q in automaton.locations]
    zero_hu = Guard.of(ClockConstraint(h, None, "<=", 0), ClockConstraint(h, None, ">=", 0),
                       ClockConstraint(u, None, "<=", 0), ClockConstraint(u, None, ">=", 0))
    out = TimedAutomaton(
        locations=automaton.locations,
        clocks=automaton.clocks + (h, u),
        events=automaton.events + (beat,),
        edges=tuple(edges) + tuple(heartbeat),
        starting=dict(automaton.starting),
        # pin the heartbeat phase at start; bandwidth is shift-invariant
        initial={q: g.conjoin(zero_hu) if not g.is_false else g
                 for q, g in automaton.initial.items()},
        final=dict(automaton.final),
    )
    return Instrumented(out, h, u, beat, frozenset(hb), warnings)


# ---------------------------------------------------------------------------
# Diagonal elimination (location duplication by diagonal truth values)

def _const_rect(atom):
    """Truth of a rectangular atom decidable from nonnegativity alone,
    or None if it genuinely constrains."""
    if atom.bound < 0:
        return atom.rel in (">", ">=")
    if atom.bound == 0 and atom.rel == ">=":
        return True
    if atom.bound == 0 and atom.rel == "<":
        return False
    return None


def _flip(atom_rel):
    return {"<": ">", "<=": ">=", ">": "<", ">=": "<="}[atom_rel]


def eliminate_diagonals(automaton):
    """Remove diagonal atoms by tracking their truth values in locations.

    Each output location is (q, sigma) where sigma fixes the truth of every
    diagonal atom; guards are specialized accordingly and resets branch on
    the rectangular condition that determines the new truth value.
    """
    atoms = []
    for e in automaton.edges:
        atoms.extend(a for a in e.guard.diagonal_atoms() if a not in atoms)
    for d in (automaton.starting, automaton.initial, automaton.final):
        for g in d.values():
            atoms.extend(a for a in g.diagonal_atoms() if a not in atoms)
    if not atoms:
        return automaton

    clocks = automaton.clocks

    def specialize(guard, sigma):
        if guard.is_false:
            return guard
        keep = []
        for c in guard.conjuncts:
            if c.clock_b is None:
                keep.append(c)
            elif c in atoms:
                if not sigma[atoms.index(c)]:
                    return Guard.false()
            else:
                keep.append(c)       # diagonal not tracked: cannot happen
        return Guard(tuple(keep))

    def sigma_guard(sigma):
        parts = [a if v else a.negated() for a, v in zip(atoms, sigma)]
        return Guard(tuple(parts))

    # seed assignments per initial location
    locations = []
    seen = set()
    frontier = []
    initial = {}
    for q in automaton.locations:
        ig = automaton.I(q)
        if ig.is_false or not ig.is_satisfiable(clocks):
            continue
        n = len(atoms)
        for bits in range(1 << n):
            sigma = tuple(bool(bits >> i & 1) for i in range(n))
            combined = ig.conjoin(sigma_guard(sigma))
            if combined.is_satisfiable(clocks):
                loc = (q, sigma)
                if loc not in seen:
                    seen.add(loc)
                    locations.append(loc)
                    frontier.append(loc)
                initial[loc] = combined
    edges = []
    while frontier:
        p, sigma = frontier.pop()
        for e in automaton.edges:
            if e.src != p:
                continue
            g = specialize(e.guard, sigma)
            if g.is_false:
                continue
            # determine new truth values after the reset, branching where a
            # rectangular test on the pre-reset valuation is needed
            branches = [(g, list(sigma))]
            for i, a in enumerate(atoms):
                x, y, b = a.clock_a, a.clock_b, a.bound
                if x in e.resets and y in e.resets:
                    truth = {"<": 0 < b, "<=": 0 <= b, ">": 0 > b, ">=": 0 >= b}[a.rel]
                    for _, s in branches:
                        s[i] = truth
                    continue
                if x not in e.resets and y not in e.resets:
                    continue        # unchanged
                if x in e.resets:
                    cond = ClockConstraint(y, None, _flip(a.rel), -b)
                else:
                    cond = ClockConstraint(x, None, a.rel, b)
                const = _const_rect(cond)
                if const is not None:
                    for _, s in branches:
                        s[i] = const
                    continue
                nxt = []
                for bg, s in branches:
                    for truth, c in ((True, cond), (False, cond.negated())):
                        g2 = bg.conjoin(Guard.of(c))
                        if g2.is_satisfiable(clocks):
                            s2 = list(s)
                            s2[i] = truth
                            nxt.append((g2, s2))
                branches = nxt
            for bg, s in branches:
                tgt = (e.dst, tuple(s))
                if specialize(automaton.S(e.dst), tuple(s)).is_false:
                    continue
                if tgt not in seen:
                    seen.add(tgt)
                    locations.append(tgt)
                    frontier.append(tgt)
                edges.append(Edge((p, sigma), tgt, e.letter, bg, e.resets,
                                  origin=e.origin))
    starting = {(q, s): specialize(automaton.S(q), s) for q, s in locations}
    final = {(q, s): specialize(automaton.F(q), s) for q, s in locations}
    init_map = {loc: initial.get(loc, Guard.false()) for loc in locations}
    return TimedAutomaton(
        locations=tuple(locations), clocks=clocks, events=automaton.events,
        edges=tuple(edges), starting=starting, initial=init_map, final=final)


# ---------------------------------------------------------------------------
# Region splitting

class REdge(NamedTuple):
    """Edge of a region-split automaton: the guard is a single region.

    A named tuple rather than a dataclass: millions of these are created
    during zero-elimination and tuple construction is markedly cheaper.
    """
    src: object
    dst: object
    letter: frozenset
    guard_region: Region
    resets: frozenset
    origin: int | None = None

    @property
    def guard(self):
        return self.guard_region.to_guard()


@dataclass
class RsTA:
    """Region-split automaton.  Locations are (base location, region) pairs;
    S maps each location to its (starting) region."""
    locations: tuple
    clocks: tuple
    events: tuple
    edges: tuple                 # of REdge
    starting: dict               # location -> Region
    initial: frozenset           # locations whose region satisfies I
    final: frozenset
    ceiling: tuple               # per clock, aligned with `clocks`
    h: str
    u: str
    beat: str
    zero_free: bool = False

    def out_edges(self, q):
        return [e for e in self.edges if e.src == q]

    def S(self, q):
        return self.starting[q]

    def I(self, q):
        return self.S(q).to_guard() if q in self.initial else Guard.false()

    def F(self, q):
        return self.S(q).to_guard() if q in self.final else Guard.false()

    def to_timed_automaton(self):
        return TimedAutomaton(
            locations=self.locations, clocks=self.clocks, events=self.events,
            edges=tuple(Edge(e.src, e.dst, e.letter, e.guard, e.resets, e.origin)
                        for e in self.edges),
            starting={q: r.to_guard() for q, r in self.starting.items()},
            initial={q: self.I(q) for q in self.locations},
            final={q: self.F(q) for q in self.locations})

    @property
    def is_empty(self):
        return not self.locations


def per_clock_ceilings(automaton):
    """Largest constant each clock is compared against, over all guards and
    location constraints.  Regions need no finer granularity than this, and
    a never-tested clock (ceiling 0) collapses to a single above-zero ray."""
    bound = {c: 0 for c in automaton.clocks}
    guards = [e.guard for e in automaton.edges]
    for q in automaton.locations:
        guards += [automaton.S(q), automaton.I(q), automaton.F(q)]
    for g in guards:
        if g.is_false:
            continue
        for a in g.conjuncts:
            bound[a.clock_a] = max(bound[a.clock_a], abs(a.bound))
            if a.clock_b is not None:
                bound[a.clock_b] = max(bound[a.clock_b], abs(a.bound))
    return tuple(bound[c] for c in automaton.clocks)


def _guard_dead(region, guard):
    """True if an upper-bound atom of the guard is already violated; time
    elapse only increases values, so the guard can never hold later."""
    for c in guard.conjuncts:
        if c.clock_b is None and c.rel in ("<", "<="):
            try:
                if not region.satisfies(c):
                    return True
            except Exception:
                pass
    return False


def region_split(instr, location_cap=DEFAULT_LOCATION_CAP, seed_cap=DEFAULT_SEED_CAP):
    """Split an instrumented automaton into regions (after removing any
    diagonal constraints), producing a trim RsTA."""
    if isinstance(instr, Instrumented):
        automaton, h, u, beat = instr.automaton, instr.h, instr.u, instr.beat
    else:
        raise ValidationError("region_split expects an instrumented automaton")
    automaton = eliminate_diagonals(automaton)
    clocks = automaton.clocks
    ceiling = per_clock_ceilings(automaton)

    out_edges = {}
    for e in automaton.edges:
        out_edges.setdefault(e.src, []).append(e)

    seen = set()
    order = []
    frontier = []
    initial = set()
    for q in automaton.locations:
        ig = automaton.I(q)
        if ig.is_false:
            continue
        for r in enumerate_regions(ig, clocks, ceiling, cap=seed_cap):
            loc = (q, r)
            if loc not in seen:
                seen.add(loc)
                order.append(loc)
                frontier.append(loc)
            initial.add(loc)

    # the same region is visited from many locations and elapse chains, so
    # successor / reset / guard answers are memoized per region
    succ_cache = {}
    reset_cache = {}
    info_cache = {}         # (region, edge index) -> (dead, contained)
    s_cache = {}            # (region, base location) -> contained in S
    eidx = {id(e): i for i, e in enumerate(automaton.edges)}

    def successor(r):
        nxt = succ_cache.get(r)
        if nxt is None:
            nxt = r.time_successor()
            succ_cache[r] = nxt
        return nxt

    def region_reset(r, resets):
        key = (r, resets)
        rt = reset_cache.get(key)
        if rt is None:
            rt = r.reset(resets)
            reset_cache[key] = rt
        return rt

    def edge_info(r, e):
        key = (r, eidx[id(e)])
        got = info_cache.get(key)
        if got is None:
            got = (_guard_dead(r, e.guard), r.subset_of_guard(e.guard))
            info_cache[key] = got
        return got

    def in_starting(r, q):
        key = (r, q)
        got = s_cache.get(key)
        if got is None:
            got = r.subset_of_guard(automaton.S(q))
            s_cache[key] = got
        return got

    edges = []
    while frontier:
        q, r = frontier.pop()
        if not in_starting(r, q):
            continue
        candidates = out_edges.get(q, [])
        src = (q, r)
        r2 = r
        while True:
            alive = False
            for e in candidates:
                dead, contained = edge_info(r2, e)
                if not dead:
                    alive = True
                if not contained:
                    continue
                rt = region_reset(r2, e.resets)
                if not in_starting(rt, e.dst):
                    continue
                tgt = (e.dst, rt)
                if tgt not in seen:
                    if len(seen) >= location_cap:
                        raise ResourceError(
                            "region split exceeded %d locations" % location_cap,
                            stage="regionSplit")
                    seen.add(tgt)
                    order.append(tgt)
                    frontier.append(tgt)
                edges.append(REdge(src, tgt, e.letter, r2, e.resets, e.origin))
            if not alive:
                break
            nxt = successor(r2)
            if nxt == r2:
                break
            r2 = nxt

    final = {loc for loc in order
             if loc[1].subset_of_guard(automaton.F(loc[0]))}
    initial = {loc for loc in initial if loc in seen}

    # trim: every location is reachable from a seed by construction, so
    # only co-reachability to a final location needs pruning
    co = set(final)
    incoming = {}
    for e in edges:
        incoming.setdefault(e.dst, []).append(e)
    stack = list(final)
    while stack:
        loc = stack.pop()
        for e in incoming.get(loc, ()):
            if e.src not in co:
                co.add(e.src)
                stack.append(e.src)
    keep = co
    order = [loc for loc in order if loc in keep]
    edges = [e for e in edges if e.src in keep and e.dst in keep]

    return RsTA(
        locations=tuple(order), clocks=clocks, events=automaton.events,
        edges=tuple(edges), starting={loc: loc[1] for loc in order},
        initial=frozenset(initial & keep), final=frozenset(final & keep),
        ceiling=ceiling, h=h, u=u, beat=beat)


def check_rsta(rsta):
    """Structural invariants of a region-split automaton; returns a list of
    violation strings (empty = valid)."""
    problems = []
    for loc in rsta.locations:
        if rsta.starting.get(loc) is None:
            problems.append("location %s has no starting region" % (loc,))
    for e in rsta.edges:
        chain = list(rsta.S(e.src).elapse_chain())
        if e.guard_region not in chain:
            problems.append("edge %s: guard region not a time successor of S(src)"
                            % (e,))
        if e.guard_region.reset(e.resets) != rsta.S(e.dst):
            problems.append("edge %s: (elapse(S) ∩ g)[r] != S(dst)" % (e,))
    return problems


# ---------------------------------------------------------------------------
# Zero-elimination

def is_urgent(rsta, edge):
    """An edge is urgent iff its guard region pins u = 0, i.e. it can only
    fire with zero delay."""
    i = edge.guard_region.index(rsta.u)
    return rsta.u in edge.guard_region.zero and edge.guard_region.ints[i] == 0


def eliminate_zeros(rsta):
    """Merge every non-urgent edge with all chains of urgent edges behind it
    into compound edges (letter/reset unions); drop urgent edges; extend the
    initial set along urgent-only paths.  Terminates via the saturating
    worklist over (location, letters, resets) triples."""
    if rsta.is_empty:
        return replace_rsta(rsta, zero_free=True)
    urgent_out = {}
    for e in rsta.edges:
        if is_urgent(rsta, e):
            urgent_out.setdefault(e.src, []).append(e)

    # Letter sets, reset sets, guard regions and locations are interned as
    # small integers: the worklist below touches millions of compound keys on
    # large inputs, and hashing int tuples (plus caching pairwise unions,
    # of which there are few distinct ones) is far cheaper than rebuilding
    # and hashing frozensets each time.  All id assignments follow edge
    # iteration order, so the construction stays deterministic.
    loc_idx = {q: i for i, q in enumerate(rsta.locations)}
    letter_vals, letter_ids = [frozenset()], {frozenset(): 0}
    reset_vals, reset_ids = [frozenset()], {frozenset(): 0}
    region_vals, region_ids = [], {}

    def intern(val, vals, ids):
        got = ids.get(val)
        if got is None:
            got = len(vals)
            vals.append(val)
            ids[val] = got
        return got

    letter_union, reset_union = {}, {}

    def union(a, b, cache, vals, ids):
        if a == 0:
            return b
        if b == 0 or a == b:
            return a
        got = cache.get((a, b))
        if got is None:
            got = intern(vals[a] | vals[b], vals, ids)
            cache[(a, b)] = got
        return got

    # interned urgent edges per source location index
    urgent_out_i = {}
    for src, ues in urgent_out.items():
        urgent_out_i[loc_idx[src]] = [
            (loc_idx[ue.dst],
             intern(ue.letter, letter_vals, letter_ids),
             intern(ue.resets, reset_vals, reset_ids))
            for ue in ues]

    # per-location urgent closure: (target, letter-union, reset-union)
    # interned triples over urgent-only paths; shared by every edge arriving
    # there.  A dict keeps discovery order, which is deterministic.
    closure_of = {}

    def urgent_closure(li):
        got = closure_of.get(li)
        if got is None:
            found = {(li, 0, 0): None}
            stack = [(li, 0, 0)]
            while stack:
                at, letters, resets = stack.pop()
                for dst, ul, ur in urgent_out_i.get(at, ()):
                    t = (dst,
                         union(letters, ul, letter_union, letter_vals, letter_ids),
                         union(resets, ur, reset_union, reset_vals, reset_ids))
                    if t not in found:
                        found[t] = None
                        stack.append(t)
            got = list(found)
            closure_of[li] = got
        return got

    # closure entries with the incoming edge's letter/resets already merged
    # in, shared by all edges agreeing on (target, letter, resets)
    fused_of = {}

    def fused_closure(dst_i, l0, r0):
        key = (dst_i, l0, r0)
        got = fused_of.get(key)
        if got is None:
            got = [(loc,
                    union(l0, letters, letter_union, letter_vals, letter_ids),
                    union(r0, resets, reset_union, reset_vals, reset_ids))
                   for loc, letters, resets in urgent_closure(dst_i)]
            fused_of[key] = got
        return got

    compounds = {}
    for e0 in rsta.edges:
        if is_urgent(rsta, e0):
            continue
        s_i = loc_idx[e0.src]
        l0 = intern(e0.letter, letter_vals, letter_ids)
        r0 = intern(e0.resets, reset_vals, reset_ids)
        g_i = intern(e0.guard_region, region_vals, region_ids)
        for loc, lu, ru in fused_closure(loc_idx[e0.dst], l0, r0):
            key = (s_i, loc, lu, g_i, ru)
            if key not in compounds:
                compounds[key] = e0.origin

    locs = rsta.locations
    edges = []
    classes = {}          # parallel-edge classes, letters ignored
    for (src, dst, li, gi, ri), origin in compounds.items():
        ckey = (src, dst, gi, ri)
        members = classes.get(ckey)
        if members is None:
            classes[ckey] = members = []
        members.append(len(edges))
        edges.append(REdge(locs[src], locs[dst], letter_vals[li],
                           region_vals[gi], reset_vals[ri], origin))
    edges = tuple(edges)
    class_cache = {}
    for (src, dst, gi, ri), members in classes.items():
        class_cache[(locs[src], locs[dst], region_vals[gi],
                     reset_vals[ri])] = members
    compounds = None

    initial = set(rsta.initial)
    stack = list(initial)
    while stack:
        loc = stack.pop()
        for ue in urgent_out.get(loc, ()):
            if ue.dst not in initial:
                initial.add(ue.dst)
                stack.append(ue.dst)

    # mirrored treatment of finals: a location with an urgent-only path to a
    # final location becomes final (trailing zero-delay chains); this may
    # accept truncated trailing compounds but does not affect the bandwidth
    urgent_rev = {}
    for ues in urgent_out.values():
        for ue in ues:
            urgent_rev.setdefault(ue.dst, []).append(ue.src)
    final = set(rsta.final)
    stack = list(final)
    while stack:
        loc = stack.pop()
        for src in urgent_rev.get(loc, ()):
            if src not in final:
                final.add(src)
                stack.append(src)

    out = RsTA(
        locations=rsta.locations, clocks=rsta.clocks, events=rsta.events,
        edges=edges, starting=dict(rsta.starting),
        initial=frozenset(initial), final=frozenset(final),
        ceiling=rsta.ceiling, h=rsta.h, u=rsta.u, beat=rsta.beat,
        zero_free=True)
    trimmed = trim_rsta(out)
    # hand the parallel-edge classes to the downstream consumers (red
    # detection, black dedup); they would otherwise regroup millions of
    # edges that were already keyed letter-free here
    if len(trimmed.edges) == len(edges):
        trimmed._edge_class_cache = class_cache
    else:
        new_idx = {id(e): i for i, e in enumerate(trimmed.edges)}
        remapped = {}
        for key, members in class_cache.items():
            kept = [new_idx[id(edges[m])] for m in members
                    if id(edges[m]) in new_idx]
            if kept:
                remapped[key] = kept
        trimmed._edge_class_cache = remapped
    return trimmed


def trim_rsta(rsta):
    idx = {q: i for i, q in enumerate(rsta.locations)}
    adj = [[] for _ in rsta.locations]
    rev = [[] for _ in rsta.locations]
    pairs = [(idx[e.src], idx[e.dst]) for e in rsta.edges]
    for s, d in pairs:
        adj[s].append(d)
        rev[d].append(s)

    def reach(seeds, nexts):
        seen = set(seeds)
        stack = list(seen)
        while stack:
            for n in nexts[stack.pop()]:
                if n not in seen:
                    seen.add(n)
                    stack.append(n)
        return seen

    fwd = reach((idx[q] for q in rsta.initial), adj)
    bwd = reach((idx[q] for q in rsta.final), rev)
    keep = {rsta.locations[i] for i in fwd & bwd}
    return RsTA(
        locations=tuple(l for l in rsta.locations if l in keep),
        clocks=rsta.clocks, events=rsta.events,
        edges=tuple(e for e in rsta.edges if e.src in keep and e.dst in keep),
        starting={l: r for l, r in rsta.starting.items() if l in keep},
        initial=frozenset(rsta.initial & keep), final=frozenset(rsta.final & keep),
        ceiling=rsta.ceiling, h=rsta.h, u=rsta.u, beat=rsta.beat,
        zero_free=rsta.zero_free)


def replace_rsta(rsta, **kw):
    data = dict(
        locations=rsta.locations, clocks=rsta.clocks, events=rsta.events,
        edges=rsta.edges, starting=rsta.starting, initial=rsta.initial,
        final=rsta.final, ceiling=rsta.ceiling, h=rsta.h, u=rsta.u,
        beat=rsta.beat, zero_free=rsta.zero_free)
    data.update(kw)
    return RsTA(**data)


def nu_word(word):
    """Zero-elimination of a timed word: merge events sharing a timestamp
    into one powerset letter, drop events at time 0."""
    by_time = {}
    for letter, t in word.events:
        if t == 0:
            continue
        by_time.setdefault(t, set()).update(letter)
    return TimedWord(tuple((frozenset(by_time[t]), t) for t in sorted(by_time)))
