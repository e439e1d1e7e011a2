"""Corner-point graph, red-edge detection, stratification, spot extraction,
and abstraction into a weighted timed graph.

A corner-point is (location-or-edge, region, integer vertex of the region's
closure).  Delay edges advance all coordinates by the same natural number
(saturating at ceiling+1 for above-ceiling values); jump edges apply an
edge's resets with duration 0.  An edge of the standard-form automaton is
red iff one of its jump edges lies on a cycle of the zero-duration
subgraph: the classical criterion for being traversable twice in less than
one time unit.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .constraints import ClockConstraint, Guard
from .errors import InternalConsistencyError, ResourceError, ValidationError
from .growth import FiniteAutomaton, growth_rate
from .regions import Region, enumerate_regions, normalize_ceiling

AVATAR_RESET_CAP = 16
DELAY_DURATION_CAP_SLACK = 1     # delays enumerated up to ceiling + this


@dataclass(frozen=True)
class CPNode:
    kind: str            # "loc" | "edge"
    owner: object        # location id, or edge index
    region: Region
    vertex: tuple


@dataclass(frozen=True)
class CPEdge:
    kind: str            # "delay" | "jump"
    src: int
    dst: int
    duration: int
    origin_edge: int | None


@dataclass
class CornerPointGraph:
    nodes: tuple         # of CPNode
    edges: tuple         # of CPEdge
    ceiling: tuple       # per clock


def _regions_of(constraint, clocks, ceiling):
    if isinstance(constraint, Region):
        return [constraint]
    return enumerate_regions(constraint, clocks, ceiling)


def corner_point_graph(locations, clocks, edges, starting, ceiling,
                       node_cap=2_000_000):
    """Build the corner-point graph of a bounded timed graph.

    `edges` is a sequence of objects with src, dst, guard (Region or Guard),
    resets.  `starting` maps location -> Region or Guard.  Delay durations
    are enumerated up to ceiling+1: beyond that every coordinate has
    saturated, so longer waits reach no new corner.
    """
    ceiling = normalize_ceiling(ceiling, tuple(clocks))
    sat = tuple(m + 1 for m in ceiling)
    nodes = []
    index = {}

    def add(node):
        if node not in index:
            index[node] = len(nodes)
            nodes.append(node)
            if len(nodes) > node_cap:
                raise ResourceError("corner-point graph exceeded %d nodes" % node_cap)
        return index[node]

    loc_corners = {}
    for q in locations:
        loc_corners[q] = []
        for r in _regions_of(starting[q], clocks, ceiling):
            for v in r.closure_vertices():
                loc_corners[q].append(add(CPNode("loc", q, r, v)))

    edge_corners = []
    for ei, e in enumerate(edges):
        mine = []
        g = getattr(e, "guard_region", None)
        for r in _regions_of(g if g is not None else e.guard, clocks, ceiling):
            for v in r.closure_vertices():
                mine.append(add(CPNode("edge", ei, r, v)))
        edge_corners.append(mine)

    out_edges = {}
    for ei, e in enumerate(edges):
        out_edges.setdefault(e.src, []).append(ei)

    cp_edges = []
    for q in locations:
        for ni in loc_corners[q]:
            v = nodes[ni].vertex
            for ei in out_edges.get(q, ()):
                for ti in edge_corners[ei]:
                    v2 = nodes[ti].vertex
                    # durations t with v2 == saturate(v + t)
                    t = None
                    ok = True
                    for a, b, s in zip(v, v2, sat):
                        if b < s:
                            if a >= s or (t is not None and b - a != t) or b < a:
                                ok = False
                                break
                            t = b - a
                    if not ok:
                        continue
                    # a saturated target coordinate only needs to reach the
                    # ceiling: the above-ceiling ray's closure starts there,
                    # so the corner is attained as a limit
                    if t is not None:
                        if t >= 0 and all(b < s or a + t >= s - 1
                                          for a, b, s in zip(v, v2, sat)):
                            cp_edges.append(CPEdge("delay", ni, ti, t, ei))
                    else:
                        # every target coordinate saturated: minimal wait
                        t = max([0] + [s - 1 - a for a, s in zip(v, sat)])
                        cp_edges.append(CPEdge("delay", ni, ti, t, ei))
    for ei, e in enumerate(edges):
        for si in edge_corners[ei]:
            v = nodes[si].vertex
            v2 = tuple(0 if c in e.resets else x for c, x in zip(clocks, v))
            for r2 in _regions_of(starting[e.dst], clocks, ceiling):
                if r2.has_vertex(v2):
                    ti = index.get(CPNode("loc", e.dst, r2, v2))
                    if ti is not None:
                        cp_edges.append(CPEdge("jump", si, ti, 0, ei))

    return CornerPointGraph(tuple(nodes), tuple(cp_edges), ceiling)


def zero_duration_sccs(cpg):
    """SCC id per node of the zero-duration subgraph (delay-0 + jumps)."""
    g = nx.DiGraph()
    g.add_nodes_from(range(len(cpg.nodes)))
    for e in cpg.edges:
        if e.duration == 0:
            g.add_edge(e.src, e.dst)
    scc_id = {}
    for i, comp in enumerate(nx.strongly_connected_components(g)):
        for n in comp:
            scc_id[n] = i
    return scc_id


def has_zero_cycle(cpg):
    scc_id = zero_duration_sccs(cpg)
    return any(e.duration == 0 and scc_id[e.src] == scc_id[e.dst]
               for e in cpg.edges)


def _scc_labels(n, srcs, dsts):
    """SCC label per node of a graph given as parallel src/dst index lists."""
    if not srcs:
        return np.arange(n)
    m = csr_matrix((np.ones(len(srcs), dtype=np.int8),
                    (np.asarray(srcs), np.asarray(dsts))), shape=(n, n))
    return connected_components(m, directed=True, connection="strong")[1]


def _zero_lifts(v, sat):
    """Vertices reachable from corner v by a zero-duration delay: each
    coordinate stays, except one at ceiling may saturate (limit corner)."""
    opts = None
    for i, (a, s) in enumerate(zip(v, sat)):
        if a == s - 1:
            if opts is None:
                opts = [(x,) for x in v]
            opts[i] = (a, s)
    if opts is None:         # no coordinate at its ceiling: only v itself
        return (v,)
    return itertools.product(*opts)


def _edge_classes(sfa):
    """Edge indices grouped by parallel-edge class: edges agreeing on
    (src, dst, guard, resets) and differing only in their letter.

    Grouping is by component identity, which coincides with value equality
    for zero-elimination output (all components are interned there); on
    other inputs equal classes may stay apart, which only costs speed, not
    correctness, wherever this helper is used.  The result is cached on the
    automaton object: red detection and stratification share it.
    """
    got = getattr(sfa, "_edge_class_cache", None)
    if got is None:
        by_id = {}
        for i, e in enumerate(sfa.edges):
            key = (id(e.src), id(e.dst), id(e.guard_region), id(e.resets))
            by_id.setdefault(key, []).append(i)
        got = {}
        for members in by_id.values():
            e = sfa.edges[members[0]]
            key = (e.src, e.dst, e.guard_region, e.resets)
            if key in got:
                got[key].extend(members)
            else:
                got[key] = members
        sfa._edge_class_cache = got
    return got


def detect_red(sfa):
    """Indices of red edges of a standard-form automaton: those whose jump
    edge closes a zero-duration corner-point cycle.

    Only the zero-duration subgraph of the corner-point graph is built:
    positive-duration delay edges can never lie on a duration-0 cycle, and
    a zero-duration step from a location corner pins the edge corner to the
    same vertex (up to ceiling saturation), so the subgraph is tiny.
    """
    ceiling = normalize_ceiling(sfa.ceiling, tuple(sfa.clocks))
    sat = tuple(m + 1 for m in ceiling)
    clocks = sfa.clocks
    reset_pos = {}

    vertex_cache = {}

    def vertices(region):
        got = vertex_cache.get(region)
        if got is None:
            got = frozenset(region.closure_vertices())
            vertex_cache[region] = got
        return got

    # group parallel edges: redness only depends on (src, dst, guard, resets)
    classes = _edge_classes(sfa)

    node_id = {}

    def nid(x):
        got = node_id.get(x)
        if got is None:
            got = len(node_id)
            node_id[x] = got
        return got

    j_src, j_dst, j_key = [], [], []
    for (src, dst, guard, resets), members in classes.items():
        rp = reset_pos.get(resets)
        if rp is None:
            rp = tuple(i for i, c in enumerate(clocks) if c in resets)
            reset_pos[resets] = rp
        gverts = vertices(guard)
        dverts = vertices(sfa.S(dst))
        for v in vertices(sfa.S(src)):
            for v1 in _zero_lifts(v, sat):
                if v1 not in gverts:
                    continue
                v2 = list(v1)
                for i in rp:
                    v2[i] = 0
                v2 = tuple(v2)
                if v2 in dverts:
                    j_src.append(nid((src, v)))
                    j_dst.append(nid((dst, v2)))
                    j_key.append((src, dst, guard, resets))

    labels = _scc_labels(len(node_id), j_src, j_dst)
    red = set()
    for s, d, key in zip(j_src, j_dst, j_key):
        if labels[s] == labels[d]:
            red.update(classes[key])
    return frozenset(red)


# ---------------------------------------------------------------------------
# Stratification

from .preprocess import REdge, RsTA, trim_rsta  # noqa: E402  (no cycle: spots not imported there)


@dataclass
class StratifiedAutomaton:
    """An SFA over avatar locations (sfa-location, Z) with edge coloring."""
    rsta: RsTA
    red: frozenset       # indices into rsta.edges


def stratify(sfa, red_indices, dedup_black=False):
    """Build the avatar automaton: each location q is copied into (q, Z) for
    Z a subset of the clocks reset in q's red SCC; black edges leave only
    empty-avatars, red edges shrink the commitment set, finals live on
    empty-avatars only.

    With dedup_black, parallel black edges differing only in their letter
    are emitted once: letters of black edges survive to the abstraction,
    which drops them, so they never influence the final ratio.  (Red edge
    letters feed spot growth rates and are always kept.)"""
    loc_i = {q: i for i, q in enumerate(sfa.locations)}
    red_list = sorted(red_indices)
    labels = _scc_labels(len(sfa.locations),
                         [loc_i[sfa.edges[i].src] for i in red_list],
                         [loc_i[sfa.edges[i].dst] for i in red_list])
    scc_id = {q: labels[loc_i[q]] for q in sfa.locations}
    scc_resets = {}
    for i in red_list:
        e = sfa.edges[i]
        if scc_id[e.src] == scc_id[e.dst]:
            cid = scc_id[e.src]
            scc_resets[cid] = scc_resets.get(cid, frozenset()) | e.resets
    resets_of = {q: scc_resets.get(scc_id[q], frozenset())
                 for q in sfa.locations}

    locations = []
    for q in sfa.locations:
        rs = resets_of[q]
        if len(rs) > AVATAR_RESET_CAP:
            raise ResourceError("red SCC resets %d clocks, avatar cap is %d"
                                % (len(rs), AVATAR_RESET_CAP), stage="stratify")
        for z in _subsets(rs):
            locations.append((q, z))

    # avatar location tuples are interned: millions of edges share them
    avatar = {}

    def av(q, z):
        key = (q, z)
        got = avatar.get(key)
        if got is None:
            avatar[key] = key
            got = key
        return got

    empty = frozenset()
    zsets = {q: _subsets(resets_of[q]) for q in sfa.locations}
    empty_av = {q: av(q, empty) for q in sfa.locations}

    black_reps = None
    if dedup_black:
        black_reps = set()
        for members in _edge_classes(sfa).values():
            black = [m for m in members if m not in red_indices]
            if black:
                black_reps.add(min(black))

    edges = []
    red_flags = []
    for i, e in enumerate(sfa.edges):
        if i in red_indices:
            rs = resets_of[e.src]
            dst_rs = resets_of[e.dst]
            for z in _subsets_containing(rs, e.resets):
                for u in _subsets(e.resets):
                    dst_z = z - u
                    if dst_z <= dst_rs:
                        edges.append(REdge(av(e.src, z), av(e.dst, dst_z),
                                           e.letter, e.guard_region, e.resets,
                                           e.origin))
                        red_flags.append(True)
        else:
            if black_reps is not None and i not in black_reps:
                continue
            src_av = empty_av[e.src]
            for z in zsets[e.dst]:
                edges.append(REdge(src_av, av(e.dst, z), e.letter,
                                   e.guard_region, e.resets, e.origin))
                red_flags.append(False)

    starting = {av(q, z): sfa.starting[q] for q, z in locations}
    initial = frozenset(av(q, z) for q, z in locations if q in sfa.initial)
    final = frozenset(av(q, z) for q, z in locations
                      if q in sfa.final and not z)

    rsta = RsTA(locations=tuple(av(q, z) for q, z in locations),
                clocks=sfa.clocks, events=sfa.events,
                edges=tuple(edges), starting=starting, initial=initial,
                final=final, ceiling=sfa.ceiling, h=sfa.h, u=sfa.u,
                beat=sfa.beat, zero_free=sfa.zero_free)
    trimmed = trim_rsta(rsta)
    # re-index the red flags after trimming (edge objects are shared)
    kept = {id(e): i for i, e in enumerate(trimmed.edges)}
    red_after = frozenset(kept[id(e)] for i, e in enumerate(rsta.edges)
                          if red_flags[i] and id(e) in kept)
    return StratifiedAutomaton(trimmed, red_after)


# memoized: stratify asks for the same few clock sets millions of times
_SUBSET_CACHE = {}
_SUPERSET_CACHE = {}


def _subsets(s):
    key = frozenset(s)
    got = _SUBSET_CACHE.get(key)
    if got is None:
        items = sorted(key)
        got = tuple(frozenset(c) for k in range(len(items) + 1)
                    for c in itertools.combinations(items, k))
        _SUBSET_CACHE[key] = got
    return got


def _subsets_containing(universe, must):
    key = (frozenset(universe), frozenset(must))
    got = _SUPERSET_CACHE.get(key)
    if got is None:
        u, m = key
        got = tuple(m | r for r in _subsets(u - m)) if m <= u else ()
        _SUPERSET_CACHE[key] = got
    return got


# ---------------------------------------------------------------------------
# Spots

@dataclass
class Spot:
    id: int
    members: tuple       # avatar locations
    Z: frozenset
    guard: Guard         # the shared unit-window guard shape
    resets: frozenset
    offsets: dict        # clock outside Z -> integer window offset d_y
    alpha: object        # GrowthRate


def _window_of(region, clock):
    """Open-window position of a clock: its integer offset, "top" if above
    the ceiling (a clock that outlived its constants; the bounded semantics
    treats the whole above-ceiling ray as one window), or None if the clock
    sits exactly on an integer (which breaks the speedy shape)."""
    if region.int_of(clock) is None:
        return "top"
    if clock in region.zero:
        return None
    return region.int_of(clock)


def extract_spots(strat, precision=1e-9):
    """Red SCCs of the stratified automaton, validated against the speedy
    shape (shared Z, unit-window guards, resets inside Z) and annotated
    with their growth rates."""
    rsta = strat.rsta
    g = nx.DiGraph()
    g.add_nodes_from(rsta.locations)
    for i in strat.red:
        e = rsta.edges[i]
        g.add_edge(e.src, e.dst)
    scc_id = {}
    comps = []
    for i, comp in enumerate(nx.strongly_connected_components(g)):
        comps.append(comp)
        for n in comp:
            scc_id[n] = i
    intra = {}
    for i in strat.red:
        e = rsta.edges[i]
        if scc_id[e.src] == scc_id[e.dst]:
            intra.setdefault(scc_id[e.src], []).append(e)

    spots = []
    growth_cache = {}    # canonical FA shape -> GrowthRate (phase copies repeat)
    for cid in sorted(intra, key=lambda c: sorted(map(str, comps[c]))):
        edges = intra[cid]
        members = tuple(sorted(comps[cid], key=str))
        zs = {loc[1] for loc in members}
        if len(zs) != 1:
            raise InternalConsistencyError(
                "spot avatars disagree on Z: %s" % sorted(map(sorted, zs)),
                stage="detectSpots")
        z = next(iter(zs))
        resets = frozenset().union(*(e.resets for e in edges))
        if not resets <= z:
            raise InternalConsistencyError(
                "spot resets %s escape Z=%s" % (sorted(resets), sorted(z)),
                stage="detectSpots")
        ceil = dict(zip(rsta.clocks, rsta.ceiling))
        offsets = {}
        for e in edges:
            r = e.guard_region
            for c in rsta.clocks:
                w = _window_of(r, c)
                if w is None:
                    raise InternalConsistencyError(
                        "spot guard %s does not keep %s in an open unit window"
                        % (r, c), stage="detectSpots")
                if c in z:
                    # a never-tested clock (ceiling 0) cannot show its (0,1)
                    # window; its whole positive ray is one region
                    if not (w == 0 or (w == "top" and ceil[c] == 0)):
                        raise InternalConsistencyError(
                            "committed clock %s not in (0,1) in %s" % (c, r),
                            stage="detectSpots")
                elif offsets.setdefault(c, w) != w:
                    raise InternalConsistencyError(
                        "spot guards disagree on the window of %s" % c,
                        stage="detectSpots")
        atoms = []
        for c in rsta.clocks:
            d = 0 if c in z else offsets[c]
            if d == "top" or (c in z and ceil[c] == 0):
                atoms.append(ClockConstraint(c, None, ">", ceil[c]))
            else:
                atoms.append(ClockConstraint(c, None, ">", d))
                atoms.append(ClockConstraint(c, None, "<", d + 1))
        guard = Guard(tuple(atoms))
        idx = {m: i for i, m in enumerate(members)}
        shape = (len(members),
                 frozenset((idx[e.src], e.letter, idx[e.dst]) for e in edges))
        alpha = growth_cache.get(shape)
        if alpha is None:
            fa = FiniteAutomaton(members,
                                 frozenset((e.src, e.letter, e.dst) for e in edges),
                                 frozenset(members), frozenset(members))
            alpha = growth_rate(fa, precision=precision)
            growth_cache[shape] = alpha
        spots.append(Spot(len(spots), members, z, guard, resets, offsets, alpha))
    return spots


# ---------------------------------------------------------------------------
# Abstraction to a weighted timed graph

@dataclass(frozen=True)
class WEdge:
    src: object
    dst: object
    guard: object        # Region (plain copies) or Guard (abstract edges)
    resets: frozenset
    kind: str            # "plain" | "copy" | "abstract"
    origin: int | None = None

    @property
    def guard_region(self):
        return self.guard if isinstance(self.guard, Region) else None


@dataclass
class WeightedTimedGraph:
    locations: tuple
    clocks: tuple
    edges: tuple          # of WEdge
    starting: dict        # location -> Region or Guard
    weight: dict          # location -> float (growth rate of its spot)
    roots: frozenset      # locations inheriting an initial flag
    ceiling: int

    def corner_point_graph(self):
        class _E:
            __slots__ = ("src", "dst", "guard", "resets")
            def __init__(self, e):
                self.src, self.dst, self.guard, self.resets = \
                    e.src, e.dst, e.guard, e.resets
        return corner_point_graph(self.locations, self.clocks,
                                  [_E(e) for e in self.edges],
                                  self.starting, self.ceiling)


def abstract_wtg(strat, spots, check_divergence=True):
    """Replace each spot by reward-carrying entry copies: intra-spot red
    edges disappear; every edge into a spot location q is duplicated toward
    the copy of q; one abstract edge per ordered member pair carries the
    spot's unit-window guard and reset set.

    The abstraction removes letters, so edges agreeing on (src, dst, guard,
    resets) are the same edge and are emitted once.

    `check_divergence=False` defers the time-divergence assertion to a
    caller that builds the corner-point graph anyway.
    """
    rsta = strat.rsta
    spot_of = {}
    for s in spots:
        for m in s.members:
            spot_of[m] = s
    check = lambda q: ("chk", q)

    locations = list(rsta.locations) + [check(q) for q in rsta.locations
                                        if q in spot_of]
    edges = {}

    def add(src, dst, guard, resets, kind, origin=None):
        key = (src, dst, guard, resets)
        if key not in edges:
            edges[key] = WEdge(src, dst, guard, resets, kind, origin)

    for i, e in enumerate(rsta.edges):
        same_spot = (i in strat.red and e.src in spot_of and e.dst in spot_of
                     and spot_of[e.src] is spot_of[e.dst])
        if same_spot:
            continue
        add(e.src, e.dst, e.guard_region, e.resets, "plain", e.origin)
        if e.dst in spot_of:
            add(e.src, check(e.dst), e.guard_region, e.resets, "copy", e.origin)
    for s in spots:
        for p in s.members:
            for q in s.members:
                add(check(p), q, s.guard, s.resets, "abstract")

    starting = {}
    weight = {}
    for q in rsta.locations:
        starting[q] = rsta.starting[q]
        weight[q] = 0.0
        if q in spot_of:
            starting[check(q)] = rsta.starting[q]
            weight[check(q)] = spot_of[q].alpha.value
    roots = set(rsta.initial) | {check(q) for q in rsta.initial if q in spot_of}

    wtg = WeightedTimedGraph(tuple(locations), rsta.clocks,
                             tuple(edges.values()), starting, weight,
                             frozenset(roots), rsta.ceiling)
    if check_divergence and has_zero_cycle(wtg.corner_point_graph()):
        raise InternalConsistencyError(
            "abstract graph is not time-divergent (zero-duration corner cycle)",
            stage="abstract")
    return wtg
