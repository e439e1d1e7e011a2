"""Maximum reward-to-time cycle ratio and the end-to-end bandwidth pipeline.

The ratio of a cycle is (sum of rewards)/(sum of times); rewards sit on
delay edges only (reward = location weight x duration) and every cycle
takes at least one time unit in a time-divergent graph.  Two independent
methods are implemented: parametric bisection on lambda with Bellman-Ford
positive-cycle detection for reward - lambda*time, and exhaustive simple
cycle enumeration in exact rational arithmetic when the cycle count is
small.  When both run they must agree within twice the precision.
"""

from __future__ import annotations

import math
import random
import time as _time
from dataclasses import dataclass, field
from fractions import Fraction

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

try:
    from numba import njit as _njit
except ImportError:                  # pragma: no cover - numba is a hard
    _njit = None                     # dependency, but the fallback keeps
                                     # the package usable without it

from .errors import InternalConsistencyError, ValidationError
from .growth import growth_rate
from .preprocess import add_heartbeat_urgency, eliminate_zeros, region_split
from .regions import Region, enumerate_regions, normalize_ceiling
from .spots import abstract_wtg, corner_point_graph, detect_red, extract_spots, stratify

DEFAULT_PRECISION = 1e-9
ENUMERATION_CAP = 10**4


@dataclass(frozen=True)
class RatioEdge:
    src: object
    dst: object
    reward: Fraction
    time: int
    descriptor: object   # str()-able; may be rendered lazily


@dataclass
class RatioGraph:
    nodes: tuple
    edges: tuple        # of RatioEdge


@dataclass
class RatioResult:
    alpha: float
    obese: bool
    method: str                          # "bisection" | "enumeration" | "both" | "empty"
    witness: tuple = ()                  # edge descriptors of the best cycle
    witness_duration: int = 0
    alpha_exact: Fraction | None = None  # witness ratio, exact
    interval: tuple | None = None        # bisection bracket
    certificate: tuple | None = None     # (upper lambda, max potential slack)
    c_estimate: float | None = None


def _cyclic_core(graph):
    """Edges lying inside a strongly connected component (the only edges
    that can appear on cycles)."""
    nodes = list(dict.fromkeys(graph.nodes))
    idx = {q: i for i, q in enumerate(nodes)}
    for e in graph.edges:
        for q in (e.src, e.dst):
            if q not in idx:
                idx[q] = len(nodes)
                nodes.append(q)
    srcs = [idx[e.src] for e in graph.edges]
    dsts = [idx[e.dst] for e in graph.edges]
    labels = _strong_components(len(nodes), srcs, dsts)
    scc_id = {q: int(labels[i]) for i, q in enumerate(nodes)}
    return [e for e, s, d in zip(graph.edges, srcs, dsts)
            if labels[s] == labels[d]], scc_id


def enumerate_simple_cycles(edges, cap=ENUMERATION_CAP, step_cap=None):
    """All node-simple cycles (with every parallel-edge choice), as
    (reward, time, descriptor tuple) triples; None if `cap` (number of
    cycles) or `step_cap` (DFS work budget) is exceeded.

    Each cycle is enumerated once, rooted at its smallest node.
    """
    if step_cap is None:
        step_cap = 200 * cap
    nodes = sorted({e.src for e in edges} | {e.dst for e in edges}, key=str)
    order = {n: i for i, n in enumerate(nodes)}
    out_by = {}
    for e in edges:
        out_by.setdefault(e.src, []).append(e)
    for lst in out_by.values():
        lst.sort(key=lambda e: (order[e.dst], e.descriptor))
    cycles = []
    steps = [0]

    def dfs(root, node, on_path, path):
        for e in out_by.get(node, ()):  # noqa: B023
            steps[0] += 1
            if steps[0] > step_cap:
                raise _CapHit
            if order[e.dst] < order[root]:
                continue
            if e.dst == root:
                cycles.append(path + [e])
                if len(cycles) > cap:
                    raise _CapHit
            elif e.dst not in on_path:
                on_path.add(e.dst)
                dfs(root, e.dst, on_path, path + [e])
                on_path.remove(e.dst)

    try:
        for root in nodes:
            dfs(root, root, {root}, [])
    except _CapHit:
        return None
    return [(sum((e.reward for e in c), Fraction(0)),
             sum(e.time for e in c),
             tuple(e.descriptor for e in c)) for c in cycles]


class _CapHit(Exception):
    pass


def _bf_kernel_py(srcs, dsts, w, n):
    """Reference implementation of the compiled kernel below; identical
    relaxation order and tie-breaking."""
    dist = np.zeros(n)
    pred = np.full(n, -1, np.int64)
    for _sweep in range(n + 2):
        changed = False
        for k in range(len(srcs)):
            nd = dist[srcs[k]] + w[k]
            if nd > dist[dsts[k]] + 1e-15:
                dist[dsts[k]] = nd
                pred[dsts[k]] = k
                changed = True
        if not changed:
            return 0, pred, dist
        color = np.zeros(n, np.int8)
        for s in range(n):
            if color[s]:
                continue
            node = s
            while node != -1 and color[node] == 0:
                color[node] = 1
                e = pred[node]
                node = srcs[e] if e != -1 else -1
            if node != -1 and color[node] == 1:
                return 1, pred, dist
            node = s
            while node != -1 and color[node] == 1:
                color[node] = 2
                e = pred[node]
                node = srcs[e] if e != -1 else -1
    return -1, pred, dist


if _njit is not None:
    _bf_kernel = _njit(cache=True)(_bf_kernel_py)
else:
    _bf_kernel = _bf_kernel_py


def _pred_cycle_edges(srcs, pred, n):
    """A cycle in the predecessor edge-index graph (list of edge indices)."""
    color = np.zeros(n, np.int8)
    for s in range(n):
        if color[s]:
            continue
        node = s
        while node != -1 and color[node] == 0:
            color[node] = 1
            e = pred[node]
            node = srcs[e] if e != -1 else -1
        if node != -1 and color[node] == 1:
            cycle = []
            cur = node
            while True:
                e = pred[cur]
                cycle.append(e)
                cur = srcs[e]
                if cur == node:
                    break
            cycle.reverse()
            return cycle
        node = s
        while node != -1 and color[node] == 1:
            color[node] = 2
            e = pred[node]
            node = srcs[e] if e != -1 else -1
    return None


def max_ratio(graph, precision=DEFAULT_PRECISION, enumeration_cap=ENUMERATION_CAP,
              rng_seed=0):
    """Maximum reward-to-time ratio over cycles of a RatioGraph."""
    if precision <= 0:
        raise ValidationError("precision must be positive")
    core, _ = _cyclic_core(graph)
    if not core:
        return RatioResult(alpha=0.0, obese=False, method="empty")
    # time-divergence: no cycle of total time 0
    zg = RatioGraph(graph.nodes, tuple(e for e in core if e.time == 0))
    if _cyclic_core(zg)[0]:
        raise ValidationError("not time-divergent: zero-time cycle present")
    # exact zero test: cycles are made of core edges with times >= 1, so the
    # ratio is positive iff some core edge carries positive reward
    if all(e.reward <= 0 for e in core):
        return RatioResult(alpha=0.0, obese=False, method="enumeration",
                           alpha_exact=Fraction(0))

    nodes = sorted({e.src for e in core} | {e.dst for e in core}, key=str)

    enum_best = None
    # a strongly connected digraph has at least m - n + 1 simple cycles
    # (one per edge outside a spanning arborescence), so past that bound the
    # DFS cannot stay under the cap and is not even started
    cycles = None
    if len(core) - len(nodes) + 1 <= enumeration_cap:
        cycles = enumerate_simple_cycles(core, cap=enumeration_cap)
    if cycles is not None:
        for reward, t, desc in cycles:
            desc = tuple(str(d) for d in desc)
            key = (Fraction(reward, t), -t, list(desc))
            if enum_best is None or key > (enum_best[0], enum_best[1],
                                           list(enum_best[2])):
                enum_best = (key[0], -t, desc)

    idx = {q: i for i, q in enumerate(nodes)}
    n = len(nodes)
    srcs = np.fromiter((idx[e.src] for e in core), np.int64, count=len(core))
    dsts = np.fromiter((idx[e.dst] for e in core), np.int64, count=len(core))
    rew = np.array([float(e.reward) for e in core])
    tim = np.array([float(e.time) for e in core])

    def positive_cycle(lam):
        found, pred, dist = _bf_kernel(srcs, dsts, rew - lam * tim, n)
        if found < 0:
            raise InternalConsistencyError(
                "cycle detection did not converge", stage="rewardPerTime")
        return found == 1, pred, dist

    def cycle_ratio(pred):
        cyc = _pred_cycle_edges(srcs, pred, n)
        if cyc is None:
            raise InternalConsistencyError("positive cycle without a witness",
                                           stage="rewardPerTime")
        r = sum((core[k].reward for k in cyc), Fraction(0))
        t = sum(core[k].time for k in cyc)
        return Fraction(r, t), cyc

    # r_e <= M * t_e for every edge (zero-time edges carry zero reward), so
    # every cycle ratio is bounded by the best per-edge ratio M
    lo = 0.0
    hi = max(float(e.reward) / e.time for e in core if e.time > 0) + precision
    best = None
    # accelerated bisection: a positive round jumps the lower bound to the
    # exact ratio of the cycle it found, and the next round probes just
    # above that ratio, so a failed probe pins the optimum immediately
    # instead of halving all the way down.  At most two probes run in a row
    # (a creeping sequence of near-equal cycle ratios must not break the
    # logarithmic worst case), so the iteration count stays O(log(range)).
    probing = False
    probes_in_row = 0
    while hi - lo > precision:
        if probing and probes_in_row < 2:
            lam = lo + precision
            probes_in_row += 1
        else:
            lam = (lo + hi) / 2
            probes_in_row = 0
        found, pred, _ = positive_cycle(lam)
        if found:
            r, cyc = cycle_ratio(pred)
            if best is None or r > best[0]:
                best = (r, cyc)
            lo = min(hi, max(lam, math.nextafter(float(r), 0.0)))
            probing = True
        else:
            hi = lam
            probing = False
    # dual certificate: the converged potential at the upper bracket shows
    # dist[src] + (r - hi*t) <= dist[dst] + slack for every edge, hence no
    # cycle has ratio above hi + n*slack (cycle times are >= 1)
    found_hi, _, dist_hi = positive_cycle(hi)
    if found_hi:
        raise InternalConsistencyError(
            "upper bisection bracket admits a positive cycle",
            stage="rewardPerTime")
    cert_slack = float(np.max(dist_hi[srcs] + (rew - hi * tim) - dist_hi[dsts]))

    if best is None:
        lam_witness = max(0.0, lo - precision)
        found, pred, _ = positive_cycle(lam_witness)
        if not found:
            raise InternalConsistencyError("bisection lost its witness cycle",
                                           stage="rewardPerTime")
        best = cycle_ratio(pred)
    bis_exact, cycle_idx = best
    cycle = [core[k] for k in cycle_idx]
    bis_time = sum(e.time for e in cycle)

    if enum_best is not None:
        ratio, neg_t, desc = enum_best
        if abs(float(ratio) - float(bis_exact)) > 2 * precision:
            raise InternalConsistencyError(
                "ratio methods disagree: enumeration %s vs bisection %s"
                % (float(ratio), float(bis_exact)), stage="rewardPerTime")
        method = "both"
        alpha_exact = ratio
        witness = desc
        duration = -neg_t
    else:
        method = "bisection"
        alpha_exact = bis_exact
        witness = tuple(str(e.descriptor) for e in cycle)
        duration = bis_time

    alpha = float(alpha_exact)
    # empirical bound constant over sampled paths (diagnostic only)
    rng = random.Random(rng_seed)
    out_by = {}
    for e in core:
        out_by.setdefault(e.src, []).append(e)
    c_est = 0.0
    for _ in range(200):
        node = rng.choice(nodes)
        r, t = Fraction(0), 0
        for _ in range(30):
            opts = out_by.get(node)
            if not opts:
                break
            e = rng.choice(opts)
            r += e.reward
            t += e.time
            node = e.dst
            c_est = max(c_est, float(r) - alpha * t)
    return RatioResult(alpha=alpha, obese=alpha > 10 * precision, method=method,
                       witness=witness, witness_duration=duration,
                       alpha_exact=alpha_exact, interval=(lo, hi),
                       certificate=(hi, cert_slack), c_estimate=c_est)


# ---------------------------------------------------------------------------
# Weighted corner-point graph -> ratio graph

def _cp_descriptor(cpg, e):
    s, d = cpg.nodes[e.src], cpg.nodes[e.dst]
    def node_str(n):
        return "%s@%s%s" % (n.owner if n.kind == "loc" else "e%d" % n.owner,
                            ",".join(map(str, n.vertex)), "")
    return "%s --%s:%d--> %s" % (node_str(s), e.kind, e.duration, node_str(d))


def ratio_graph_of_wtg(wtg, cpg=None):
    """Weighted corner-point graph of a WTG: delay edges get reward
    w(location) x duration, jump edges reward and time 0."""
    if cpg is None:
        cpg = wtg.corner_point_graph()
    edges = []
    for e in cpg.edges:
        if e.kind == "delay":
            w = Fraction(wtg.weight.get(cpg.nodes[e.src].owner, 0.0))
            reward = w * e.duration
            t = e.duration
        else:
            reward, t = Fraction(0), 0
        edges.append(RatioEdge(e.src, e.dst, reward, t, _cp_descriptor(cpg, e)))
    return RatioGraph(tuple(range(len(cpg.nodes))), tuple(edges)), cpg


# ---------------------------------------------------------------------------
# Compact corner-point ratio graph (cyclic core only)

def _strong_components(n, srcs, dsts):
    """SCC label per node of a graph given as parallel src/dst index lists."""
    if not srcs:
        return np.arange(n)
    m = csr_matrix((np.ones(len(srcs), dtype=np.int8),
                    (np.asarray(srcs), np.asarray(dsts))), shape=(n, n))
    return connected_components(m, directed=True, connection="strong")[1]


def _compose_duration(v, w, sat):
    """Delay duration taking corner v to guard corner w, or None.

    Unsaturated target coordinates fix the duration exactly; a saturated
    coordinate (value sat_c = ceiling_c + 1) only requires reaching the
    ceiling, because the closure of the above-ceiling ray starts there.  If
    every coordinate of w is saturated, the minimal sufficient wait is used.
    """
    t = None
    for a, b, s in zip(v, w, sat):
        if b < s:
            d = b - a
            if d < 0 or (t is not None and d != t):
                return None
            t = d
    if t is None:
        return max([0] + [s - 1 - a for a, s in zip(v, sat)])
    for a, b, s in zip(v, w, sat):
        if b == s and a + t < s - 1:
            return None
    return t


def core_ratio_graph(wtg):
    """Weighted corner-point ratio graph of a WTG, cyclic core only.

    Corner-point nodes are identified by (location, closure vertex): delay
    and jump feasibility depend only on the integer vertex, so corners of
    different regions sharing a vertex have identical neighborhoods and
    merging them is exact.  Every delay edge is composed with the jump it
    enables, leaving only location corners as nodes.  The graph is first
    restricted to strongly connected locations and finally to strongly
    connected corners (max_ratio only inspects cycles), and out-/in-degree-1
    chains are contracted into single edges with summed reward and time.

    Raises InternalConsistencyError if a zero-duration corner cycle exists:
    the abstracted graph must be time-divergent.
    """
    clocks = tuple(wtg.clocks)
    ceiling = normalize_ceiling(wtg.ceiling, clocks)
    sat = tuple(m + 1 for m in ceiling)

    loc_id = {q: i for i, q in enumerate(wtg.locations)}
    labels = _strong_components(
        len(wtg.locations),
        [loc_id[e.src] for e in wtg.edges],
        [loc_id[e.dst] for e in wtg.edges])
    core = [e for e in wtg.edges if labels[loc_id[e.src]] == labels[loc_id[e.dst]]]
    if not core:
        return RatioGraph((), ())

    region_cache = {}

    def start_vertices(q):
        r = wtg.starting[q]
        if isinstance(r, Region):
            return tuple(dict.fromkeys(r.closure_vertices()))
        got = region_cache.get(r)
        if got is None:
            vs = {}
            for reg in enumerate_regions(r, clocks, ceiling):
                for v in reg.closure_vertices():
                    vs[v] = None
            got = tuple(vs)
            region_cache[r] = got
        return got

    guard_cache = {}

    def guard_vertices(g):
        got = guard_cache.get(g)
        if got is None:
            if isinstance(g, Region):
                got = tuple(dict.fromkeys(g.closure_vertices()))
            else:
                vs = {}
                for reg in enumerate_regions(g, clocks, ceiling):
                    for v in reg.closure_vertices():
                        vs[v] = None
                got = tuple(vs)
            guard_cache[g] = got
        return got

    node_owner = []          # WTG location per corner node
    node_vertex = []
    corner_lists = {}        # location -> [(vertex, node id)]
    corner_index = {}        # location -> {vertex: node id}

    def corners(q):
        got = corner_lists.get(q)
        if got is None:
            got = []
            idx = {}
            for v in start_vertices(q):
                nid = len(node_owner)
                node_owner.append(q)
                node_vertex.append(v)
                got.append((v, nid))
                idx[v] = nid
            corner_lists[q] = got
            corner_index[q] = idx
        return got

    reset_pos = {}

    def rpos(resets):
        got = reset_pos.get(resets)
        if got is None:
            got = tuple(i for i, c in enumerate(clocks) if c in resets)
            reset_pos[resets] = got
        return got

    # composed delay+jump edges, as parallel lists.  Delay feasibility only
    # depends on (source location, guard), and the reset image of a guard
    # vertex only on (vertex, reset set), so both are cached across the many
    # parallel edges sharing them.
    compose_cache = {}
    reset_cache = {}
    c_src, c_dst, c_t, c_e = [], [], [], []
    ap_src, ap_dst = c_src.append, c_dst.append
    ap_t, ap_e = c_t.append, c_e.append
    for ei, e in enumerate(core):
        sverts = corners(e.src)
        corners(e.dst)
        dindex = corner_index[e.dst]
        rp = rpos(e.resets)
        ckey = (e.src, e.guard)
        comp = compose_cache.get(ckey)
        if comp is None:
            comp = []
            for w in guard_vertices(e.guard):
                hits = []
                for v, vid in sverts:
                    t = _compose_duration(v, w, sat)
                    if t is not None:
                        hits.append((vid, t))
                if hits:
                    comp.append((w, hits))
            compose_cache[ckey] = comp
        for w, hits in comp:
            rkey = (w, rp)
            u = reset_cache.get(rkey)
            if u is None:
                u = list(w)
                for i in rp:
                    u[i] = 0
                u = tuple(u)
                reset_cache[rkey] = u
            uid = dindex.get(u)
            if uid is None:
                continue
            for vid, t in hits:
                ap_src(vid)
                ap_dst(uid)
                ap_t(t)
                ap_e(ei)

    n = len(node_owner)
    # time-divergence: no cycle made of zero-duration composed edges
    z_src = [s for s, t in zip(c_src, c_t) if t == 0]
    z_dst = [d for d, t in zip(c_dst, c_t) if t == 0]
    if z_src:
        zl = _strong_components(n, z_src, z_dst)
        if any(zl[s] == zl[d] for s, d in zip(z_src, z_dst)):
            raise InternalConsistencyError(
                "abstract graph is not time-divergent "
                "(zero-duration corner cycle)", stage="abstract")

    cl = _strong_components(n, c_src, c_dst)
    weight_frac = {}
    for q in set(node_owner):
        weight_frac[loc_id[q]] = Fraction(wtg.weight.get(q, 0.0))

    # surviving edges: [src, dst, time, reward, corner path]
    src_arr = np.fromiter(c_src, np.int64, count=len(c_src))
    dst_arr = np.fromiter(c_dst, np.int64, count=len(c_dst))
    kept = np.nonzero(cl[src_arr] == cl[dst_arr])[0] if len(c_src) else []
    reward_cache = {}
    records = []
    for k in kept:
        s, d, t = c_src[k], c_dst[k], c_t[k]
        wi = loc_id[node_owner[s]]
        reward = reward_cache.get((wi, t))
        if reward is None:
            reward = weight_frac[wi] * t
            reward_cache[(wi, t)] = reward
        records.append([s, d, t, reward, [s, d]])

    # contract nodes with exactly one incoming and one outgoing edge
    out_of, in_of = {}, {}
    for i, rec in enumerate(records):
        out_of.setdefault(rec[0], []).append(i)
        in_of.setdefault(rec[1], []).append(i)
    alive = [True] * len(records)
    queue = [v for v in out_of
             if len(out_of.get(v, ())) == 1 and len(in_of.get(v, ())) == 1]
    while queue:
        v = queue.pop()
        outs = [i for i in out_of.get(v, ()) if alive[i]]
        ins = [i for i in in_of.get(v, ()) if alive[i]]
        if len(outs) != 1 or len(ins) != 1:
            continue
        a, b = ins[0], outs[0]
        if a == b or records[a][0] == v or records[b][1] == v:
            continue             # keep self-loops intact
        ra, rb = records[a], records[b]
        alive[a] = alive[b] = False
        merged = [ra[0], rb[1], ra[2] + rb[2], ra[3] + rb[3],
                  ra[4] + rb[4][1:]]
        mi = len(records)
        records.append(merged)
        alive.append(True)
        out_of.setdefault(merged[0], []).append(mi)
        in_of.setdefault(merged[1], []).append(mi)
        for w in (merged[0], merged[1]):
            if len([i for i in out_of.get(w, ()) if alive[i]]) == 1 and \
               len([i for i in in_of.get(w, ()) if alive[i]]) == 1:
                queue.append(w)

    edges = []
    nodes = set()
    for i, rec in enumerate(records):
        if not alive[i]:
            continue
        s, d, t, reward, path = rec
        desc = _CornerPath(node_owner, node_vertex, tuple(path))
        edges.append(RatioEdge(s, d, reward, t, desc))
        nodes.add(s)
        nodes.add(d)
    return RatioGraph(tuple(sorted(nodes)), tuple(edges))


class _CornerPath:
    """Human-readable corner path of a composed/contracted edge, rendered
    lazily: only witness edges are ever shown, and stringifying all of them
    up front dominates the graph construction on large inputs."""

    __slots__ = ("_owner", "_vertex", "path")

    def __init__(self, owner, vertex, path):
        self._owner = owner
        self._vertex = vertex
        self.path = path

    def __str__(self):
        return " => ".join(
            "%s@%s" % (base_location(self._owner[p]),
                       ",".join(map(str, self._vertex[p])))
            for p in self.path)

    def __lt__(self, other):
        # deterministic sort key for cycle enumeration
        if isinstance(other, _CornerPath):
            return self.path < other.path
        return str(self) < str(other)


# ---------------------------------------------------------------------------
# Full pipeline

@dataclass
class PipelineReport:
    stages: list = field(default_factory=list)   # {name, locations, edges, seconds}
    spots: list = field(default_factory=list)    # grouped {members, Z, alpha, count}
    result: RatioResult | None = None
    warnings: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)


def base_location(loc):
    """Peel pipeline wrappers (region, avatar-Z, diagonal-truth, spot-copy)
    off a location id, back to the user-level location name."""
    while not isinstance(loc, str):
        if isinstance(loc, tuple) and len(loc) == 2 and loc[0] == "chk":
            loc = loc[1]
        elif isinstance(loc, tuple) and len(loc) >= 1:
            loc = loc[0]
        else:
            return str(loc)
    return loc


def group_spots(spots, aux_clocks):
    """Group pipeline spots by (user-level members, user-level Z, alpha):
    region splitting multiplies each conceptual spot into phase copies."""
    groups = {}
    for s in spots:
        members = frozenset(base_location(m) for m in s.members)
        z = frozenset(s.Z) - set(aux_clocks)
        key = (tuple(sorted(members)), tuple(sorted(z)),
               round(s.alpha.value, 6))
        g = groups.setdefault(key, {"members": sorted(members), "Z": sorted(z),
                                    "alpha": s.alpha.value, "count": 0})
        g["count"] += 1
        g["alpha"] = max(g["alpha"], s.alpha.value)
    return [groups[k] for k in sorted(groups)]


def bandwidth(automaton, precision=DEFAULT_PRECISION,
              enumeration_cap=ENUMERATION_CAP, collect=None):
    """Run the full pipeline on a validated timed automaton.

    Returns a PipelineReport whose result is the RatioResult; `collect`
    may be a set of artifact names to keep ("heartbeat", "regionsplit",
    "zerofree", "stratified", "wtg", "cpg").
    """
    report = PipelineReport()
    collect = collect or set()

    def stage(name, fn, count_of=None):
        t0 = _time.perf_counter()
        try:
            value = fn()
        except Exception as exc:
            if hasattr(exc, "stage") and not exc.stage:
                exc.stage = name
            raise
        entry = {"name": name, "seconds": _time.perf_counter() - t0}
        if count_of is not None:
            locs, edges = count_of(value)
            entry["locations"] = locs
            entry["edges"] = edges
        report.stages.append(entry)
        return value

    instr = stage("addHeartAndUrgency", lambda: add_heartbeat_urgency(automaton),
                  lambda v: (len(v.automaton.locations), len(v.automaton.edges)))
    report.warnings.extend(instr.warnings)
    if "heartbeat" in collect:
        report.artifacts["heartbeat"] = instr

    rsta = stage("regionSplit", lambda: region_split(instr),
                 lambda v: (len(v.locations), len(v.edges)))
    if "regionsplit" in collect:
        report.artifacts["regionsplit"] = rsta
    if rsta.is_empty:
        report.warnings.append("regionSplit: empty language")
        report.result = RatioResult(alpha=0.0, obese=False, method="empty")
        return report

    aux = (rsta.h, rsta.u)
    sfa = stage("eliminate0", lambda: eliminate_zeros(rsta),
                lambda v: (len(v.locations), len(v.edges)))
    if "zerofree" in collect:
        report.artifacts["zerofree"] = sfa
    if "regionsplit" not in collect:
        rsta = None

    red = stage("detectRed", lambda: detect_red(sfa),
                lambda v: (len(sfa.locations), len(v)))

    strat = stage("stratify", lambda: stratify(sfa, red, dedup_black=True),
                  lambda v: (len(v.rsta.locations), len(v.rsta.edges)))
    if "stratified" in collect:
        report.artifacts["stratified"] = strat

    spots = stage("detectSpots",
                  lambda: extract_spots(strat, precision=precision),
                  lambda v: (sum(len(s.members) for s in v), len(v)))
    report.spots = group_spots(spots, aux) if spots else []
    report.artifacts["spot_objects"] = spots

    # time-divergence is asserted on the shared corner-point core below
    wtg = stage("abstract",
                lambda: abstract_wtg(strat, spots, check_divergence=False),
                lambda v: (len(v.locations), len(v.edges)))
    if "wtg" in collect:
        report.artifacts["wtg"] = wtg
    if "zerofree" not in collect:
        sfa = None
    if "stratified" not in collect:
        strat = None

    def run_ratio():
        graph = core_ratio_graph(wtg)
        if "cpg" in collect:
            report.artifacts["cpg"] = wtg.corner_point_graph()
        return max_ratio(graph, precision=precision,
                         enumeration_cap=enumeration_cap)

    report.result = stage("rewardPerTime", run_ratio)
    if not report.result.obese:
        report.warnings.append(
            "not obese: alpha = 0, bandwidth is o(1/epsilon)")
    return report
