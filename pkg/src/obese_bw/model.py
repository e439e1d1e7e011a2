"""Timed automata: data model, parsing, validation, run semantics.

An automaton is (locations, clocks, events, edges, S, I, F) where S/I/F map
each location to a starting/initial/final clock constraint.  Letters are
nonempty subsets of the declared event set; plain-event input is wrapped
into singletons so that the same representation serves both before and
after zero-elimination (which produces genuinely compound letters).

All clock arithmetic is exact (fractions.Fraction); no floats appear in the
semantics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .constraints import ClockConstraint, Guard, parse_guard
from .errors import ParseError, ValidationError


def letter_str(letter):
    return "{%s}" % ",".join(sorted(letter))


@dataclass(frozen=True)
class Edge:
    src: object
    dst: object
    letter: frozenset
    guard: Guard
    resets: frozenset
    # index of the user-level edge this one descends from, threaded through
    # all pipeline stages for reporting and DOT coloring
    origin: int | None = None

    def __str__(self):
        return "%s -%s;%s;%s-> %s" % (
            self.src, letter_str(self.letter), self.guard,
            "{%s}" % ",".join(sorted(self.resets)), self.dst)


@dataclass
class TimedAutomaton:
    locations: tuple
    clocks: tuple
    events: tuple
    edges: tuple
    starting: dict      # location -> Guard
    initial: dict       # location -> Guard
    final: dict         # location -> Guard

    def max_constant(self):
        m = 0
        for e in self.edges:
            m = max(m, e.guard.max_constant())
        for d in (self.starting, self.initial, self.final):
            for g in d.values():
                m = max(m, g.max_constant())
        return m

    def out_edges(self, q):
        return [e for e in self.edges if e.src == q]

    def letters(self):
        return sorted({e.letter for e in self.edges}, key=lambda l: (len(l), sorted(l)))

    def S(self, q):
        return self.starting.get(q, Guard.true())

    def I(self, q):
        return self.initial.get(q, Guard.false())

    def F(self, q):
        return self.final.get(q, Guard.false())


@dataclass(frozen=True)
class TimedWord:
    events: tuple       # of (frozenset letter, Fraction timestamp)

    def __post_init__(self):
        last = Fraction(0)
        for letter, t in self.events:
            if t < last:
                raise ValidationError("timestamps must be nondecreasing")
            last = t

    def dur(self):
        return self.events[-1][1] if self.events else Fraction(0)

    def __len__(self):
        return len(self.events)

    def __str__(self):
        return "".join("(%s,%s)" % (letter_str(l), t) for l, t in self.events) or "(empty)"


@dataclass(frozen=True)
class Run:
    start_location: object
    start_valuation: tuple      # of (clock, Fraction), sorted by clock
    steps: tuple                # of (edge index, Fraction delay)

    @staticmethod
    def make(location, valuation, steps):
        vals = tuple(sorted((c, Fraction(v)) for c, v in valuation.items()))
        return Run(location, vals, tuple((i, Fraction(d)) for i, d in steps))


@dataclass(frozen=True)
class SimulationResult:
    word: TimedWord | None
    accepting: bool
    rejected_at: int | None = None

    @property
    def rejected(self):
        return self.rejected_at is not None


def simulate(automaton, run):
    """Replay a run; check guards, starting constraints, and resets.

    Returns the word with an accepting flag, or the index of the first
    violated step.
    """
    q = run.start_location
    if q not in automaton.locations:
        raise ValidationError("run starts at unknown location %r" % (q,))
    x = {c: Fraction(0) for c in automaton.clocks}
    x.update(dict(run.start_valuation))
    for c, v in x.items():
        if v < 0:
            raise ValidationError("negative clock value %s=%s" % (c, v))
    accepting_start = automaton.I(q).evaluate(x)
    now = Fraction(0)
    events = []
    for i, (edge_index, delay) in enumerate(run.steps):
        if not 0 <= edge_index < len(automaton.edges):
            raise ValidationError("step %d references unknown edge %d" % (i, edge_index))
        e = automaton.edges[edge_index]
        if e.src != q or delay < 0:
            return SimulationResult(None, False, rejected_at=i)
        if not automaton.S(q).evaluate(x):
            return SimulationResult(None, False, rejected_at=i)
        y = {c: v + delay for c, v in x.items()}
        if not e.guard.evaluate(y):
            return SimulationResult(None, False, rejected_at=i)
        for c in e.resets:
            y[c] = Fraction(0)
        if not automaton.S(e.dst).evaluate(y):
            return SimulationResult(None, False, rejected_at=i)
        now += delay
        events.append((e.letter, now))
        q, x = e.dst, y
    accepting = accepting_start and automaton.F(q).evaluate(x)
    return SimulationResult(TimedWord(tuple(events)), accepting)


def closure(automaton):
    """Replace every strict inequality in guards and starting constraints
    by its non-strict version."""
    def close_guard(g):
        if g.is_false:
            return g
        atoms = tuple(
            ClockConstraint(c.clock_a, c.clock_b, c.rel + "=", c.bound)
            if c.rel in ("<", ">") else c
            for c in g.conjuncts)
        return Guard(atoms)

    return TimedAutomaton(
        locations=automaton.locations,
        clocks=automaton.clocks,
        events=automaton.events,
        edges=tuple(replace(e, guard=close_guard(e.guard)) for e in automaton.edges),
        starting={q: close_guard(g) for q, g in automaton.starting.items()},
        initial=dict(automaton.initial),
        final=dict(automaton.final),
    )


def trivially_timed(automaton):
    """Drop all timing: guards and starting constraints become true."""
    return TimedAutomaton(
        locations=automaton.locations,
        clocks=automaton.clocks,
        events=automaton.events,
        edges=tuple(replace(e, guard=Guard.true()) for e in automaton.edges),
        starting={q: Guard.true() for q in automaton.locations},
        initial=dict(automaton.initial),
        final=dict(automaton.final),
    )


def trim(automaton):
    """Keep locations on some initial-to-final path (location-graph level).

    Returns (trimmed automaton, list of removed locations).
    """
    fwd = {q for q in automaton.locations
           if automaton.I(q).is_satisfiable(automaton.clocks)}
    changed = True
    while changed:
        changed = False
        for e in automaton.edges:
            if e.src in fwd and e.dst not in fwd:
                fwd.add(e.dst)
                changed = True
    bwd = {q for q in automaton.locations
           if automaton.F(q).is_satisfiable(automaton.clocks)}
    changed = True
    while changed:
        changed = False
        for e in automaton.edges:
            if e.dst in bwd and e.src not in bwd:
                bwd.add(e.src)
                changed = True
    keep = fwd & bwd
    removed = [q for q in automaton.locations if q not in keep]
    if not removed:
        return automaton, []
    return TimedAutomaton(
        locations=tuple(q for q in automaton.locations if q in keep),
        clocks=automaton.clocks,
        events=automaton.events,
        edges=tuple(e for e in automaton.edges if e.src in keep and e.dst in keep),
        starting={q: g for q, g in automaton.starting.items() if q in keep},
        initial={q: g for q, g in automaton.initial.items() if q in keep},
        final={q: g for q, g in automaton.final.items() if q in keep},
    ), removed


def validate(automaton):
    """Check well-formedness, auto-trim, and return (automaton, warnings)."""
    warnings = []
    locs = set(automaton.locations)
    events = set(automaton.events)
    clocks = set(automaton.clocks)
    if len(locs) != len(automaton.locations):
        raise ValidationError("duplicate location names")
    for e in automaton.edges:
        if e.src not in locs or e.dst not in locs:
            raise ValidationError("edge %s has undeclared endpoint" % e)
        if not e.letter or not e.letter <= events:
            raise ValidationError("edge %s has an empty or undeclared letter" % e)
        if not e.resets <= clocks:
            raise ValidationError("edge %s resets an undeclared clock" % e)
        if not e.guard.is_satisfiable(automaton.clocks):
            raise ValidationError("edge %s has an unsatisfiable guard" % e)
    for q in automaton.locations:
        if not automaton.S(q).is_satisfiable(automaton.clocks):
            raise ValidationError("starting constraint of %r is unsatisfiable" % (q,))
    trimmed, removed = trim(automaton)
    if removed:
        warnings.append("non-trim input: removed locations %s" % sorted(map(str, removed)))
    return trimmed, warnings


# ---------------------------------------------------------------------------
# Parsing / serialization (JSON document schema)

def parse_letter(raw, events):
    if isinstance(raw, str):
        raw = [raw]
    if not isinstance(raw, list) or not raw:
        raise ParseError("letter must be a string or nonempty array: %r" % (raw,))
    for ev in raw:
        if ev not in events:
            raise ParseError("undeclared event %r in letter" % (ev,))
    return frozenset(raw)


def parse_ta(text):
    """Parse and validate a JSON timed-automaton document.

    Returns (automaton, warnings).
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("invalid JSON at line %d column %d: %s"
                         % (exc.lineno, exc.colno, exc.msg)) from exc
    return ta_from_dict(doc)


def ta_from_dict(doc):
    if not isinstance(doc, dict):
        raise ParseError("top-level document must be an object")
    try:
        clocks = tuple(doc["clocks"])
        events = tuple(doc["events"])
        loc_docs = doc["locations"]
        edge_docs = doc.get("edges", [])
    except KeyError as exc:
        raise ParseError("missing top-level key %s" % exc) from exc
    clockset = set(clocks)
    eventset = set(events)
    locations, starting, initial, final = [], {}, {}, {}
    for ld in loc_docs:
        name = ld["name"]
        locations.append(name)
        where = " (location %r)" % name
        starting[name] = parse_guard(ld.get("S", "true"), clockset, where)
        initial[name] = parse_guard(ld.get("I", "false"), clockset, where)
        final[name] = parse_guard(ld.get("F", "false"), clockset, where)
    edges = []
    for i, ed in enumerate(edge_docs):
        where = " (edge %d)" % i
        try:
            letter = parse_letter(ed["letter"], eventset)
            guard = parse_guard(ed.get("guard", "true"), clockset, where)
            resets = frozenset(ed.get("resets", []))
            edges.append(Edge(ed["from"], ed["to"], letter, guard, resets, origin=i))
        except KeyError as exc:
            raise ParseError("edge %d misses key %s" % (i, exc)) from exc
    automaton = TimedAutomaton(
        locations=tuple(locations), clocks=clocks, events=events,
        edges=tuple(edges), starting=starting, initial=initial, final=final)
    return validate(automaton)


def ta_to_dict(automaton):
    """Serialize back into the input schema (stable ordering)."""
    return {
        "clocks": list(automaton.clocks),
        "events": list(automaton.events),
        "locations": [
            {"name": str(q), "S": str(automaton.S(q)),
             "I": str(automaton.I(q)), "F": str(automaton.F(q))}
            for q in automaton.locations],
        "edges": [
            {"from": str(e.src), "to": str(e.dst),
             "letter": sorted(e.letter), "guard": str(e.guard),
             "resets": sorted(e.resets)}
            for e in automaton.edges],
    }


def export_dot(automaton, edge_colors=None, clusters=None, name="ta"):
    """DOT text of the location graph with stable ordering.

    edge_colors: optional dict edge-index -> color name.
    clusters: optional list of (cluster name, [locations]) drawn as pink boxes.
    """
    lines = ["digraph %s {" % name, "  rankdir=LR;"]
    loc_id = {q: "n%d" % i for i, q in enumerate(automaton.locations)}
    clustered = set()
    for ci, (cname, members) in enumerate(clusters or []):
        lines.append("  subgraph cluster_%d {" % ci)
        lines.append("    label=\"%s\"; style=filled; color=pink;" % cname)
        for q in members:
            if q in loc_id:
                lines.append("    %s [label=\"%s\"];" % (loc_id[q], q))
                clustered.add(q)
        lines.append("  }")
    for q in automaton.locations:
        if q in clustered:
            continue
        marks = []
        if automaton.I(q).is_satisfiable(automaton.clocks) and not automaton.I(q).is_false:
            marks.append("I")
        if automaton.F(q).is_satisfiable(automaton.clocks) and not automaton.F(q).is_false:
            marks.append("F")
        suffix = (" [" + ",".join(marks) + "]") if marks else ""
        lines.append("  %s [label=\"%s%s\"];" % (loc_id[q], q, suffix))
    for i, e in enumerate(automaton.edges):
        color = (edge_colors or {}).get(i, "black")
        label = "%s; %s; %s" % (",".join(sorted(e.letter)), e.guard,
                                "{%s}" % ",".join(sorted(e.resets)))
        lines.append("  %s -> %s [label=\"%s\", color=%s];"
                     % (loc_id[e.src], loc_id[e.dst], label, color))
    lines.append("}")
    return "\n".join(lines) + "\n"
