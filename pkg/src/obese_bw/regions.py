"""Regions: integer parts + fractional-order partition, with exact symbolic
time elapse, resets, closure vertices, and guard containment.

A region over an ordered clock tuple and per-clock ceilings M_c records,
per clock, either an integer part in [0, M_c] or the marker "above M_c"
(stored as None), the set of clocks with fractional part 0, and the ordered
partition of the remaining below-ceiling clocks by increasing fractional
part.  Two valuations in the same region satisfy exactly the same
constraints whose constant on clock c is <= M_c.  Ceilings are given either
as one int for all clocks or as a tuple aligned with the clock tuple; a
clock that appears in no constraint gets ceiling 0 and collapses to
"zero or above" immediately, which keeps the construction small.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .constraints import ClockConstraint, Guard
from .errors import ResourceError, ValidationError


class Undetermined(Exception):
    """A constraint's truth is not constant on the region (above-ceiling
    clock involved in a comparison the region cannot decide)."""


def normalize_ceiling(ceiling, clocks):
    """Per-clock ceiling tuple from an int or an aligned sequence."""
    if isinstance(ceiling, int):
        return (ceiling,) * len(clocks)
    ceiling = tuple(ceiling)
    if len(ceiling) != len(clocks):
        raise ValidationError("ceiling tuple does not match the clock tuple")
    return ceiling


@dataclass(frozen=True, eq=False)
class Region:
    clocks: tuple
    ceiling: tuple       # per clock (an int input is broadcast)
    ints: tuple          # per clock: integer part, or None = above ceiling
    zero: frozenset      # below-ceiling clocks with fractional part 0
    frac_order: tuple    # of frozensets, increasing fractional part

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Region):
            return NotImplemented
        return self._key == other._key

    def __post_init__(self):
        object.__setattr__(self, "ceiling",
                           normalize_ceiling(self.ceiling, self.clocks))
        # cached primitive key: regions are hashed and compared millions of
        # times during splitting, so avoid rehashing frozensets every probe
        key = (self.clocks, self.ints, tuple(sorted(self.zero)),
               tuple(tuple(sorted(cls)) for cls in self.frac_order))
        object.__setattr__(self, "_key", key)
        object.__setattr__(self, "_hash", hash(key))
        below = {c for c, k in zip(self.clocks, self.ints) if k is not None}
        seen = set(self.zero)
        if not self.zero <= below:
            raise ValidationError("zero-fraction set mentions an above-ceiling clock")
        for cls in self.frac_order:
            if not cls or not cls <= below or cls & seen:
                raise ValidationError("malformed fractional-order partition")
            seen |= cls
        if seen != below:
            raise ValidationError("fractional data does not cover all bounded clocks")
        for c, k, m in zip(self.clocks, self.ints, self.ceiling):
            if k is None:
                continue
            if not 0 <= k <= m:
                raise ValidationError("integer part out of range")
            if c not in self.zero and k > m - 1:
                raise ValidationError("open fractional interval would cross the ceiling")

    def ceil_of(self, clock):
        return self.ceiling[self.clocks.index(clock)]

    # -- construction -------------------------------------------------------

    @staticmethod
    def of_valuation(valuation, clocks, ceiling):
        ceiling = normalize_ceiling(ceiling, tuple(clocks))
        ints = []
        zero = set()
        fracs = {}
        for c, m in zip(clocks, ceiling):
            v = Fraction(valuation[c])
            if v < 0:
                raise ValidationError("negative clock value %s=%s" % (c, v))
            if v > m:
                ints.append(None)
                continue
            k = int(v)
            ints.append(k)
            f = v - k
            if f == 0:
                zero.add(c)
            else:
                fracs.setdefault(f, set()).add(c)
        order = tuple(frozenset(fracs[f]) for f in sorted(fracs))
        return Region(tuple(clocks), ceiling, tuple(ints), frozenset(zero), order)

    def contains(self, valuation):
        return Region.of_valuation(valuation, self.clocks, self.ceiling) == self

    def sample(self):
        """One valuation inside the region (fractions at i/(m+1))."""
        m = len(self.frac_order)
        rank = {}
        for i, cls in enumerate(self.frac_order):
            for c in cls:
                rank[c] = i + 1
        out = {}
        for c, k, m in zip(self.clocks, self.ints, self.ceiling):
            if k is None:
                out[c] = Fraction(m) + Fraction(1, 2)
            elif c in self.zero:
                out[c] = Fraction(k)
            else:
                out[c] = Fraction(k) + Fraction(rank[c], m + 1)
        return out

    # -- symbolic dynamics --------------------------------------------------

    def index(self, clock):
        return self.clocks.index(clock)

    def int_of(self, clock):
        return self.ints[self.index(clock)]

    def time_successor(self):
        """The next region reached by letting time elapse; self if all
        clocks are already above the ceiling (the fixpoint)."""
        below = [c for c, k in zip(self.clocks, self.ints) if k is not None]
        if not below:
            return self
        ints = dict(zip(self.clocks, self.ints))
        if self.zero:
            # clocks at an integer value start a new lowest fractional class
            # (or leave through the ceiling)
            new_top = {c for c in self.zero if ints[c] == self.ceil_of(c)}
            stay = frozenset(self.zero - new_top)
            for c in new_top:
                ints[c] = None
            order = ((stay,) + self.frac_order) if stay else self.frac_order
            return Region(self.clocks, self.ceiling,
                          tuple(ints[c] for c in self.clocks), frozenset(), order)
        # the maximal fractional class reaches the next integer
        top = self.frac_order[-1]
        for c in top:
            ints[c] += 1
        return Region(self.clocks, self.ceiling,
                      tuple(ints[c] for c in self.clocks), top, self.frac_order[:-1])

    def elapse_chain(self):
        """Yield self and all strict time successors up to the fixpoint."""
        r = self
        while True:
            yield r
            nxt = r.time_successor()
            if nxt == r:
                return
            r = nxt

    def reset(self, resets):
        resets = frozenset(resets)
        ints = tuple(0 if c in resets else k for c, k in zip(self.clocks, self.ints))
        zero = frozenset((self.zero | resets) & {c for c, k in zip(self.clocks, ints)
                                                 if k is not None})
        order = tuple(cls - resets for cls in self.frac_order)
        order = tuple(cls for cls in order if cls)
        return Region(self.clocks, self.ceiling, ints, zero, order)

    # -- geometry -----------------------------------------------------------

    def closure_vertices(self):
        """Integer vertices of the closed region, as tuples aligned with
        self.clocks; above-ceiling coordinates saturate at ceiling+1."""
        base = [m + 1 if k is None else k for k, m in zip(self.ints, self.ceiling)]
        out = [tuple(base)]
        bumped = list(base)
        for cls in reversed(self.frac_order):
            for c in cls:
                bumped[self.index(c)] += 1
            out.append(tuple(bumped))
        return out

    def has_vertex(self, vertex):
        return tuple(vertex) in set(self.closure_vertices())

    # -- constraints --------------------------------------------------------

    def _rank(self, clock):
        # shared fractional rank: 0 for fractional part 0, i+1 for class i
        if clock in self.zero:
            return 0
        for i, cls in enumerate(self.frac_order):
            if clock in cls:
                return i + 1
        raise Undetermined("clock %s is above the ceiling" % clock)

    def _interval(self, clock):
        """(lo, hi, exact): value in [lo,hi] (exact) or (lo,hi) open."""
        k = self.int_of(clock)
        if k is None:
            return (self.ceil_of(clock), None, False)
        if clock in self.zero:
            return (k, k, True)
        return (k, k + 1, False)

    def satisfies(self, atom):
        """Truth of one atom on the whole region; raises Undetermined if the
        region does not decide it (above-ceiling clock in a tight spot)."""
        b = atom.bound
        if atom.clock_b is None:
            lo, hi, exact = self._interval(atom.clock_a)
            if exact:
                v = Fraction(lo)
                return {"<": v < b, "<=": v <= b, ">": v > b, ">=": v >= b}[atom.rel]
            if hi is None:                       # value in (ceiling, inf)
                if b <= self.ceil_of(atom.clock_a):
                    return atom.rel in (">", ">=")
                raise Undetermined(str(atom))
            # value strictly inside (lo, lo+1)
            if atom.rel in ("<", "<="):
                if b >= hi:
                    return True
                if b <= lo:
                    return False
            else:
                if b <= lo:
                    return True
                if b >= hi:
                    return False
            raise Undetermined(str(atom))        # unreachable for integer b
        ka = self.int_of(atom.clock_a)
        kb = self.int_of(atom.clock_b)
        if ka is not None and kb is not None:
            d = ka - kb
            ra, rb = self._rank(atom.clock_a), self._rank(atom.clock_b)
            if ra == rb:
                return {"<": d < b, "<=": d <= b, ">": d > b, ">=": d >= b}[atom.rel]
            lo, hi = (d, d + 1) if ra > rb else (d - 1, d)
            # difference strictly inside (lo, hi)
            if atom.rel in ("<", "<="):
                if b >= hi:
                    return True
                if b <= lo:
                    return False
            else:
                if b <= lo:
                    return True
                if b >= hi:
                    return False
            raise Undetermined(str(atom))
        # at least one clock above ceiling: decide via coarse intervals
        lo_a, hi_a, _ = self._interval(atom.clock_a)
        lo_b, hi_b, _ = self._interval(atom.clock_b)
        # difference lies in (lo_a - hi_b, hi_a - lo_b) with open/inf ends
        if hi_b is not None and b <= lo_a - hi_b:
            return atom.rel in (">", ">=")
        if hi_a is not None and b >= hi_a - lo_b:
            return atom.rel in ("<", "<=")
        raise Undetermined(str(atom))

    def subset_of_guard(self, guard):
        """True iff the whole region satisfies the guard; regions refine all
        constraints with constants <= ceiling, so this is all-or-nothing
        (Undetermined atoms count as 'not contained')."""
        if guard.is_false:
            return False
        try:
            return all(self.satisfies(c) for c in guard.conjuncts)
        except Undetermined:
            return False

    def to_guard(self):
        """Exact constraint characterization of the region (may contain
        diagonal atoms pinning the fractional order)."""
        atoms = []
        for c, k, m in zip(self.clocks, self.ints, self.ceiling):
            if k is None:
                atoms.append(ClockConstraint(c, None, ">", m))
            elif c in self.zero:
                atoms.append(ClockConstraint(c, None, "<=", k))
                atoms.append(ClockConstraint(c, None, ">=", k))
            else:
                atoms.append(ClockConstraint(c, None, ">", k))
                atoms.append(ClockConstraint(c, None, "<", k + 1))
        ints = dict(zip(self.clocks, self.ints))
        reps = []
        for cls in self.frac_order:
            members = sorted(cls)
            rep = members[0]
            for other in members[1:]:
                d = ints[rep] - ints[other]
                atoms.append(ClockConstraint(rep, other, "<=", d))
                atoms.append(ClockConstraint(rep, other, ">=", d))
            reps.append(rep)
        for lo_rep, hi_rep in zip(reps, reps[1:]):
            # frac(lo_rep) < frac(hi_rep)
            atoms.append(ClockConstraint(lo_rep, hi_rep, "<", ints[lo_rep] - ints[hi_rep]))
        return Guard(tuple(atoms))

    def __str__(self):
        parts = []
        for c, k, m in zip(self.clocks, self.ints, self.ceiling):
            if k is None:
                parts.append("%s>%d" % (c, m))
            elif c in self.zero:
                parts.append("%s=%d" % (c, k))
            else:
                parts.append("%d<%s<%d" % (k, c, k + 1))
        order = "<".join("{%s}" % ",".join(sorted(cls)) for cls in self.frac_order)
        return "[" + " ".join(parts) + (" | " + order if order else "") + "]"


# ---------------------------------------------------------------------------
# Enumeration helpers

def ordered_partitions(items):
    """All weak orders (ordered set partitions) of `items`."""
    items = list(items)
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for sub in ordered_partitions(rest):
        # insert `first` into an existing block or as a new block
        for i, cls in enumerate(sub):
            yield sub[:i] + (cls | {first},) + sub[i + 1:]
        for i in range(len(sub) + 1):
            yield sub[:i] + (frozenset([first]),) + sub[i:]


def _build_regions(clocks, ceiling, choices):
    """choices: per clock either None (above ceiling) or (int, is_zero)."""
    ints, zero, frac = [], set(), []
    for c, ch in zip(clocks, choices):
        if ch is None:
            ints.append(None)
            continue
        k, is_zero = ch
        ints.append(k)
        (zero.add(c) if is_zero else frac.append(c))
    for order in ordered_partitions(frac):
        yield Region(tuple(clocks), ceiling, tuple(ints), frozenset(zero), tuple(order))


def regions_at_vertex(vertex, clocks, ceiling):
    """All regions having the given integer point (saturated coordinates:
    ceiling+1 encodes any above-ceiling value) as a closure vertex."""
    ceiling = normalize_ceiling(ceiling, tuple(clocks))
    options = []
    for v, m in zip(vertex, ceiling):
        opts = []
        if v == m + 1:
            opts.append(None)
        else:
            if 0 <= v <= m:
                opts.append((v, True))
            if 1 <= v <= m:
                opts.append((v - 1, False))
        if not opts:
            return
        options.append(opts)
    def rec(i, acc):
        if i == len(options):
            yield from _build_regions(clocks, ceiling, acc)
            return
        for ch in options[i]:
            yield from rec(i + 1, acc + [ch])
    yield from rec(0, [])


def enumerate_regions(guard, clocks, ceiling, cap=4096, allow_top=True):
    """All regions contained in the guard (exact, via per-clock interval
    pruning then containment filtering).  Raises ResourceError past `cap`."""
    if guard.is_false or not guard.is_satisfiable(clocks):
        return []
    ceiling = normalize_ceiling(ceiling, tuple(clocks))
    options = []
    for c, m in zip(clocks, ceiling):
        (lo, lo_strict), hi = guard.bounds_of(c, clocks)
        opts = []
        for k in range(0, m + 1):
            if hi is not None and k > hi[0]:
                break
            if Fraction(k) < lo or (lo_strict and Fraction(k) == lo):
                continue
            if hi is not None and (k > hi[0] or (hi[1] and k == hi[0])):
                continue
            opts.append((k, True))
        for k in range(0, m):
            # open interval (k, k+1)
            if hi is not None and Fraction(k) >= hi[0]:
                break
            if Fraction(k + 1) <= lo:
                continue
            opts.append((k, False))
        if allow_top and (hi is None or hi[0] > m):
            opts.append(None)
        options.append(opts)
    out = []
    def rec(i, acc):
        if i == len(options):
            for r in _build_regions(clocks, ceiling, acc):
                if r.subset_of_guard(guard):
                    out.append(r)
                    if len(out) > cap:
                        raise ResourceError(
                            "region enumeration exceeded cap %d for guard %s"
                            % (cap, guard))
            return
        for ch in options[i]:
            rec(i + 1, acc + [ch])
    rec(0, [])
    return out


def region_from_guard(guard, clocks, ceiling):
    """The unique region a region-shaped guard denotes; error otherwise."""
    found = enumerate_regions(guard, clocks, ceiling)
    if len(found) != 1:
        raise ValidationError(
            "guard %s denotes %d regions, expected exactly one" % (guard, len(found)))
    return found[0]
