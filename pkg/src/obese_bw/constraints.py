"""Clock constraints and guards with exact satisfiability checking.

Atoms are rectangular (x ~ b) or diagonal (x - y ~ b) with integer bounds
and ~ in {<, <=, >, >=}.  The surface syntax also allows ==, which is
desugared into <= plus >= at parse time.  Satisfiability and implication
are decided by the classical difference-bound closure (Floyd-Warshall over
(value, strict) bounds), which is exact for this constraint class.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .errors import ParseError, ValidationError

RELS = ("<", "<=", ">", ">=")

_NEGATE = {"<": ">=", "<=": ">", ">": "<=", ">=": "<"}


@dataclass(frozen=True)
class ClockConstraint:
    """One atom: `clock_a ~ bound` or `clock_a - clock_b ~ bound`."""

    clock_a: str
    clock_b: str | None
    rel: str
    bound: int

    def __post_init__(self):
        if self.rel not in RELS:
            raise ValueError("bad relation %r" % (self.rel,))

    @property
    def kind(self):
        return "rectangular" if self.clock_b is None else "diagonal"

    def negated(self):
        return ClockConstraint(self.clock_a, self.clock_b, _NEGATE[self.rel], self.bound)

    def evaluate(self, valuation):
        lhs = valuation[self.clock_a]
        if self.clock_b is not None:
            lhs = lhs - valuation[self.clock_b]
        b = Fraction(self.bound)
        if self.rel == "<":
            return lhs < b
        if self.rel == "<=":
            return lhs <= b
        if self.rel == ">":
            return lhs > b
        return lhs >= b

    def __str__(self):
        lhs = self.clock_a if self.clock_b is None else "%s-%s" % (self.clock_a, self.clock_b)
        return "%s%s%d" % (lhs, self.rel, self.bound)


# A guard is either FALSE or a conjunction of atoms (empty = true).

@dataclass(frozen=True)
class Guard:
    conjuncts: tuple = ()
    is_false: bool = False

    @staticmethod
    def true():
        return Guard(())

    @staticmethod
    def false():
        return Guard((), is_false=True)

    @staticmethod
    def of(*atoms):
        return Guard(tuple(atoms))

    @property
    def is_true(self):
        return not self.is_false and not self.conjuncts

    def evaluate(self, valuation):
        if self.is_false:
            return False
        return all(c.evaluate(valuation) for c in self.conjuncts)

    def conjoin(self, other):
        if self.is_false or other.is_false:
            return Guard.false()
        seen = list(self.conjuncts)
        for c in other.conjuncts:
            if c not in seen:
                seen.append(c)
        return Guard(tuple(seen))

    def clocks(self):
        out = set()
        for c in self.conjuncts:
            out.add(c.clock_a)
            if c.clock_b is not None:
                out.add(c.clock_b)
        return out

    def max_constant(self):
        return max((abs(c.bound) for c in self.conjuncts), default=0)

    def has_diagonal(self):
        return any(c.clock_b is not None for c in self.conjuncts)

    def diagonal_atoms(self):
        return [c for c in self.conjuncts if c.clock_b is not None]

    def rectangular_part(self):
        return Guard(tuple(c for c in self.conjuncts if c.clock_b is None),
                     is_false=self.is_false)

    def is_satisfiable(self, clocks):
        if self.is_false:
            return False
        return dbm_closure(self, clocks) is not None

    def implies(self, atom, clocks):
        """True iff every valuation (>= 0) satisfying self satisfies atom."""
        if self.is_false:
            return True
        return not self.conjoin(Guard.of(atom.negated())).is_satisfiable(clocks)

    def bounds_of(self, clock, clocks):
        """Exact interval of `clock` over the solution set.

        Returns ((lo, lo_strict), (hi, hi_strict)) with hi = None for
        unbounded above.  Requires satisfiability.
        """
        dbm = dbm_closure(self, clocks)
        if dbm is None:
            raise ValidationError("bounds_of on unsatisfiable guard")
        idx = {c: i + 1 for i, c in enumerate(clocks)}
        i = idx[clock]
        hi = dbm[i][0]           # x - 0 <= hi
        lo = dbm[0][i]           # 0 - x <= lo, i.e. x >= -lo
        lo_val, lo_strict = (-lo[0], lo[1]) if lo is not None else (0, False)
        if hi is None:
            return (lo_val, lo_strict), None
        return (lo_val, lo_strict), (hi[0], hi[1])

    def __str__(self):
        if self.is_false:
            return "false"
        if not self.conjuncts:
            return "true"
        return " && ".join(str(c) for c in self.conjuncts)


# ---------------------------------------------------------------------------
# Difference-bound closure.  Bounds are (value, strict) pairs, None = +inf.

def _bound_min(a, b):
    if a is None:
        return b
    if b is None:
        return a
    if a[0] != b[0]:
        return a if a[0] < b[0] else b
    return a if a[1] >= b[1] else b          # strict is tighter at equal value


def _bound_add(a, b):
    if a is None or b is None:
        return None
    return (a[0] + b[0], a[1] or b[1])


def _bound_neg_cycle(d):
    # d is a self-distance bound: negative, or zero-but-strict, means unsat.
    return d is not None and (d[0] < 0 or (d[0] == 0 and d[1]))


def dbm_closure(guard, clocks):
    """Shortest-path closure of the guard over `clocks` (+ the zero var).

    Returns the closed matrix (lists of bounds) or None if unsatisfiable.
    Index 0 is the zero variable; clock i is index i+1.
    """
    if guard.is_false:
        return None
    n = len(clocks) + 1
    idx = {c: i + 1 for i, c in enumerate(clocks)}
    m = [[None] * n for _ in range(n)]
    for i in range(n):
        m[i][i] = (0, False)
    for c in clocks:
        # implicit nonnegativity: 0 - c <= 0
        m[0][idx[c]] = (0, False)
    for atom in guard.conjuncts:
        if atom.clock_a not in idx or (atom.clock_b is not None and atom.clock_b not in idx):
            raise ValidationError("constraint %s uses an undeclared clock" % atom)
        a = idx[atom.clock_a]
        b = idx[atom.clock_b] if atom.clock_b is not None else 0
        if atom.rel in ("<", "<="):
            m[a][b] = _bound_min(m[a][b], (atom.bound, atom.rel == "<"))
        else:
            # a - b >= bound  <=>  b - a <= -bound
            m[b][a] = _bound_min(m[b][a], (-atom.bound, atom.rel == ">"))
    for k in range(n):
        for i in range(n):
            if m[i][k] is None:
                continue
            for j in range(n):
                m[i][j] = _bound_min(m[i][j], _bound_add(m[i][k], m[k][j]))
        for i in range(n):
            if _bound_neg_cycle(m[i][i]):
                return None
    return m


# ---------------------------------------------------------------------------
# Parsing

_ATOM_RE = re.compile(
    r"^\s*([A-Za-z_]\w*)\s*(?:-\s*([A-Za-z_]\w*)\s*)?(<=|>=|==|<|>)\s*(-?\d+)\s*$"
)


def parse_guard(text, declared_clocks=None, where=""):
    """Parse `atom && atom && ...` (or `true` / `false`) into a Guard."""
    text = text.strip()
    if text == "true" or text == "":
        return Guard.true()
    if text == "false":
        return Guard.false()
    atoms = []
    for part in text.split("&&"):
        part = part.strip()
        if part == "true":
            continue
        if part == "false":
            return Guard.false()
        mo = _ATOM_RE.match(part)
        if not mo:
            raise ParseError("cannot parse constraint %r%s" % (part, where))
        a, b, rel, bound = mo.group(1), mo.group(2), mo.group(3), int(mo.group(4))
        if declared_clocks is not None:
            for c in (a, b):
                if c is not None and c not in declared_clocks:
                    raise ParseError("undeclared clock %r in %r%s" % (c, part, where))
        if b is None and bound < 0:
            raise ParseError("negative bound in rectangular constraint %r%s" % (part, where))
        if rel == "==":
            atoms.append(ClockConstraint(a, b, "<=", bound))
            atoms.append(ClockConstraint(a, b, ">=", bound))
        else:
            atoms.append(ClockConstraint(a, b, rel, bound))
    return Guard(tuple(atoms))
