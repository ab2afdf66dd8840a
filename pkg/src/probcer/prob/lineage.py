"""Lineage formulas and exact marginals.

A lineage is a DNF over literals ``(var, value, positive)``. A variable is a
discrete random quantity with a finite set of values plus an implicit
"none" value taking the residual mass: an input event (values are its
alternatives, none is non-occurrence), a rule coin (values are the rule's
head alternatives) or a fresh stand-in for a promoted CE.

Variables are mutually independent. Exact probability uses Shannon
expansion on the most frequent variable, splitting independent components
and memoizing sub-formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping

from ..errors import CapacityError

NONE = -1
DEFAULT_LINEAGE_CAP = 25

Literal = tuple  # (var, value, positive)


def make_conjunct(literals: Iterable[Literal]) -> frozenset | None:
    """Normalize a conjunction; None if it is contradictory."""
    pos: dict = {}
    neg: dict = {}
    for var, val, positive in literals:
        if positive:
            if pos.get(var, val) != val:
                return None
            pos[var] = val
        else:
            neg.setdefault(var, set()).add(val)
    out = set()
    for var, val in pos.items():
        if val in neg.get(var, ()):
            return None
        out.add((var, val, True))
    for var, vals in neg.items():
        if var in pos:
            continue
        out.update((var, v, False) for v in vals)
    return frozenset(out)


@dataclass(frozen=True)
class Lineage:
    """Disjunction of conjuncts (each a frozenset of literals)."""

    conjuncts: frozenset = frozenset()

    @classmethod
    def false(cls) -> "Lineage":
        return cls(frozenset())

    @classmethod
    def true(cls) -> "Lineage":
        return cls(frozenset({frozenset()}))

    @classmethod
    def of(cls, *conjs) -> "Lineage":
        out = set()
        for c in conjs:
            c = make_conjunct(c)
            if c is not None:
                out.add(c)
        return cls(frozenset(out))

    def __or__(self, other: "Lineage") -> "Lineage":
        return Lineage(self.conjuncts | other.conjuncts)

    def __and__(self, other: "Lineage") -> "Lineage":
        out = set()
        for a in self.conjuncts:
            for b in other.conjuncts:
                c = make_conjunct(a | b)
                if c is not None:
                    out.add(c)
        return Lineage(frozenset(out))

    def and_literals(self, literals: Iterable[Literal]) -> "Lineage":
        return self & Lineage.of(tuple(literals))

    def variables(self) -> set:
        return {lit[0] for c in self.conjuncts for lit in c}

    def __len__(self):
        return len(self.conjuncts)

    @property
    def is_false(self) -> bool:
        return not self.conjuncts


@dataclass
class VarTable:
    """Value distributions of lineage variables: ``probs[var][value]``."""

    probs: dict = field(default_factory=dict)

    def add(self, var: Hashable, probs: Iterable[float]) -> None:
        self.probs[var] = tuple(float(p) for p in probs)

    def __contains__(self, var) -> bool:
        return var in self.probs

    def domain(self, var) -> list[tuple[int, float]]:
        ps = self.probs[var]
        out = [(i, p) for i, p in enumerate(ps) if p > 0]
        rest = 1.0 - math.fsum(ps)
        if rest > 0:
            out.append((NONE, rest))
        return out


def _lit_prob(lit, table: VarTable) -> float:
    var, val, positive = lit
    ps = table.probs[var]
    p = ps[val] if 0 <= val < len(ps) else 0.0
    return p if positive else 1.0 - p


def _conjunct_prob(conj, table: VarTable) -> float:
    # literals on distinct variables are independent; several negatives on
    # one variable exclude disjoint values
    by_var: dict = {}
    for lit in conj:
        by_var.setdefault(lit[0], []).append(lit)
    p = 1.0
    for var, lits in by_var.items():
        if len(lits) == 1:
            p *= _lit_prob(lits[0], table)
        else:
            ps = table.probs[var]
            p *= 1.0 - sum(ps[v] for _, v, _ in lits if 0 <= v < len(ps))
    return p


def _condition(conjuncts, var, value):
    out = set()
    for c in conjuncts:
        keep = []
        dead = False
        for lit in c:
            if lit[0] != var:
                keep.append(lit)
            elif (lit[1] == value) != lit[2]:
                dead = True
                break
        if dead:
            continue
        if not keep:
            return None  # formula is true
        out.add(frozenset(keep))
    return frozenset(out)


def _components(conjuncts) -> list[frozenset]:
    conjs = list(conjuncts)
    parent = list(range(len(conjs)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict = {}
    for i, c in enumerate(conjs):
        for lit in c:
            j = owner.setdefault(lit[0], i)
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[ri] = rj
    groups: dict = {}
    for i, c in enumerate(conjs):
        groups.setdefault(find(i), []).append(c)
    return [frozenset(g) for g in groups.values()]


def dnf_probability(conjuncts: frozenset, table: VarTable, memo: dict | None = None) -> float:
    """Exact P(at least one conjunct holds)."""
    memo = {} if memo is None else memo
    if not conjuncts:
        return 0.0
    if frozenset() in conjuncts:
        return 1.0
    if conjuncts in memo:
        return memo[conjuncts]
    if len(conjuncts) == 1:
        (c,) = conjuncts
        p = _conjunct_prob(c, table)
    else:
        comps = _components(conjuncts)
        if len(comps) > 1:
            q = 1.0
            for comp in sorted(comps, key=lambda s: sorted(map(repr, s))):
                q *= 1.0 - dnf_probability(comp, table, memo)
            p = 1.0 - q
        else:
            counts: dict = {}
            for c in conjuncts:
                for lit in c:
                    counts[lit[0]] = counts.get(lit[0], 0) + 1
            var = max(sorted(counts, key=repr), key=lambda v: counts[v])
            p = 0.0
            for value, pv in table.domain(var):
                sub = _condition(conjuncts, var, value)
                p += pv * (1.0 if sub is None else dnf_probability(sub, table, memo))
    memo[conjuncts] = p
    return p


def event_vars(lineage: Lineage) -> set:
    """Variables that stand for input events (string ids)."""
    return {v for v in lineage.variables() if isinstance(v, str)}


def ce_marginal(lineage: Lineage, table: VarTable | Mapping, cap: int = DEFAULT_LINEAGE_CAP) -> float:
    """Exact marginal of ``lineage``; refuses more than ``cap`` distinct input events."""
    if not isinstance(table, VarTable):
        table = table_from_events(table.values() if isinstance(table, Mapping) else table)
    n = len(event_vars(lineage))
    if n > cap:
        raise CapacityError("LINEAGE_TOO_LARGE", f"lineage mentions {n} input events (cap {cap})", events=n, cap=cap)
    return min(1.0, max(0.0, dnf_probability(lineage.conjuncts, table)))


def table_from_events(events) -> VarTable:
    t = VarTable()
    for ev in events:
        t.add(ev.id, [a.prob for a in ev.alternatives])
    return t
