"""Static checks and normalization for parsed rules."""

from __future__ import annotations

import dataclasses
from collections import defaultdict

from ..errors import ParseError
from ..events import PROB_TOL
from . import ast as A
from .parser import parse_source


def desugar_and(node):
    """Flatten nested Seq/And/Or of the same kind into canonical n-ary form.

    And stays native (unordered co-occurrence); duplicates are kept.
    """
    node = A.map_children(node, desugar_and)
    if isinstance(node, A.NARY):
        flat = []
        for c in node.children:
            if type(c) is type(node):
                flat.extend(c.children)
            else:
                flat.append(c)
        return type(node)(tuple(flat), pos=node.pos)
    return node


normalize = desugar_and


def number_atoms(node, start: int = 0):
    """Assign preorder atom ids; returns (new_node, next_id)."""
    counter = [start]

    def go(n):
        if isinstance(n, A.Atom):
            aid = counter[0]
            counter[0] += 1
            return dataclasses.replace(n, aid=aid)
        if isinstance(n, A.NARY):
            return type(n)(tuple(go(c) for c in n.children), pos=n.pos)
        return A.map_children(n, go)

    out = go(node)
    return out, counter[0]


# -- scope analysis --------------------------------------------------------------

def exported(node) -> set[str]:
    """Variables positively bound by ``node`` and visible to its context."""
    if isinstance(node, A.Atom):
        return node.variables()
    if isinstance(node, (A.Seq, A.And)):
        out = set()
        for c in node.children:
            out |= exported(c)
        return out
    if isinstance(node, A.Or):
        sets = [exported(c) for c in node.children]
        return set.intersection(*sets) if sets else set()
    if isinstance(node, (A.Star, A.Not)):
        return set()
    if isinstance(node, A.Produce):
        return exported(node.child) | {m.name for m in node.maps}
    if isinstance(node, (A.Select, A.Window)):
        return exported(node.child)
    return set()


def negated_atom(not_node: A.Not):
    """(atom, preds) of a negation, or None if malformed."""
    c = not_node.child
    preds = []
    while isinstance(c, A.Select):
        preds.extend(c.preds)
        c = c.child
    if isinstance(c, A.Atom):
        return c, tuple(preds)
    return None


def is_bound_negation(not_node: A.Not, scope: set[str]) -> bool:
    """Bound-time form: a concrete time and every variable bound elsewhere."""
    na = negated_atom(not_node)
    return na is not None and not isinstance(na[0].time_arg, A.Wild) and na[0].variables() <= scope


def strip_root(body):
    """Return (window, core) where core is the body below root Select/Produce/Window."""
    window = None
    node = body
    while isinstance(node, (A.Select, A.Produce, A.Window)):
        if isinstance(node, A.Window):
            window = node if window is None else window
        node = node.child
    return window, node


def top_level_seqs(body) -> list:
    """Seq nodes reachable from the root through Select/Produce/Window/Or only."""
    out = []

    def go(n):
        if isinstance(n, (A.Select, A.Produce, A.Window)):
            go(n.child)
        elif isinstance(n, A.Or):
            for c in n.children:
                go(c)
        elif isinstance(n, A.Seq):
            out.append(n)

    go(body)
    return out


def _diag(code, msg, node=None, var=None, severity="error") -> A.Diagnostic:
    pos = getattr(node, "pos", None) or (None, None)
    return A.Diagnostic(code, msg, severity, var, pos[0], pos[1])


def validate_bindings(rule: A.Rule) -> list[A.Diagnostic]:
    """Variable-binding and structural diagnostics for one rule (empty if clean)."""
    out: list[A.Diagnostic] = []
    body = rule.body
    window, _ = strip_root(body)
    tops = {id(s) for s in top_level_seqs(body)}

    def check_vars(vs, scope, node, what):
        for v in sorted(vs - scope):
            out.append(_diag("UNBOUND_VARIABLE", f"variable {v} used in {what} is not bound", node, v))

    def go(node, scope, parent, in_star):
        if isinstance(node, A.Atom):
            if not node.args:
                out.append(_diag("SYNTAX_ERROR", "event pattern needs a time argument", node))
            return
        if isinstance(node, A.Select):
            inner = scope | exported(node.child)
            for p in node.preds:
                check_vars(A.expr_vars(p), inner, p, "where")
            go(node.child, scope, node, in_star)
            return
        if isinstance(node, A.Produce):
            if in_star:
                out.append(_diag("INVALID_NESTING", "emit is not allowed inside iteration", node))
            inner = scope | exported(node.child)
            for m in node.maps:
                check_vars(A.expr_vars(m.expr), inner, m, "emit")
                inner = inner | {m.name}
            go(node.child, scope, node, in_star)
            return
        if isinstance(node, A.Window):
            if node.lo > node.hi:
                out.append(_diag("INVALID_WINDOW", f"window lower bound {node.lo} exceeds upper bound {node.hi}", node))
            go(node.child, scope, node, in_star)
            return
        if isinstance(node, A.Star):
            go(node.child, scope | exported(node.child), node, True)
            return
        if isinstance(node, A.Not):
            na = negated_atom(node)
            if na is None:
                out.append(_diag("INVALID_NEGATION", "only a single event pattern (optionally with where) can be negated", node))
                return
            atom, preds = na
            for p in preds:
                check_vars(A.expr_vars(p), scope | atom.variables(), p, "negated where")
            if is_bound_negation(node, scope):
                if not isinstance(parent, (A.Seq, A.And)):
                    out.append(_diag("INVALID_NEGATION", "negation must appear inside a sequence or conjunction", node))
                return
            if not isinstance(parent, A.Seq):
                out.append(_diag("INVALID_NEGATION",
                                 "negation with unbound variables must sit between sequence elements", node))
                return
            idx = next(i for i, c in enumerate(parent.children) if c is node)
            pos_before = any(not isinstance(c, A.Not) for c in parent.children[:idx])
            pos_after = any(not isinstance(c, A.Not) for c in parent.children[idx + 1:])
            if not (pos_before and pos_after):
                if id(parent) not in tops or window is None or window.relative:
                    out.append(_diag("INVALID_NEGATION",
                                     "leading/trailing negation needs a top-level sequence with an absolute window", node))
            return
        if isinstance(node, A.Or):
            for c in node.children:
                if isinstance(c, A.Not):
                    out.append(_diag("INVALID_NEGATION", "a disjunct cannot be a bare negation", c))
                    continue
                go(c, scope | exported(c), node, in_star)
            return
        if isinstance(node, (A.Seq, A.And)):
            if all(isinstance(c, A.Not) for c in node.children):
                out.append(_diag("INVALID_NEGATION", "pattern has no positive element", node))
            for c in node.children:
                go(c, scope, node, in_star)
            return

    if isinstance(body, A.Not):
        out.append(_diag("INVALID_NEGATION", "pattern has no positive element", body))
    scope = exported(body)
    go(body, scope, None, False)

    if len(rule.head.vars) < 1:
        out.append(_diag("SYNTAX_ERROR", "rule head needs a time variable", rule.head))
    if rule.alt_heads:
        for alt in rule.alt_heads:
            inner = set(scope)
            for m in alt.maps:
                check_vars(A.expr_vars(m.expr), inner, m, "alternative head")
                inner.add(m.name)
            for v in rule.head.vars:
                if v not in inner:
                    out.append(_diag("UNBOUND_VARIABLE", f"head variable {v} is not bound", alt, v))
    else:
        for v in rule.head.vars:
            if v not in scope:
                out.append(_diag("UNBOUND_VARIABLE", f"head variable {v} is not bound", rule.head, v))

    if not (0.0 < rule.prob <= 1.0):
        out.append(_diag("INVALID_PROBABILITY", f"rule probability {rule.prob} not in (0, 1]", rule))
    if rule.alt_heads:
        for alt in rule.alt_heads:
            if not (0.0 < alt.prob <= 1.0):
                out.append(_diag("INVALID_PROBABILITY", f"alternative probability {alt.prob} not in (0, 1]", alt))
        total = sum(a.prob for a in rule.alt_heads)
        if total > 1 + PROB_TOL:
            out.append(_diag("PROB_SUM_EXCEEDED", f"alternative head probabilities sum to {total}", rule))
        if rule.prefixed:
            out.append(_diag("PREFIX_WITH_DISJUNCTION",
                             "rule carries both a probability prefix and alternative heads; they are multiplied",
                             rule, severity="warning"))
    return out


# -- rule sets ---------------------------------------------------------------------

def dependency_graph(rules) -> dict[str, set[str]]:
    heads = {r.head.name for r in rules}
    deps: dict[str, set[str]] = defaultdict(set)
    for r in rules:
        deps[r.head.name] |= {a.event_type for a in A.atoms(r.body) if a.event_type in heads}
    return dict(deps)


def _find_cycle(deps: dict[str, set[str]]):
    state: dict[str, int] = {}
    stack: list[str] = []

    def visit(n):
        state[n] = 1
        stack.append(n)
        for m in sorted(deps.get(n, ())):
            if state.get(m) == 1:
                return stack[stack.index(m):] + [m]
            if m not in state:
                found = visit(m)
                if found:
                    return found
        stack.pop()
        state[n] = 2
        return None

    for n in sorted(deps):
        if n not in state:
            found = visit(n)
            if found:
                return found
    return None


def build_ruleset(raw_rules) -> A.RuleSet:
    """Normalize, number and validate parsed rules; raise on the first error."""
    rules = []
    diags: list[A.Diagnostic] = []
    for i, r in enumerate(raw_rules):
        body, _ = number_atoms(desugar_and(r.body))
        r = dataclasses.replace(r, body=body, index=i)
        for d in validate_bindings(r):
            if d.severity == "error":
                raise ParseError(d.code, d.message, d.line, d.col, var=d.var)
            diags.append(d)
        rules.append(r)

    arity: dict[str, tuple[int, A.Rule]] = {}
    for r in rules:
        n = len(r.head.vars)
        if r.head.name in arity and arity[r.head.name][0] != n:
            line, col = r.head.pos or (None, None)
            raise ParseError("HEAD_ARITY_MISMATCH", f"{r.head.name} defined with {n} and {arity[r.head.name][0]} arguments", line, col)
        arity.setdefault(r.head.name, (n, r))

    seen: dict[tuple, A.Rule] = {}
    for r in rules:
        key = (r.head.name, r.body)
        if key in seen and not r.alt_heads and not seen[key].alt_heads:
            line, col = r.pos or (None, None)
            raise ParseError("DUPLICATE_HEAD_WITHOUT_DISJUNCTION_MARKER",
                             f"{r.head.name} is defined twice with the same body; use ';;' alternative heads", line, col)
        seen[key] = r

    heads = {r.head.name for r in rules}
    for r in rules:
        for n in A.walk(r.body):
            if isinstance(n, A.Not):
                na = negated_atom(n)
                if na and na[0].event_type in heads:
                    line, col = n.pos or (None, None)
                    raise ParseError("UNSUPPORTED_NEGATION",
                                     f"negating complex event type {na[0].event_type} is not supported", line, col)
        for a in A.atoms(r.body):
            if a.event_type in heads and a.event_type in arity and len(a.args) != arity[a.event_type][0]:
                line, col = a.pos or (None, None)
                raise ParseError("HEAD_ARITY_MISMATCH",
                                 f"{a.event_type} used with {len(a.args)} arguments but defined with {arity[a.event_type][0]}", line, col)

    deps = dependency_graph(rules)
    cycle = _find_cycle(deps)
    if cycle:
        r = next(r for r in rules if r.head.name == cycle[0])
        line, col = r.pos or (None, None)
        raise ParseError("CYCLIC_HIERARCHY", "recursive definition: " + " -> ".join(cycle), line, col)
    return A.RuleSet(tuple(rules), deps, tuple(diags))


def parse_rules(text: str) -> A.RuleSet:
    """Parse and validate DSL source into a :class:`RuleSet`."""
    return build_ruleset(parse_source(text))
