"""Compile rules into NFA-with-buffer plans.

Every rule becomes an :class:`NFAPlan` holding one linear :class:`Branch`
per way its body can be laid out in time: disjunctions fork branches,
conjunctions fork one branch per block ordering, iteration becomes a
kleene group of positions with a strict loop-back edge.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

from .errors import CompileError
from .lang import ast as A
from .lang.printer import pretty_expr, pretty_pattern, pretty_pred
from .lang.validate import exported, is_bound_negation, negated_atom, strip_root
from .semantics import group_vars, rule_levels

STRICT = ">"
NONSTRICT = ">="
MAX_AND_ARITY = 4

# argument ops
CONST, BIND, CHECK, SKIP = "const", "bind", "check", "skip"


@dataclass(frozen=True)
class NegCheck:
    form: str  # bound | gap | leading | trailing
    atom: A.Atom
    preds: tuple
    anchor: int  # position the gap ends at (gap/leading) or follows (trailing)

    def describe(self) -> str:
        body = pretty_pattern(self.atom)
        if self.preds:
            body += " where {" + ", ".join(pretty_pred(p) for p in self.preds) + "}"
        return f"{self.form} not {body} @{self.anchor}"


@dataclass
class Position:
    index: int
    atom: A.Atom
    rel: str | None
    group: int | None
    ops: tuple = ()
    preds: tuple = ()  # source predicates checked on entering this position
    checks: tuple = ()  # compiled twins of ``preds``
    drop: frozenset = frozenset()  # kleene-local names cleared when leaving the group

    @property
    def event_type(self) -> str:
        return self.atom.event_type


@dataclass
class Branch:
    index: int
    positions: tuple
    transitions: tuple  # per source (-1 .. n-1): ((target, relation, is_loop), ...)
    accepting: frozenset
    late: tuple
    late_checks: tuple
    emits: tuple
    negations: tuple
    group_of: dict = field(default_factory=dict)

    def next_types(self, k: int) -> set[str]:
        return {self.positions[t].event_type for t, _, _ in self.transitions[k + 1]}


@dataclass
class NFAPlan:
    rule: A.Rule
    branches: tuple
    window: A.Window | None
    rule_prob: float
    head_time_bound: bool  # head time is an event timestamp, not computed
    decay: float | None = None

    @property
    def index(self) -> int:
        return self.rule.index

    @property
    def head(self) -> A.Head:
        return self.rule.head

    @property
    def max_outcome_prob(self) -> float:
        if self.rule.alt_heads:
            return self.rule.prob * max(a.prob for a in self.rule.alt_heads)
        return self.rule.prob

    @property
    def n_states(self) -> int:
        """Positive positions of the longest branch plus start and accept."""
        return max(len(b.positions) for b in self.branches) + 2


@dataclass
class HierarchyPlan:
    plans: tuple
    level: dict  # ce type -> level
    rule_level: dict  # rule index -> level
    groups: dict  # ce type -> rule indices

    @property
    def n_levels(self) -> int:
        return max(self.rule_level.values(), default=-1) + 1

    def plans_at(self, lvl: int) -> list[NFAPlan]:
        return [p for p in self.plans if self.rule_level[p.index] == lvl]


# -- fragments -------------------------------------------------------------------------

@dataclass(frozen=True)
class _Frag:
    positions: tuple  # ((atom, rel, group), ...)
    preds: tuple  # ((pred, group or None), ...)
    emits: tuple
    negs: tuple  # ((form, not_node, anchor),)   anchor relative to this fragment


def _shift(negs, off):
    return tuple((f, n, a + off) for f, n, a in negs)


def _unsupported(msg, node):
    line, col = getattr(node, "pos", None) or (None, None)
    return CompileError("UNSUPPORTED_NESTING", msg, line=line, col=col)


def _star_body_ok(node, top=True) -> bool:
    if isinstance(node, A.Atom):
        return True
    if isinstance(node, A.Select):
        return _star_body_ok(node.child, top)
    if isinstance(node, A.Seq) and top:
        return all(_star_body_ok(c, False) for c in node.children)
    return False


class _Expander:
    def __init__(self, rule: A.Rule):
        self.rule = rule

    def expand(self, node, scope: set, group: int | None) -> list[_Frag]:
        if isinstance(node, A.Atom):
            return [_Frag(((node, None, group),), (), (), ())]
        if isinstance(node, A.Select):
            return [_Frag(f.positions, f.preds + tuple((p, group) for p in node.preds), f.emits, f.negs)
                    for f in self.expand(node.child, scope, group)]
        if isinstance(node, A.Produce):
            if group is not None:
                raise _unsupported("emit inside iteration", node)
            return [_Frag(f.positions, f.preds, f.emits + node.maps, f.negs)
                    for f in self.expand(node.child, scope, group)]
        if isinstance(node, A.Window):
            raise _unsupported("a window must wrap the whole rule body", node)
        if isinstance(node, A.Or):
            out = []
            for c in node.children:
                out.extend(self.expand(c, scope | exported(c), group))
            return out
        if isinstance(node, A.Star):
            if group is not None:
                raise _unsupported("iteration inside iteration", node)
            if not _star_body_ok(node.child):
                raise _unsupported("iteration body must be an event, or a sequence of events, with optional where", node)
            gid = A.atoms(node.child)[0].aid
            return self.expand(node.child, scope | exported(node.child), gid)
        if isinstance(node, A.Seq):
            return self._seq(node, scope, group)
        if isinstance(node, A.And):
            return self._and(node, scope, group)
        if isinstance(node, A.Not):
            raise _unsupported("negation must sit inside a sequence or conjunction", node)
        raise _unsupported(f"cannot compile {type(node).__name__}", node)

    def _seq(self, node: A.Seq, scope, group):
        partial = [_Frag((), (), (), ())]
        pending: list = []
        for c in node.children:
            if isinstance(c, A.Not):
                if group is not None:
                    raise _unsupported("negation inside iteration", c)
                if is_bound_negation(c, scope):
                    partial = [_Frag(f.positions, f.preds, f.emits, f.negs + (("bound", c, -1),)) for f in partial]
                else:
                    pending.append(c)
                continue
            nxt = []
            for f in partial:
                for g in self.expand(c, scope, group):
                    off = len(f.positions)
                    first = g.positions[0]
                    rel = STRICT if off else None
                    pos = f.positions + ((first[0], rel, first[2]),) + g.positions[1:]
                    negs = f.negs + tuple(("gap" if off else "leading", n, off) for n in pending) + _shift(g.negs, off)
                    nxt.append(_Frag(pos, f.preds + g.preds, f.emits + g.emits, negs))
            partial = nxt
            pending = []
        if pending:
            partial = [_Frag(f.positions, f.preds, f.emits,
                             f.negs + tuple(("trailing", n, len(f.positions) - 1) for n in pending)) for f in partial]
        return partial

    def _and(self, node: A.And, scope, group):
        pos_kids = [c for c in node.children if not isinstance(c, A.Not)]
        negs = tuple(("bound", c, -1) for c in node.children if isinstance(c, A.Not))
        if len(pos_kids) > MAX_AND_ARITY:
            raise _unsupported(f"conjunction of {len(pos_kids)} elements exceeds the limit of {MAX_AND_ARITY}", node)
        options = [self.expand(c, scope, group) for c in pos_kids]
        out = []
        for combo in itertools.product(*options):
            preds = tuple(x for f in combo for x in f.preds)
            emits = tuple(x for f in combo for x in f.emits)
            for perm in itertools.permutations(range(len(combo))):
                pos: tuple = ()
                ns = negs
                for i in perm:
                    f = combo[i]
                    off = len(pos)
                    first = f.positions[0]
                    rel = NONSTRICT if off else None
                    pos = pos + ((first[0], rel, first[2]),) + f.positions[1:]
                    ns = ns + _shift(f.negs, off)
                out.append(_Frag(pos, preds, emits, ns))
        return out


# -- predicate placement ----------------------------------------------------------------

def split_predicates(preds, positions_bound: list[set], emit_names: set, all_late: bool = False):
    """Place each predicate at the first position binding all its variables.

    ``positions_bound[k]`` is the set of names bound once position k is
    filled. Predicates reading emitted names, or never fully bound, are late.
    Returns ``(early, late)`` with ``early[k]`` the predicates checked at k.
    """
    early = [[] for _ in positions_bound]
    late = []
    for p in preds:
        vs = A.expr_vars(p)
        if all_late or vs & emit_names or not positions_bound:
            late.append(p)
            continue
        for k, bound in enumerate(positions_bound):
            if vs <= bound:
                early[k].append(p)
                break
        else:
            late.append(p)
    return [tuple(e) for e in early], tuple(late)


def _star_outer_vars(body) -> dict[int, set[str]]:
    out = {}
    for star in (n for n in A.walk(body) if isinstance(n, A.Star)):
        gid = A.atoms(star.child)[0].aid
        inside = set().union(*(a.variables() for a in A.atoms(star.child)))
        for n in A.walk(star.child):
            if isinstance(n, A.Select):
                for p in n.preds:
                    inside |= A.expr_vars(p)
        outside = set()
        stack = [body]
        while stack:
            n = stack.pop()
            if n is star:
                continue
            if isinstance(n, A.Atom):
                outside |= n.variables()
            elif isinstance(n, A.Select):
                outside |= set().union(*(A.expr_vars(p) for p in n.preds))
            elif isinstance(n, A.Produce):
                for m in n.maps:
                    outside |= A.expr_vars(m.expr) | {m.name}
            stack.extend(A.children(n))
        out[gid] = inside & outside
    return out


def _build_branch(idx: int, frag: _Frag, rule: A.Rule, star_outer, all_late: bool) -> Branch:
    head_needs = set(rule.head.vars)
    for alt in rule.alt_heads:
        for m in alt.maps:
            head_needs |= A.expr_vars(m.expr)
    emit_names = {m.name for m in frag.emits}

    # binding analysis along the branch
    bound: set[str] = set()
    local: set[str] = set()
    bound_after: list[set] = []  # outer names bound after each position
    local_after: list[set] = []
    ops_list = []
    n = len(frag.positions)
    for k, (atom, rel, grp) in enumerate(frag.positions):
        if grp is not None and (k == 0 or frag.positions[k - 1][2] != grp):
            local = set()
        ops = []
        seen_here: set[str] = set()
        for term in atom.args:
            if isinstance(term, A.Wild):
                ops.append((SKIP, None))
            elif isinstance(term, A.Const):
                ops.append((CONST, term.value))
            elif term.name in bound or term.name in local or term.name in seen_here:
                ops.append((CHECK, term.name))
            else:
                if grp is not None and term.name in star_outer.get(grp, ()):
                    raise _unsupported(f"variable {term.name} is used inside iteration before it is bound", atom)
                ops.append((BIND, term.name))
                seen_here.add(term.name)
        if grp is None:
            bound |= seen_here
        else:
            local |= seen_here
        ops_list.append(tuple(ops))
        bound_after.append(set(bound))
        local_after.append(set(local) if grp is not None else set())

    global_preds = [p for p, g in frag.preds if g is None]
    early, late = split_predicates(global_preds, bound_after, emit_names, all_late)
    early = [list(e) for e in early]
    for p, g in frag.preds:
        if g is None:
            continue
        vs = A.expr_vars(p)
        for k, (atom, rel, grp) in enumerate(frag.positions):
            if grp == g and vs <= bound_after[k] | local_after[k]:
                early[k].append(p)
                break
        else:
            raise _unsupported("predicate inside iteration reads a variable bound later", p)

    groups: dict[int, list[int]] = {}
    for k, (_, _, grp) in enumerate(frag.positions):
        if grp is not None:
            groups.setdefault(grp, []).append(k)

    positions = []
    for k, (atom, rel, grp) in enumerate(frag.positions):
        drop = frozenset()
        if grp is not None and k == groups[grp][-1]:
            drop = frozenset(local_after[k])
        positions.append(Position(k, atom, rel, grp, ops_list[k], tuple(early[k]),
                                  tuple(A.compile_pred(p) for p in early[k]), drop))

    transitions = [((0, None, False),)] if n else [()]
    accepting = set()
    for k in range(n):
        outs = []
        grp = positions[k].group
        if grp is not None and k == groups[grp][-1]:
            outs.append((groups[grp][0], STRICT, True))
        if k + 1 < n:
            outs.append((k + 1, positions[k + 1].rel, False))
        else:
            accepting.add(k)
        transitions.append(tuple(outs))

    negs = []
    for form, node, anchor in frag.negs:
        atom, npreds = negated_atom(node)
        if form == "bound" and isinstance(atom.time_arg, A.Wild):
            line, col = atom.pos or (None, None)
            raise CompileError("UNSUPPORTED_NEGATION", "a negated event with bound attributes needs a time variable",
                               line=line, col=col)
        negs.append(NegCheck(form, atom, npreds, anchor))
    return Branch(idx, tuple(positions), tuple(transitions), frozenset(accepting), late,
                  tuple(A.compile_pred(p) for p in late), frag.emits, tuple(negs),
                  {g: tuple(ks) for g, ks in groups.items()})


def compile_rule(rule: A.Rule, all_late: bool = False, decay: float | None = None) -> NFAPlan:
    window, core = strip_root(rule.body)
    body = rule.body
    root_preds: list = []
    root_emits: list = []
    node = body
    while isinstance(node, (A.Select, A.Produce, A.Window)):
        if isinstance(node, A.Select):
            root_preds = list(node.preds) + root_preds
        elif isinstance(node, A.Produce):
            root_emits = list(node.maps) + root_emits
        node = node.child
    scope = exported(body)
    frags = _Expander(rule).expand(core, scope, None)
    star_outer = _star_outer_vars(body)
    branches = []
    for i, f in enumerate(frags):
        f = _Frag(f.positions, f.preds + tuple((p, None) for p in root_preds), f.emits + tuple(root_emits), f.negs)
        branches.append(_build_branch(i, f, rule, star_outer, all_late))
    computed = set()
    for b in branches:
        computed |= {m.name for m in b.emits}
    for alt in rule.alt_heads:
        computed |= {m.name for m in alt.maps}
    head_time_bound = rule.head.time_var not in computed
    return NFAPlan(rule, tuple(branches), window, rule.prob, head_time_bound, decay)


def topo_order(ruleset: A.RuleSet) -> list[A.Rule]:
    """Stable topological order: rules over input events first, input order within a level."""
    levels = rule_levels(ruleset)
    return [r for lvl in levels for r in lvl]


def compile(ruleset: A.RuleSet, all_late: bool = False, decay: float | None = None) -> HierarchyPlan:
    ordered = topo_order(ruleset)
    levels = rule_levels(ruleset)
    rule_level = {r.index: k for k, lvl in enumerate(levels) for r in lvl}
    level = {}
    for r in ruleset.rules:
        level[r.head.name] = max(level.get(r.head.name, 0), rule_level[r.index])
    plans = tuple(compile_rule(r, all_late, decay) for r in ordered)
    return HierarchyPlan(plans, level, rule_level, ruleset.groups())


compile_rules = compile


# -- text dump ----------------------------------------------------------------------------

def _ops_text(ops) -> str:
    out = []
    for kind, arg in ops:
        out.append("_" if kind == SKIP else (f"={arg!r}" if kind == CONST else f"{'+' if kind == BIND else '?'}{arg}"))
    return "(" + ", ".join(out) + ")"


def dump_plan(hp: HierarchyPlan) -> str:
    """Deterministic human-readable rendering of a compiled hierarchy."""
    lines = []
    for plan in hp.plans:
        r = plan.rule
        lines.append(f"rule {r.index} {r.head.name}({', '.join(r.head.vars)}) level={hp.rule_level[r.index]} "
                     f"prob={r.prob!r} states={plan.n_states}")
        if plan.window is not None:
            kind = "relative" if plan.window.relative else "absolute"
            lines.append(f"  window [{plan.window.lo}, {plan.window.hi}] {kind}")
        for alt in r.alt_heads:
            lines.append(f"  alt {alt.prob!r}: " + ", ".join(f"{m.name} = {pretty_expr(m.expr)}" for m in alt.maps))
        if r.alt_heads:
            lines.append(f"  alt group vars: {', '.join(group_vars(r))}")
        for b in plan.branches:
            lines.append(f"  branch {b.index}")
            for p in b.positions:
                rel = p.rel or "start"
                kl = f" kleene={p.group}" if p.group is not None else ""
                lines.append(f"    s{p.index + 1} {rel} {p.event_type}{_ops_text(p.ops)}{kl}")
                for pr in p.preds:
                    lines.append(f"       early {pretty_pred(pr)}")
            for k, outs in enumerate(b.transitions):
                src = "start" if k == 0 else f"s{k}"
                for t, rel, loop in outs:
                    lines.append(f"    {src} -> s{t + 1} [{b.positions[t].event_type}]" + (" loop" if loop else ""))
            for k in sorted(b.accepting):
                lines.append(f"    s{k + 1} -> accept")
            for pr in b.late:
                lines.append(f"    late {pretty_pred(pr)}")
            for m in b.emits:
                lines.append(f"    emit {m.name} = {pretty_expr(m.expr)}")
            for ng in b.negations:
                lines.append(f"    negation {ng.describe()}")
    return "\n".join(lines) + ("\n" if lines else "")
