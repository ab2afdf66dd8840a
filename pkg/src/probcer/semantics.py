"""Reference semantics: direct recursive evaluation of a pattern over a crisp world.

This evaluator walks the AST over all event subsets and never touches the
automaton plans. It is the ground truth for the runtime's match sets and,
evaluated over every event history, for the probability engine.
"""

from __future__ import annotations

import itertools
from collections import ChainMap, defaultdict
from dataclasses import dataclass
from typing import Any, Iterator, Sequence

from .errors import StreamError
from .events import NON_OCCURRENCE, ProbEvent, instance_key, values_equal
from .lang import ast as A
from .lang.validate import exported, is_bound_negation, negated_atom, strip_root


@dataclass(frozen=True)
class WorldEvent:
    """An event as it occurs in one history: a single chosen alternative."""

    id: str
    event_type: str
    ts: int
    values: tuple
    alt: int = 0
    names: tuple = ()


def world_of(events: Sequence[ProbEvent], choices: Sequence[int] | None = None) -> list[WorldEvent]:
    """Occurring events of a history (``choices[i]`` per event; default alt 0)."""
    out = []
    for i, ev in enumerate(events):
        c = 0 if choices is None else choices[i]
        if c == NON_OCCURRENCE:
            continue
        alt = ev.alternatives[c]
        out.append(WorldEvent(ev.id, ev.event_type, ev.ts, alt.values, c, alt.names))
    return out


def unify_atom(atom: A.Atom, ev: WorldEvent, env) -> dict | None:
    """New bindings making ``atom`` match ``ev`` under ``env``, or None."""
    if len(atom.args) != len(ev.values) + 1:
        return None
    new: dict[str, Any] = {}
    for term, value in zip(atom.args, ev.values + (ev.ts,)):
        if isinstance(term, A.Wild):
            continue
        if isinstance(term, A.Const):
            if not values_equal(term.value, value):
                return None
            continue
        name = term.name
        if name in new:
            if not values_equal(new[name], value):
                return None
        elif name in env:
            if not values_equal(env[name], value):
                return None
        else:
            new[name] = value
    return new


@dataclass
class _PM:
    env: dict
    sel: tuple  # ((aid, WorldEvent), ...)
    start: int
    end: int
    checks: tuple


class _Ctx:
    def __init__(self, world, window, outer_of_star):
        self.by_type = defaultdict(list)
        for ev in world:
            self.by_type[ev.event_type].append(ev)
        self.world = world
        self.window = window
        self.outer_of_star = outer_of_star


def _eval(node, env: dict, scope: set, ctx: _Ctx, local: dict | None) -> Iterator[_PM]:
    if isinstance(node, A.Atom):
        for ev in ctx.by_type.get(node.event_type, ()):
            new = unify_atom(node, ev, env)
            if new is None:
                continue
            yield _PM({**env, **new}, ((node.aid, ev),), ev.ts, ev.ts, ())
        return

    if isinstance(node, A.Select):
        tag = None if local is None else dict(local)
        for pm in _eval(node.child, env, scope, ctx, local):
            loc = None if local is None else {**tag, **{k: v for k, v in pm.env.items() if k not in env}}
            pm.checks = pm.checks + tuple(("pred", p, loc) for p in node.preds)
            yield pm
        return

    if isinstance(node, A.Produce):
        for pm in _eval(node.child, env, scope, ctx, local):
            pm.checks = pm.checks + tuple(("emit", m, None) for m in node.maps)
            yield pm
        return

    if isinstance(node, A.Window):
        for pm in _eval(node.child, env, scope, ctx, local):
            ts = [ev.ts for _, ev in pm.sel]
            if node.relative:
                ok = max(ts) - min(ts) <= node.hi
            else:
                ok = all(node.lo <= t <= node.hi for t in ts)
            if ok:
                yield pm
        return

    if isinstance(node, A.Or):
        for c in node.children:
            yield from _eval(c, env, scope | exported(c), ctx, local)
        return

    if isinstance(node, A.Seq):
        yield from _eval_seq(node, env, scope, ctx, local)
        return

    if isinstance(node, A.And):
        yield from _eval_and(node, env, scope, ctx, local)
        return

    if isinstance(node, A.Star):
        yield from _eval_star(node, env, scope, ctx)
        return

    raise TypeError(f"cannot evaluate {node!r} here")


def _neg_check(not_node, scope, local, interval):
    atom, preds = negated_atom(not_node)
    if is_bound_negation(not_node, scope):
        interval = None
    return ("neg", (atom, preds, interval), local)


def _eval_seq(node: A.Seq, env, scope, ctx, local):
    kids = node.children

    def go(i, env, sel, start, end, checks, pending):
        if i == len(kids):
            if pending:
                hi = ctx.window.hi if ctx.window is not None else None
                checks = checks + tuple(_neg_check(n, scope, local, (end, False, hi, True)) for n in pending)
            yield _PM(env, sel, start, end, checks)
            return
        c = kids[i]
        if isinstance(c, A.Not):
            if is_bound_negation(c, scope):
                yield from go(i + 1, env, sel, start, end, checks + (_neg_check(c, scope, local, None),), pending)
            else:
                yield from go(i + 1, env, sel, start, end, checks, pending + (c,))
            return
        for pm in _eval(c, env, scope, ctx, local):
            if end is not None and not pm.start > end:
                continue
            new_checks = checks
            if pending:
                if end is None:
                    lo = (ctx.window.lo, True) if ctx.window is not None else (None, True)
                else:
                    lo = (end, False)
                new_checks = new_checks + tuple(
                    _neg_check(n, scope, local, (lo[0], lo[1], pm.start, False)) for n in pending)
            yield from go(i + 1, pm.env, sel + pm.sel, start if start is not None else pm.start,
                          pm.end, new_checks + pm.checks, ())

    yield from go(0, env, (), None, None, (), ())


def _eval_and(node: A.And, env, scope, ctx, local):
    pos = [c for c in node.children if not isinstance(c, A.Not)]
    negs = tuple(_neg_check(c, scope, local, None) for c in node.children if isinstance(c, A.Not))

    def go(i, env, parts):
        if i == len(pos):
            spans = sorted((p.start, p.end) for p in parts)
            if any(spans[k][1] > spans[k + 1][0] for k in range(len(spans) - 1)):
                return
            ids = [ev.id for p in parts for _, ev in p.sel]
            if len(ids) != len(set(ids)):
                return
            sel = tuple(x for p in parts for x in p.sel)
            checks = tuple(c for p in parts for c in p.checks) + negs
            yield _PM(env, sel, spans[0][0], max(s[1] for s in spans), checks)
            return
        for pm in _eval(pos[i], env, scope, ctx, local):
            yield from go(i + 1, pm.env, parts + [pm])

    yield from go(0, env, [])


def _eval_star(node: A.Star, env, scope, ctx):
    inner_scope = scope | exported(node.child)
    outer = ctx.outer_of_star.get(id(node), set())
    iterations = []
    for pm in _eval(node.child, env, inner_scope, ctx, {}):
        newly = {k: v for k, v in pm.env.items() if k not in env}
        eqs = tuple(("eq", (k, v), None) for k, v in newly.items() if k in outer)
        local_env = {k: v for k, v in newly.items() if k not in outer}
        checks = tuple(_bind_local(c, local_env) for c in pm.checks) + eqs
        iterations.append(_PM(env, pm.sel, pm.start, pm.end, checks))
    iterations.sort(key=lambda p: (p.start, p.end))

    def chains(last_end, idx_from):
        for j in range(idx_from, len(iterations)):
            it = iterations[j]
            if last_end is not None and not it.start > last_end:
                continue
            yield [it]
            for rest in chains(it.end, j + 1):
                yield [it] + rest

    for chain in chains(None, 0):
        sel = tuple(x for it in chain for x in it.sel)
        checks = tuple(c for it in chain for c in it.checks)
        yield _PM(dict(env), sel, chain[0].start, chain[-1].end, checks)


def _bind_local(check, local_env):
    kind, payload, loc = check
    if loc is None:
        return check
    return (kind, payload, {**loc, **local_env})


def _outer_vars_of_stars(body) -> dict[int, set[str]]:
    """For each Star node, the variables of its body that also occur outside it."""
    out = {}
    for star in (n for n in A.walk(body) if isinstance(n, A.Star)):
        inside = set()
        for n in A.walk(star.child):
            if isinstance(n, A.Atom):
                inside |= n.variables()
        outside = set()
        for n in _walk_excluding(body, star):
            if isinstance(n, A.Atom):
                outside |= n.variables()
            elif isinstance(n, (A.Select,)):
                for p in n.preds:
                    outside |= A.expr_vars(p)
            elif isinstance(n, A.Produce):
                for m in n.maps:
                    outside |= A.expr_vars(m.expr) | {m.name}
        out[id(star)] = inside & outside
    return out


def _walk_excluding(node, skip):
    if node is skip:
        return
    yield node
    for c in A.children(node):
        yield from _walk_excluding(c, skip)


def _violated(atom, preds, interval, env, by_type) -> bool:
    for ev in by_type.get(atom.event_type, ()):
        if interval is not None:
            lo, lo_incl, hi, hi_incl = interval
            if lo is not None and (ev.ts < lo or (ev.ts == lo and not lo_incl)):
                continue
            if hi is not None and (ev.ts > hi or (ev.ts == hi and not hi_incl)):
                continue
        new = unify_atom(atom, ev, env)
        if new is None:
            continue
        scoped = ChainMap(new, env)
        if all(A.eval_pred(p, scoped) for p in preds):
            return True
    return False


@dataclass(frozen=True)
class NaiveMatch:
    rule: int
    key: frozenset  # {(aid, event id, alt)}
    env: dict
    events: tuple  # WorldEvents in selection order

    @property
    def event_ids(self) -> tuple:
        return tuple(ev.id for ev in self.events)


def naive_matches(rule: A.Rule, world: Sequence[WorldEvent]) -> list[NaiveMatch]:
    """All matches of ``rule`` over the crisp ``world`` (deduplicated by key)."""
    window, _ = strip_root(rule.body)
    ctx = _Ctx(world, window, _outer_vars_of_stars(rule.body))
    scope = exported(rule.body)
    found: dict[frozenset, NaiveMatch] = {}
    for pm in _eval(rule.body, {}, scope, ctx, None):
        env = dict(pm.env)
        try:
            ok = _finish(pm, env, ctx)
        except KeyError:
            ok = False
        if not ok:
            continue
        key = frozenset((aid, ev.id, ev.alt) for aid, ev in pm.sel)
        if key not in found:
            events = tuple(ev for _, ev in sorted(pm.sel, key=lambda x: (x[1].ts, x[0])))
            found[key] = NaiveMatch(rule.index, key, env, events)
    return list(found.values())


def _finish(pm: _PM, env: dict, ctx: _Ctx) -> bool:
    for kind, payload, loc in pm.checks:
        if kind == "emit":
            env[payload.name] = A.eval_expr(payload.expr, env)
    for kind, payload, loc in pm.checks:
        if kind == "eq":
            name, value = payload
            if name not in env or not values_equal(env[name], value):
                return False
        elif kind == "pred":
            scoped = env if loc is None else ChainMap(loc, env)
            if not A.eval_pred(payload, scoped):
                return False
    for kind, payload, loc in pm.checks:
        if kind == "neg":
            atom, preds, interval = payload
            scoped = env if loc is None else ChainMap(loc, env)
            if _violated(atom, preds, interval, scoped, ctx.by_type):
                return False
    return True


# -- rule outcomes (shared production semantics) ----------------------------------

def head_time(rule: A.Rule, env) -> int:
    t = env[rule.head.time_var]
    if isinstance(t, float) and t.is_integer():
        t = int(t)
    if isinstance(t, bool) or not isinstance(t, int) or t < 0:
        raise StreamError("BAD_TIMESTAMP", f"{rule.head.name}: produced time {t!r} is not a non-negative integer")
    return t


def group_vars(rule: A.Rule) -> tuple[str, ...]:
    """Variables identifying one firing of an annotated-disjunction rule."""
    names = set()
    targets = set()
    for alt in rule.alt_heads:
        for m in alt.maps:
            names |= A.expr_vars(m.expr)
            targets.add(m.name)
    names |= set(rule.head.vars) - targets
    return tuple(sorted(names))


def rule_outcomes(rule: A.Rule, env) -> tuple[tuple, list[tuple]]:
    """Group key and mutually exclusive outcomes ``(prob, attrs, ts)`` of one firing.

    Without alternative heads the single outcome has probability equal to the
    rule probability; with them each alternative contributes
    ``rule.prob * alt.prob``.
    """
    head = rule.head
    if not rule.alt_heads:
        attrs = tuple((v, env[v]) for v in head.attr_vars)
        ts = head_time(rule, env)
        return ("rule", rule.index, instance_key(head.name, attrs, ts)), [(rule.prob, attrs, ts)]
    gv = group_vars(rule)
    key = ("rule", rule.index, tuple((v, repr(env[v])) for v in gv))
    outs = []
    for alt in rule.alt_heads:
        local = dict(env)
        for m in alt.maps:
            local[m.name] = A.eval_expr(m.expr, local)
        attrs = tuple((v, local[v]) for v in head.attr_vars)
        outs.append((rule.prob * alt.prob, attrs, head_time(rule, local)))
    return key, outs


def rule_levels(ruleset: A.RuleSet) -> list[list[A.Rule]]:
    """Rules grouped by hierarchy level (level 0 references SDEs only)."""
    heads = ruleset.ce_types
    level_of_type: dict[str, int] = {}

    def level(t):
        if t not in heads:
            return -1
        if t not in level_of_type:
            level_of_type[t] = max(
                (1 + max((level(a.event_type) for a in A.atoms(r.body)), default=-1)
                 for r in ruleset.rules_for(t)), default=0)
        return level_of_type[t]

    rule_level = {}
    for r in ruleset.rules:
        rule_level[r.index] = 1 + max((level(a.event_type) for a in A.atoms(r.body)), default=-1)
    n = max(rule_level.values(), default=-1) + 1
    return [[r for r in ruleset.rules if rule_level[r.index] == k] for k in range(n)]


def derived_event(ikey, attrs, ts) -> WorldEvent:
    return WorldEvent(f"{ikey[0]}{ikey[1]!r}@{ts}", ikey[0], ts, tuple(v for _, v in attrs), 0,
                      tuple(k for k, _ in attrs))


def ce_distribution(ruleset: A.RuleSet, world: Sequence[WorldEvent], levels=None) -> dict[tuple, float]:
    """P(CE instance holds | world), integrating over rule choices level by level."""
    levels = levels if levels is not None else rule_levels(ruleset)
    variants: dict[frozenset, float] = {frozenset(): 1.0}
    info: dict[tuple, WorldEvent] = {}
    for level_rules in levels:
        nxt: dict[frozenset, float] = defaultdict(float)
        for derived, w in variants.items():
            events = list(world) + sorted((info[k] for k in derived), key=lambda e: (e.ts, e.id))
            groups: dict[tuple, list] = {}
            for rule in level_rules:
                for m in naive_matches(rule, events):
                    gkey, outs = rule_outcomes(rule, m.env)
                    if gkey not in groups:
                        groups[gkey] = outs
            options = []
            for gkey in sorted(groups, key=repr):
                outs = groups[gkey]
                opts = []
                for p, attrs, ts in outs:
                    ik = instance_key(_type_of(gkey, ruleset), attrs, ts)
                    info.setdefault(ik, derived_event(ik, attrs, ts))
                    opts.append((p, ik))
                rest = 1.0 - sum(p for p, _ in opts)
                if rest > 1e-15:
                    opts.append((rest, None))
                options.append(opts)
            for combo in itertools.product(*options):
                p = w
                chosen = set(derived)
                for q, ik in combo:
                    p *= q
                    if ik is not None:
                        chosen.add(ik)
                if p > 0:
                    nxt[frozenset(chosen)] += p
        variants = nxt
    out: dict[tuple, float] = defaultdict(float)
    for derived, w in variants.items():
        for ik in derived:
            out[ik] += w
    return dict(out)


def _type_of(gkey, ruleset) -> str:
    return ruleset.rules[gkey[1]].head.name
