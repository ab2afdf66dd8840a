"""Seeded random rules and streams for differential tests."""

from __future__ import annotations

import random

from probcer.errors import ProbCERError
from probcer.events import validate_event
from probcer.lang import ast as A
from probcer.lang.parser import parse_source
from probcer.lang.validate import exported, parse_rules
from probcer.plan import compile as compile_plan

TYPES = ("a", "b", "c")
PROBS = tuple(round(0.1 * k, 1) for k in range(1, 10))


class _Pat:
    def __init__(self, rng: random.Random, kleene: bool, negation: bool):
        self.rng = rng
        self.kleene = kleene
        self.negation = negation
        self.nvar = 0
        self.attr_vars: list[str] = []
        self.time_vars: list[str] = []

    def fresh_time(self):
        self.nvar += 1
        v = f"T{self.nvar}"
        self.time_vars.append(v)
        return v

    def attr_term(self, allow_new=True):
        r = self.rng.random()
        if r < 0.15:
            return str(self.rng.choice((1, 2)))
        if r < 0.25:
            return "_"
        if self.attr_vars and (r < 0.55 or not allow_new):
            return self.rng.choice(self.attr_vars)
        v = "XYZUVW"[len(self.attr_vars) % 6] + ("" if len(self.attr_vars) < 6 else str(len(self.attr_vars)))
        self.attr_vars.append(v)
        return v

    def atom(self):
        return f"{self.rng.choice(TYPES)}({self.attr_term()}, {self.fresh_time()})"

    def neg_atom(self):
        self.nvar += 1
        t = "_" if self.rng.random() < 0.3 else f"N{self.nvar}"
        return f"not {self.rng.choice(TYPES)}({self.attr_term(allow_new=False)}, {t})"

    def star_body(self):
        if self.rng.random() < 0.7:
            body = f"{self.rng.choice(TYPES)}(_, {self.fresh_local()})"
        else:
            body = f"({self.rng.choice(TYPES)}(_, {self.fresh_local()}) ; {self.rng.choice(TYPES)}(_, {self.fresh_local()}))"
        return body + "*"

    def fresh_local(self):
        self.nvar += 1
        return f"L{self.nvar}"

    def node(self, depth):
        rng = self.rng
        if depth <= 0 or rng.random() < 0.3:
            return self.atom()
        op = rng.choice(("seq", "seq", "or", "and", "star", "where"))
        if op == "star" and not self.kleene:
            op = "seq"
        if op == "star":
            return "(" + self.atom() + " ; " + self.star_body() + ")"
        if op == "where":
            inner = self.node(depth - 1)
            if len(self.time_vars) >= 2:
                t1, t2 = rng.sample(self.time_vars, 2)
                return f"({inner}) where {{{t2} - {t1} <= {rng.randint(1, 4)}}}"
            return inner
        n = rng.randint(2, 3)
        kids = [self.node(depth - 1) for _ in range(n)]
        if op == "seq":
            if self.negation and rng.random() < 0.4:
                kids.insert(rng.randint(1, len(kids) - 1), self.neg_atom())
            return "(" + " ; ".join(kids) + ")"
        if op == "or":
            return "(" + " | ".join(kids) + ")"
        return "(" + " and ".join(kids[:3]) + ")"


def random_rule_text(rng: random.Random, depth: int = 3, kleene: bool = False, negation: bool = True,
                     window: bool = True, prob: bool = True, name: str = "ce") -> str | None:
    g = _Pat(rng, kleene, negation)
    body = g.node(depth)
    if g.attr_vars and len(g.attr_vars) >= 2 and rng.random() < 0.3:
        x, y = rng.sample(g.attr_vars, 2)
        body = f"({body}) where {{{x} != {y}}}"
    if window and rng.random() < 0.4:
        if rng.random() < 0.6:
            body = f"({body}) within [0, {rng.randint(1, 4)}]"
        else:
            lo = rng.randint(1, 2)
            body = f"({body}) within [{lo}, {lo + rng.randint(2, 5)}]"
    try:
        (raw,) = parse_source(f"{name}(T0) ::= {body}")
    except ProbCERError:
        return None
    scope = sorted(exported(raw.body))
    times = [v for v in scope if v.startswith("T")]
    attrs = [v for v in scope if not v.startswith("T")]
    if not times:
        return None
    head_vars = rng.sample(attrs, min(len(attrs), rng.randint(0, 2))) + [rng.choice(times)]
    prefix = f"{rng.choice((0.5, 0.8, 0.9))} :: " if prob and rng.random() < 0.4 else ""
    return f"{prefix}{name}({', '.join(head_vars)}) ::= {body} ."


def random_ruleset(rng: random.Random, n_rules: int | None = None, **kw):
    """A validated, compilable ruleset (retries until one is found)."""
    for _ in range(200):
        k = n_rules or rng.choice((1, 1, 2))
        texts = []
        for i in range(k):
            t = random_rule_text(rng, **kw)
            if t is None:
                break
            texts.append(t)
        if len(texts) != k:
            continue
        src = "\n".join(texts)
        try:
            rs = parse_rules(src)
            compile_plan(rs)
        except ProbCERError:
            continue
        return rs, src
    raise RuntimeError("generator failed")


def random_stream(rng: random.Random, n: int, crisp: bool = False, multi_alt: bool = True, types=TYPES):
    events = []
    ts = 0
    for i in range(n):
        ts += rng.choice((0, 1, 1, 2))
        etype = rng.choice(types)
        if crisp:
            alts = [{"args": {"k": rng.choice((1, 2))}, "prob": 1.0}]
        elif multi_alt and rng.random() < 0.25:
            p1 = rng.choice(PROBS[:5])
            p2 = rng.choice(PROBS[:4])
            alts = [{"args": {"k": 1}, "prob": p1}, {"args": {"k": 2}, "prob": p2}]
        else:
            alts = [{"args": {"k": rng.choice((1, 2))}, "prob": rng.choice(PROBS)}]
        events.append(validate_event({"type": etype, "ts": ts, "alts": alts}, default_id=f"e{i + 1}"))
    return events
