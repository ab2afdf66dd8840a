"""Render ASTs back to DSL text; ``parse(pretty(x)) == x``."""

from __future__ import annotations

import json
import re

from . import ast as A
from .parser import KEYWORDS

# binding levels: expr < seq < unary < conj < postfix < primary
_EXPR, _SEQ, _UNARY, _CONJ, _POSTFIX, _PRIMARY = range(6)
_BARE = re.compile(r"^[a-z][A-Za-z0-9_]*$")


def _level(node) -> int:
    if isinstance(node, A.Or):
        return _EXPR
    if isinstance(node, A.Seq):
        return _SEQ
    if isinstance(node, (A.Not, A.Star)):
        return _UNARY
    if isinstance(node, A.And):
        return _CONJ
    if isinstance(node, (A.Select, A.Produce, A.Window)):
        return _POSTFIX
    return _PRIMARY


def _at(node, level: int) -> str:
    text = pretty_pattern(node)
    return text if _level(node) >= level else f"({text})"


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return v if _BARE.match(v) and v not in KEYWORDS else json.dumps(v)
    return repr(v)


def pretty_term(t) -> str:
    if isinstance(t, A.Var):
        return t.name
    if isinstance(t, A.Wild):
        return "_"
    return format_value(t.value)


def pretty_expr(e) -> str:
    if isinstance(e, A.BinOp):
        return f"({pretty_expr(e.left)} {e.op} {pretty_expr(e.right)})"
    return pretty_term(e)


def pretty_pred(p: A.Compare) -> str:
    return f"{pretty_expr(p.left)} {p.op} {pretty_expr(p.right)}"


def pretty_map(m: A.Mapping) -> str:
    return f"{m.name} = {pretty_expr(m.expr)}"


def _operand(node) -> str:
    if isinstance(node, A.Not) and _level(node.child) >= _POSTFIX:
        return "not " + pretty_pattern(node.child)
    return _at(node, _POSTFIX)


def pretty_pattern(node) -> str:
    if isinstance(node, A.Atom):
        return f"{node.event_type}({', '.join(pretty_term(a) for a in node.args)})"
    if isinstance(node, A.Or):
        return " | ".join(_at(c, _SEQ) for c in node.children)
    if isinstance(node, A.Seq):
        return " ; ".join(_at(c, _UNARY) for c in node.children)
    if isinstance(node, A.And):
        return " and ".join(_operand(c) for c in node.children)
    if isinstance(node, A.Not):
        return "not " + _at(node.child, _CONJ)
    if isinstance(node, A.Star):
        return _at(node.child, _CONJ) + "*"
    if isinstance(node, A.Select):
        return f"{_at(node.child, _POSTFIX)} where {{{', '.join(pretty_pred(p) for p in node.preds)}}}"
    if isinstance(node, A.Produce):
        return f"{_at(node.child, _POSTFIX)} emit {{{', '.join(pretty_map(m) for m in node.maps)}}}"
    if isinstance(node, A.Window):
        return f"{_at(node.child, _POSTFIX)} within [{node.lo}, {node.hi}]"
    raise TypeError(f"not a pattern node: {node!r}")


def pretty_rule(rule: A.Rule) -> str:
    prefix = f"{rule.prob!r} :: " if (rule.prefixed or rule.prob != 1.0) else ""
    head = f"{rule.head.name}({', '.join(rule.head.vars)})"
    text = f"{prefix}{head} ::= {pretty_pattern(rule.body)}"
    for alt in rule.alt_heads:
        text += f" ;; {alt.prob!r} :: emit {{{', '.join(pretty_map(m) for m in alt.maps)}}}"
    return text + " ."


def pretty(rules) -> str:
    rs = rules.rules if isinstance(rules, A.RuleSet) else rules
    return "\n".join(pretty_rule(r) for r in rs) + ("\n" if rs else "")
