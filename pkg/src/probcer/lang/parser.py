"""Recursive-descent parser for the rule DSL.

Grammar (``and`` binds tighter than ``;`` and ``*``)::

    ruleset  := rule*
    rule     := [NUMBER "::"] head "::=" expr (";;" althead)* ["."]
    althead  := NUMBER "::" "emit" "{" maps "}"
    head     := IDENT "(" VAR ("," VAR)* ")"
    expr     := seq ("|" seq)*
    seq      := unary (";" unary)*
    unary    := "not" conj | conj ["*"]
    conj     := operand ("and" operand)*
    operand  := "not" postfix | postfix
    postfix  := primary ("where" "{" preds "}" | "emit" "{" maps "}"
                         | "within" "[" INT "," INT "]")*
    primary  := IDENT "(" term ("," term)* ")" | "(" expr ")"

Identifiers starting with an uppercase letter (or ``_`` plus more
characters) are variables, a lone ``_`` is a wildcard, anything else is a
string constant.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ParseError
from . import ast as A

KEYWORDS = {"and", "not", "where", "emit", "within", "true", "false"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>[#%][^\n]*)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<string>"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*')
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>::=|::|;;|!=|==|<=|>=|[;|(){}\[\],*=<>+\-/.])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # number | string | ident | punct | eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, line_start, i = 1, 0, 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise ParseError("SYNTAX_ERROR", f"unexpected character {text[i]!r}", line, i - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, i - line_start + 1))
        i = m.end()
    tokens.append(Token("eof", "", line, i - line_start + 1))
    return tokens


def is_variable(name: str) -> bool:
    return name[0].isupper() or (name[0] == "_" and len(name) > 1)


class Parser:
    def __init__(self, text: str) -> None:
        self.tokens = tokenize(text)
        self.i = 0

    # -- token helpers -------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("punct", "ident") and t.text == text

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        return self.advance()

    def error(self, msg: str, tok: Token | None = None):
        t = tok or self.tok
        found = t.text if t.kind != "eof" else "end of input"
        raise ParseError("SYNTAX_ERROR", f"{msg}, found {found!r}", t.line, t.col)

    def pos(self, t: Token | None = None):
        t = t or self.tok
        return (t.line, t.col)

    # -- rules -----------------------------------------------------------------

    def parse_rules(self) -> list[A.Rule]:
        rules = []
        while self.tok.kind != "eof":
            rules.append(self.parse_rule())
        return rules

    def parse_prob(self) -> float:
        t = self.tok
        if t.kind != "number":
            self.error("expected a probability")
        self.advance()
        return float(t.text)

    def parse_rule(self) -> A.Rule:
        start = self.tok
        prob, prefixed = 1.0, False
        if self.tok.kind == "number":
            prob = self.parse_prob()
            prefixed = True
            self.expect("::")
        head = self.parse_head()
        self.expect("::=")
        body = self.parse_expr()
        alts = []
        while self.at(";;"):
            self.advance()
            at = self.tok
            p = self.parse_prob()
            self.expect("::")
            self.expect("emit")
            alts.append(A.AltHead(p, self.parse_braced(self.parse_mapping), pos=self.pos(at)))
        if self.at("."):
            self.advance()
        return A.Rule(head, body, prob, tuple(alts), prefixed=prefixed, pos=self.pos(start))

    def parse_head(self) -> A.Head:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            self.error("expected a rule head")
        self.advance()
        self.expect("(")
        names = []
        while True:
            v = self.tok
            if v.kind != "ident" or not is_variable(v.text):
                self.error("head arguments must be variables")
            names.append(self.advance().text)
            if self.at(","):
                self.advance()
                continue
            break
        self.expect(")")
        return A.Head(t.text, tuple(names), pos=self.pos(t))

    # -- patterns --------------------------------------------------------------

    def parse_expr(self):
        start = self.tok
        parts = [self.parse_seq()]
        while self.at("|"):
            self.advance()
            parts.append(self.parse_seq())
        return parts[0] if len(parts) == 1 else A.Or(tuple(parts), pos=self.pos(start))

    def parse_seq(self):
        start = self.tok
        parts = [self.parse_unary()]
        while self.at(";"):
            self.advance()
            parts.append(self.parse_unary())
        return parts[0] if len(parts) == 1 else A.Seq(tuple(parts), pos=self.pos(start))

    def parse_unary(self):
        start = self.tok
        if self.at("not"):
            self.advance()
            return A.Not(self.parse_conj(), pos=self.pos(start))
        node = self.parse_conj()
        if self.at("*"):
            self.advance()
            node = A.Star(node, pos=self.pos(start))
        return node

    def parse_conj(self):
        start = self.tok
        parts = [self.parse_operand()]
        while self.at("and"):
            self.advance()
            parts.append(self.parse_operand())
        return parts[0] if len(parts) == 1 else A.And(tuple(parts), pos=self.pos(start))

    def parse_operand(self):
        start = self.tok
        if self.at("not"):
            self.advance()
            return A.Not(self.parse_postfix(), pos=self.pos(start))
        return self.parse_postfix()

    def parse_postfix(self):
        start = self.tok
        node = self.parse_primary()
        while True:
            if self.at("where"):
                self.advance()
                node = A.Select(self.parse_braced(self.parse_predicate), node, pos=self.pos(start))
            elif self.at("emit"):
                self.advance()
                node = A.Produce(self.parse_braced(self.parse_mapping), node, pos=self.pos(start))
            elif self.at("within"):
                self.advance()
                self.expect("[")
                lo = self.parse_int()
                self.expect(",")
                hi = self.parse_int()
                self.expect("]")
                node = A.Window(lo, hi, node, pos=self.pos(start))
            else:
                return node

    def parse_int(self) -> int:
        t = self.tok
        if t.kind != "number" or not t.text.isdigit():
            self.error("expected a non-negative integer")
        self.advance()
        return int(t.text)

    def parse_primary(self):
        t = self.tok
        if self.at("("):
            self.advance()
            node = self.parse_expr()
            self.expect(")")
            return node
        if t.kind != "ident" or t.text in KEYWORDS:
            self.error("expected an event pattern")
        self.advance()
        self.expect("(")
        args = [self.parse_term()]
        while self.at(","):
            self.advance()
            args.append(self.parse_term())
        self.expect(")")
        return A.Atom(t.text, tuple(args), pos=self.pos(t))

    def parse_term(self):
        t = self.tok
        p = self.pos(t)
        if t.kind == "ident":
            self.advance()
            if t.text == "_":
                return A.Wild(pos=p)
            if t.text in ("true", "false"):
                return A.Const(t.text == "true", pos=p)
            if t.text in KEYWORDS:
                self.error("unexpected keyword", t)
            if is_variable(t.text):
                return A.Var(t.text, pos=p)
            return A.Const(t.text, pos=p)
        if t.kind == "string":
            self.advance()
            return A.Const(_unquote(t.text), pos=p)
        if t.kind == "number":
            self.advance()
            return A.Const(_number(t.text), pos=p)
        if self.at("-") and self.peek().kind == "number":
            self.advance()
            return A.Const(-_number(self.advance().text), pos=p)
        self.error("expected a variable or constant")

    # -- predicates and mappings ----------------------------------------------

    def parse_braced(self, item):
        self.expect("{")
        items = [item()]
        while self.at(","):
            self.advance()
            items.append(item())
        self.expect("}")
        return tuple(items)

    def parse_predicate(self) -> A.Compare:
        start = self.tok
        left = self.parse_arith()
        op = self.tok.text if self.tok.kind == "punct" else ""
        if op == "==":
            op = "="
        if op not in A.COMPARE_OPS:
            self.error("expected a comparison operator")
        self.advance()
        right = self.parse_arith()
        return A.Compare(op, left, right, pos=self.pos(start))

    def parse_mapping(self) -> A.Mapping:
        t = self.tok
        if t.kind != "ident" or not is_variable(t.text):
            self.error("mapping target must be a variable")
        self.advance()
        self.expect("=")
        return A.Mapping(t.text, self.parse_arith(), pos=self.pos(t))

    def parse_arith(self):
        node = self.parse_mul()
        while self.at("+") or self.at("-"):
            op = self.advance()
            node = A.BinOp(op.text, node, self.parse_mul(), pos=self.pos(op))
        return node

    def parse_mul(self):
        node = self.parse_neg()
        while self.at("*") or self.at("/"):
            op = self.advance()
            node = A.BinOp(op.text, node, self.parse_neg(), pos=self.pos(op))
        return node

    def parse_neg(self):
        if self.at("-"):
            t = self.advance()
            inner = self.parse_neg()
            if isinstance(inner, A.Const) and isinstance(inner.value, (int, float)) and not isinstance(inner.value, bool):
                return A.Const(-inner.value, pos=self.pos(t))
            return A.BinOp("-", A.Const(0), inner, pos=self.pos(t))
        if self.at("("):
            self.advance()
            node = self.parse_arith()
            self.expect(")")
            return node
        t = self.tok
        if t.kind == "ident" and t.text not in ("true", "false") and t.text in KEYWORDS:
            self.error("unexpected keyword")
        if t.kind == "ident" and t.text == "_":
            self.error("wildcard is not an expression")
        if t.kind in ("ident", "string", "number"):
            return self.parse_term()
        self.error("expected an expression")


def _number(text: str):
    if any(c in text for c in ".eE"):
        return float(text)
    return int(text)


def _unquote(text: str) -> str:
    body = text[1:-1]
    return re.sub(r"\\(.)", r"\1", body)


def parse_source(text: str) -> list[A.Rule]:
    """Parse rule source into raw (un-normalized, unvalidated) rules."""
    return Parser(text).parse_rules()
