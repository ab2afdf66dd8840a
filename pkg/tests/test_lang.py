from __future__ import annotations

import pytest

from probcer.errors import ParseError
from probcer.lang import ast as A
from probcer.lang import desugar_and, parse_rules, pretty, validate_bindings
from probcer.lang.parser import parse_source

TRAVELING = """
traveling(P3, T3) ::=
    (hasBall(P1, T1) and takesStep(P1, T1) and not dribbling(P1, T1)) ;
    (hasBall(P2, T2) and takesStep(P2, T2) and not dribbling(P2, T2)) ;
    (hasBall(P3, T3) and takesStep(P3, T3) and not dribbling(P3, T3))
    where {P1 = P2, P2 = P3} .
"""

AVOID = """
0.9 :: avoid(X, Y, T2) ::= waiting(X, Y, T1) ; crossover_dribble(Y, T2) .
0.7 :: avoid(X, Y, T2) ::= waiting(X, Y, T1) ; running(Y, T2) .
waiting(X, Y, T) ::= a(X, T) and b(Y, T) .
crossover_dribble(Y, T) ::= c(Y, T) .
"""


def _a(t, *names):
    return A.Atom(t, tuple(A.Var(n) for n in names))


class TestParseRules:
    def test_pattern_one(self, assist_rules):
        assert len(assist_rules) == 1
        rule = assist_rules.rules[0]
        assert rule.head.name == "assist"
        assert isinstance(rule.body, A.Seq)
        atoms = A.atoms(rule.body)
        assert [a.event_type for a in atoms] == ["hasBall", "hasBall", "shooting", "ballInNet"]
        sel = [n for n in A.walk(rule.body) if isinstance(n, A.Select)]
        assert len(sel) == 1 and sel[0].preds[0].op == "!="

    def test_empty_source(self):
        assert len(parse_rules("")) == 0
        assert len(parse_rules("% only a comment\n")) == 0

    def test_self_reference_is_cyclic(self):
        with pytest.raises(ParseError) as ei:
            parse_rules("close_m(X, Y, T) ::= close_m(X, Y, T) .")
        assert ei.value.code == "CYCLIC_HIERARCHY"

    def test_indirect_cycle(self):
        with pytest.raises(ParseError) as ei:
            parse_rules("p(T) ::= q(T) .\nq(T) ::= p(T) .")
        assert ei.value.code == "CYCLIC_HIERARCHY"

    def test_function_predicate_is_syntax_error(self):
        with pytest.raises(ParseError) as ei:
            parse_rules("0.6::close_m(X,Y,T) ::= close_m(X,Y,Tp) where {next(T,Tp)}")
        assert ei.value.code == "SYNTAX_ERROR"

    def test_syntax_error_position(self):
        with pytest.raises(ParseError) as ei:
            parse_rules("ok(T) ::= a(T) .\nx(T) ::= a(T) ; ) .")
        assert ei.value.code == "SYNTAX_ERROR"
        assert (ei.value.line, ei.value.col) == (2, 17)

    def test_duplicate_head(self):
        with pytest.raises(ParseError) as ei:
            parse_rules("a2(T) ::= a(T) .\na2(T) ::= a(T) .")
        assert ei.value.code == "DUPLICATE_HEAD_WITHOUT_DISJUNCTION_MARKER"

    def test_combining_group(self):
        rs = parse_rules(AVOID)
        assert rs.groups()["avoid"] == [0, 1]
        assert [r.prob for r in rs.rules_for("avoid")] == [0.9, 0.7]

    def test_alt_heads(self):
        rs = parse_rules("p(X, T2) ::= a(Y, T1) ; b(Y, T2) ;; 0.6 :: emit {X = 1} ;; 0.3 :: emit {X = 2} .")
        assert [h.prob for h in rs.rules[0].alt_heads] == [0.6, 0.3]

    def test_alt_heads_over_one(self):
        with pytest.raises(ParseError):
            parse_rules("p(X, T2) ::= a(Y, T1) ; b(Y, T2) ;; 0.6 :: emit {X = 1} ;; 0.5 :: emit {X = 2} .")

    def test_prefix_with_alt_heads_warns(self):
        rs = parse_rules("0.5 :: p(X, T2) ::= a(Y, T1) ; b(Y, T2) ;; 0.6 :: emit {X = 1} .")
        assert rs.diagnostics and all(d.severity == "warning" for d in rs.diagnostics)

    def test_negating_ce_type_rejected(self):
        with pytest.raises(ParseError) as ei:
            parse_rules("p(T) ::= a(T) .\nq(T2) ::= b(T1) ; not p(N) ; c(T2) .")
        assert ei.value.code == "UNSUPPORTED_NEGATION"


class TestBindings:
    def test_pattern_one_clean(self, assist_rules):
        assert validate_bindings(assist_rules.rules[0]) == []

    def test_unbound_head(self):
        (raw,) = parse_source("x(Z, T) ::= a(X, T) .")
        diags = validate_bindings(raw)
        assert [(d.code, d.var) for d in diags] == [("UNBOUND_VARIABLE", "Z")]

    def test_unbound_raises_with_var(self):
        with pytest.raises(ParseError) as ei:
            parse_rules("x(Z, T) ::= a(X, T) .")
        assert ei.value.code == "UNBOUND_VARIABLE" and ei.value.details["var"] == "Z"

    def test_traveling_negation_bound(self):
        rs = parse_rules(TRAVELING)
        assert validate_bindings(rs.rules[0]) == []

    def test_unbound_in_predicate(self):
        with pytest.raises(ParseError) as ei:
            parse_rules("x(T) ::= a(X, T) where {Q > 1} .")
        assert ei.value.code == "UNBOUND_VARIABLE"


def test_desugar_and_flattens():
    a, b, c = _a("a", "T"), _a("b", "T"), _a("c", "T")
    assert desugar_and(A.And((a, A.And((b, c))))) == A.And((a, b, c))


def test_desugar_seq_flattens():
    a, b, c = _a("a", "T1"), _a("b", "T2"), _a("c", "T3")
    assert desugar_and(A.Seq((A.Seq((a, b)), c))) == A.Seq((a, b, c))


def test_desugar_keeps_duplicate_disjuncts():
    a = _a("a", "T")
    assert desugar_and(A.Or((a, a))) == A.Or((a, a))


@pytest.mark.parametrize("src", [
    TRAVELING,
    AVOID,
    "q(T2) ::= (a(_, T1) ; not b(_, N) ; c(\"Big Word\", T2)) where {T2 - T1 <= 24, 1 < 2} within [0, 30] .",
    "k(T2) ::= (a(X, T1) ; b(_, L)* ; c(X, T2)) within [2, 9] .",
    "p(X, T2) ::= a(Y, T1) ; b(Y, T2) ;; 0.6 :: emit {X = Y * 2} ;; 0.3 :: emit {X = -1.5} .",
    "m(V, T) ::= (a(X, T) | b(X, T)) emit {V = X + 1} .",
])
def test_pretty_round_trip(src):
    rs = parse_rules(src)
    again = parse_rules(pretty(rs))
    assert again.rules == rs.rules
    assert pretty(again) == pretty(rs)
