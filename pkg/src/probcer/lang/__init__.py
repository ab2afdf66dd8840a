"""Rule language: AST, parser, printer and static validation."""

from .ast import RuleSet, Rule, Diagnostic
from .parser import parse_source
from .printer import pretty, pretty_rule, pretty_pattern
from .validate import desugar_and, parse_rules, validate_bindings

__all__ = [
    "RuleSet", "Rule", "Diagnostic", "parse_source", "parse_rules", "pretty",
    "pretty_rule", "pretty_pattern", "desugar_and", "validate_bindings",
]
