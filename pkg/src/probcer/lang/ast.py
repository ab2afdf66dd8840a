"""Pattern abstract syntax.

Nodes are frozen dataclasses so structurally equal patterns compare equal;
source positions and atom numbering are excluded from equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Union

from ..errors import ProbCERError
from ..events import values_equal

Pos = "tuple[int, int] | None"


def _pos():
    return field(default=None, compare=False, repr=False)


# -- terms and expressions ---------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str
    pos: Any = _pos()


@dataclass(frozen=True)
class Const:
    value: Any
    pos: Any = _pos()

    def __eq__(self, other):
        # 1 and True must not be the same constant
        return isinstance(other, Const) and type(self.value) is type(other.value) and self.value == other.value

    def __hash__(self):
        return hash((type(self.value), self.value))


@dataclass(frozen=True)
class Wild:
    pos: Any = _pos()


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"
    pos: Any = _pos()


Expr = Union[Var, Const, BinOp]
Term = Union[Var, Const, Wild]

COMPARE_OPS = ("=", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class Compare:
    op: str
    left: Expr
    right: Expr
    pos: Any = _pos()


Predicate = Compare


@dataclass(frozen=True)
class Mapping:
    name: str
    expr: Expr
    pos: Any = _pos()


def expr_vars(e) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, BinOp):
        return expr_vars(e.left) | expr_vars(e.right)
    if isinstance(e, Compare):
        return expr_vars(e.left) | expr_vars(e.right)
    if isinstance(e, Mapping):
        return expr_vars(e.expr)
    return set()


# -- pattern nodes -------------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    """Reference to an event type; the last argument is the time term."""

    event_type: str
    args: tuple[Term, ...]
    pos: Any = _pos()
    aid: int = field(default=-1, compare=False)

    @property
    def attr_args(self) -> tuple[Term, ...]:
        return self.args[:-1]

    @property
    def time_arg(self) -> Term:
        return self.args[-1]

    def variables(self) -> set[str]:
        return {a.name for a in self.args if isinstance(a, Var)}


@dataclass(frozen=True)
class Seq:
    children: tuple["Node", ...]
    pos: Any = _pos()


@dataclass(frozen=True)
class Or:
    children: tuple["Node", ...]
    pos: Any = _pos()


@dataclass(frozen=True)
class And:
    children: tuple["Node", ...]
    pos: Any = _pos()


@dataclass(frozen=True)
class Star:
    child: "Node"
    pos: Any = _pos()


@dataclass(frozen=True)
class Not:
    child: "Node"
    pos: Any = _pos()


@dataclass(frozen=True)
class Select:
    preds: tuple[Compare, ...]
    child: "Node"
    pos: Any = _pos()


@dataclass(frozen=True)
class Produce:
    maps: tuple[Mapping, ...]
    child: "Node"
    pos: Any = _pos()


@dataclass(frozen=True)
class Window:
    lo: int
    hi: int
    child: "Node"
    pos: Any = _pos()

    @property
    def relative(self) -> bool:
        return self.lo == 0


Node = Union[Atom, Seq, Or, And, Star, Not, Select, Produce, Window]
NARY = (Seq, Or, And)
UNARY = (Star, Not, Select, Produce, Window)


def children(node) -> tuple:
    if isinstance(node, NARY):
        return node.children
    if isinstance(node, UNARY):
        return (node.child,)
    return ()


def walk(node) -> Iterator:
    yield node
    for c in children(node):
        yield from walk(c)


def atoms(node) -> list[Atom]:
    return [n for n in walk(node) if isinstance(n, Atom)]


def map_children(node, fn: Callable):
    """Rebuild ``node`` with ``fn`` applied to each child."""
    if isinstance(node, NARY):
        return type(node)(tuple(fn(c) for c in node.children), pos=node.pos)
    if isinstance(node, Star):
        return Star(fn(node.child), pos=node.pos)
    if isinstance(node, Not):
        return Not(fn(node.child), pos=node.pos)
    if isinstance(node, Select):
        return Select(node.preds, fn(node.child), pos=node.pos)
    if isinstance(node, Produce):
        return Produce(node.maps, fn(node.child), pos=node.pos)
    if isinstance(node, Window):
        return Window(node.lo, node.hi, fn(node.child), pos=node.pos)
    return node


# -- rules --------------------------------------------------------------------

@dataclass(frozen=True)
class Head:
    name: str
    vars: tuple[str, ...]
    pos: Any = _pos()

    @property
    def time_var(self) -> str:
        return self.vars[-1]

    @property
    def attr_vars(self) -> tuple[str, ...]:
        return self.vars[:-1]


@dataclass(frozen=True)
class AltHead:
    prob: float
    maps: tuple[Mapping, ...]
    pos: Any = _pos()


@dataclass(frozen=True)
class Rule:
    head: Head
    body: Node
    prob: float = 1.0
    alt_heads: tuple[AltHead, ...] = ()
    prefixed: bool = field(default=False, compare=False)
    pos: Any = _pos()
    index: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    severity: str = "error"
    var: str | None = None
    line: int | None = None
    col: int | None = None


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...] = ()
    deps: Any = field(default_factory=dict, compare=False)
    diagnostics: tuple[Diagnostic, ...] = field(default=(), compare=False)

    @property
    def ce_types(self) -> set[str]:
        return {r.head.name for r in self.rules}

    def rules_for(self, ce_type: str) -> list[Rule]:
        return [r for r in self.rules if r.head.name == ce_type]

    def groups(self) -> dict[str, list[int]]:
        """CE type -> indices of its defining rules (a combining group when > 1)."""
        out: dict[str, list[int]] = {}
        for i, r in enumerate(self.rules):
            out.setdefault(r.head.name, []).append(i)
        return out

    def __len__(self):
        return len(self.rules)


# -- expression evaluation -------------------------------------------------------

class EvalTypeError(ProbCERError):
    exit_code = 3


def _num(v, what):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise EvalTypeError("TYPE_MISMATCH", f"{what} needs numeric operands, got {v!r}")
    return v


def _arith(op, a, b):
    _num(a, op)
    _num(b, op)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if b == 0:
        raise EvalTypeError("TYPE_MISMATCH", "division by zero")
    r = a / b
    return int(r) if isinstance(a, int) and isinstance(b, int) and r == int(r) else r


def _ordered(op, a, b):
    ta = "str" if isinstance(a, str) else ("bool" if isinstance(a, bool) else "num")
    tb = "str" if isinstance(b, str) else ("bool" if isinstance(b, bool) else "num")
    if ta != tb or ta == "bool":
        raise EvalTypeError("TYPE_MISMATCH", f"cannot order {a!r} and {b!r}")
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def compare_values(op: str, a, b) -> bool:
    if op == "=":
        return values_equal(a, b)
    if op == "!=":
        return not values_equal(a, b)
    return _ordered(op, a, b)


def eval_expr(e, env):
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Const):
        return e.value
    return _arith(e.op, eval_expr(e.left, env), eval_expr(e.right, env))


def eval_pred(p: Compare, env) -> bool:
    return compare_values(p.op, eval_expr(p.left, env), eval_expr(p.right, env))


def compile_expr(e) -> Callable:
    if isinstance(e, Var):
        name = e.name
        return lambda env: env[name]
    if isinstance(e, Const):
        value = e.value
        return lambda env: value
    lf, rf, op = compile_expr(e.left), compile_expr(e.right), e.op
    return lambda env: _arith(op, lf(env), rf(env))


def compile_pred(p: Compare) -> Callable[[dict], bool]:
    lf, rf, op = compile_expr(p.left), compile_expr(p.right), p.op
    if op == "=":
        return lambda env: values_equal(lf(env), rf(env))
    if op == "!=":
        return lambda env: not values_equal(lf(env), rf(env))
    return lambda env: _ordered(op, lf(env), rf(env))
