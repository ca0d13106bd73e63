"""Expression language: AST, parser, printer, evaluation, normalization.

Value semantics follow the table module: numbers are floats where NaN marks
missing/undefined results and infinities are folded to NaN. Division and
modulo by zero yield NaN; comparisons involving NaN are false; ternary
branches and logical operators are lazy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import EvalError, ParseError
from .lexer import ATTR, EOF, IDENT, NUM, OP, STR, Token, TokenStream, describe, tokenize
from .table import DomainStats

NAN = math.nan

LINEAR, LOG, RAW = "linear", "log", "raw"
GLOBAL, LOCAL = "global", "local"

FUNCTIONS = {
    "sqrt": 1,
    "floor": 1,
    "ceil": 1,
    "abs": 1,
    "log": 1,
    "min": None,  # variadic, >= 2
    "max": None,
    "split": 2,
}
AGG_FUNCTIONS = {"Sum", "Average"}


# --- AST ---------------------------------------------------------------


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Text(Expr):
    value: str


@dataclass(frozen=True)
class AttrRef(Expr):
    name: str


@dataclass(frozen=True)
class IdentRef(Expr):
    name: str


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    operand: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Ternary(Expr):
    cond: Expr
    then: Expr
    other: Expr


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class ListLit(Expr):
    items: tuple[Expr, ...]


@dataclass(frozen=True)
class Index(Expr):
    seq: Expr
    idx: Expr


@dataclass(frozen=True)
class Norm(Expr):
    attr: AttrRef
    mapping: str = LINEAR
    scope: str = GLOBAL


# --- Parser ------------------------------------------------------------

_COMPARE = {"<", ">", "<=", ">=", "==", "!="}


def parse_expr(text: str) -> Expr:
    """Parse a standalone expression; the whole text must be consumed."""
    ts = TokenStream(tokenize(text))
    e = parse_expression(ts)
    t = ts.cur
    if t.kind != EOF:
        raise ParseError(f"unexpected {describe(t)} after expression", t.line, t.col)
    return e


def parse_expression(ts: TokenStream) -> Expr:
    return _ternary(ts)


def _ternary(ts: TokenStream) -> Expr:
    cond = _logical(ts)
    if ts.eat_op("?"):
        then = _ternary(ts)
        ts.expect_op(":")
        other = _ternary(ts)
        return Ternary(cond, then, other)
    return cond


def _logical(ts: TokenStream) -> Expr:
    e = _comparison(ts)
    while ts.at_op("&&", "||"):
        op = ts.advance().value
        e = Binary(op, e, _comparison(ts))
    return e


def _comparison(ts: TokenStream) -> Expr:
    e = _additive(ts)
    while ts.cur.kind == OP and ts.cur.value in _COMPARE:
        op = ts.advance().value
        e = Binary(op, e, _additive(ts))
    return e


def _additive(ts: TokenStream) -> Expr:
    e = _multiplicative(ts)
    while ts.at_op("+", "-"):
        op = ts.advance().value
        e = Binary(op, e, _multiplicative(ts))
    return e


def _multiplicative(ts: TokenStream) -> Expr:
    e = _unary(ts)
    while ts.at_op("*", "/", "%"):
        op = ts.advance().value
        e = Binary(op, e, _unary(ts))
    return e


def _unary(ts: TokenStream) -> Expr:
    if ts.at_op("-", "!"):
        op = ts.advance().value
        return Unary(op, _unary(ts))
    return _postfix(ts)


def _postfix(ts: TokenStream) -> Expr:
    e = _primary(ts)
    while ts.at_op("["):
        ts.advance()
        idx = parse_expression(ts)
        ts.expect_op("]")
        e = Index(e, idx)
    return e


def _primary(ts: TokenStream) -> Expr:
    t = ts.cur
    if t.kind == NUM:
        ts.advance()
        return Num(t.value)
    if t.kind == STR:
        ts.advance()
        return Text(t.value)
    if t.kind == ATTR:
        ts.advance()
        return AttrRef(t.value)
    if ts.at_op("("):
        ts.advance()
        e = parse_expression(ts)
        ts.expect_op(")")
        return e
    if ts.at_op("{"):
        ts.advance()
        items = []
        if not ts.at_op("}"):
            items.append(parse_expression(ts))
            while ts.eat_op(","):
                items.append(parse_expression(ts))
        ts.expect_op("}")
        return ListLit(tuple(items))
    if t.kind == IDENT:
        name = t.value
        ts.advance()
        if ts.at_op("("):
            return _call(ts, name, t)
        return IdentRef(name)
    raise ParseError(f"unexpected {describe(t)}", t.line, t.col)


def _call(ts: TokenStream, name: str, tok: Token) -> Expr:
    ts.expect_op("(")
    args = []
    if not ts.at_op(")"):
        args.append(parse_expression(ts))
        while ts.eat_op(","):
            args.append(parse_expression(ts))
    ts.expect_op(")")
    if name == "norm":
        return _norm_call(args, tok)
    if name in AGG_FUNCTIONS:
        if len(args) != 1:
            raise ParseError(f"{name}() takes exactly 1 argument", tok.line, tok.col)
        return Call(name, tuple(args))
    arity = FUNCTIONS.get(name)
    if name not in FUNCTIONS:
        raise ParseError(f"unknown function {name!r}", tok.line, tok.col)
    if arity is None:
        if len(args) < 2:
            raise ParseError(f"{name}() takes at least 2 arguments", tok.line, tok.col)
    elif len(args) != arity:
        raise ParseError(f"{name}() takes exactly {arity} argument(s)", tok.line, tok.col)
    return Call(name, tuple(args))


def _norm_call(args: list[Expr], tok: Token) -> Norm:
    if not args or not isinstance(args[0], AttrRef):
        raise ParseError("norm() requires an attribute reference first", tok.line, tok.col)
    mapping, scope = LINEAR, GLOBAL
    for extra in args[1:]:
        if not isinstance(extra, IdentRef):
            raise ParseError("norm() options must be bare words", tok.line, tok.col)
        word = extra.name
        if word in (LINEAR, LOG, RAW):
            mapping = word
        elif word in (GLOBAL, LOCAL):
            scope = word
        else:
            raise ParseError(f"unknown norm() option {word!r}", tok.line, tok.col)
    if len(args) > 3:
        raise ParseError("norm() takes at most 3 arguments", tok.line, tok.col)
    return Norm(args[0], mapping, scope)


# --- Printer -----------------------------------------------------------

_PREC = {
    "ternary": 1,
    "||": 2, "&&": 2,
    "<": 3, ">": 3, "<=": 3, ">=": 3, "==": 3, "!=": 3,
    "+": 4, "-": 4,
    "*": 5, "/": 5, "%": 5,
    "unary": 6,
    "postfix": 7,
}


def fmt_number(v: float) -> str:
    if v != v:
        return "nan"
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def print_expr(e: Expr) -> str:
    return _pr(e, 0)


def _pr(e: Expr, parent_prec: int) -> str:
    if isinstance(e, Num):
        s = fmt_number(e.value)
        prec = 7 if e.value >= 0 else 6
    elif isinstance(e, Text):
        s = '"' + e.value.replace("\\", "\\\\").replace('"', '\\"') + '"'
        prec = 7
    elif isinstance(e, AttrRef):
        s = f"${e.name}" if e.name.isidentifier() else f'$"{e.name}"'
        prec = 7
    elif isinstance(e, IdentRef):
        s, prec = e.name, 7
    elif isinstance(e, Unary):
        s = e.op + _pr(e.operand, _PREC["unary"])
        prec = _PREC["unary"]
    elif isinstance(e, Binary):
        prec = _PREC[e.op]
        s = f"{_pr(e.left, prec)} {e.op} {_pr(e.right, prec + 1)}"
    elif isinstance(e, Ternary):
        prec = _PREC["ternary"]
        s = f"{_pr(e.cond, prec + 1)} ? {_pr(e.then, prec)} : {_pr(e.other, prec)}"
    elif isinstance(e, Call):
        s = f"{e.fn}({', '.join(_pr(a, 0) for a in e.args)})"
        prec = 7
    elif isinstance(e, ListLit):
        s = "{ " + ", ".join(_pr(a, 0) for a in e.items) + " }" if e.items else "{}"
        prec = 7
    elif isinstance(e, Index):
        s = f"{_pr(e.seq, _PREC['postfix'])}[{_pr(e.idx, 0)}]"
        prec = _PREC["postfix"]
    elif isinstance(e, Norm):
        parts = [_pr(e.attr, 0)]
        if (e.mapping, e.scope) != (LINEAR, GLOBAL):
            parts.append(e.mapping)
            if e.scope != GLOBAL:
                parts.append(e.scope)
        s = f"norm({', '.join(parts)})"
        prec = 7
    else:  # pragma: no cover
        raise TypeError(f"unknown expr node {e!r}")
    if prec < parent_prec:
        return f"({s})"
    return s


# --- Reference analysis -------------------------------------------------


def free_refs(e: Expr) -> tuple[set[str], set[str]]:
    """Exact sets of attribute names and identifier names in the tree."""
    attrs: set[str] = set()
    idents: set[str] = set()
    _walk_refs(e, attrs, idents)
    return attrs, idents


def _walk_refs(e: Expr, attrs: set, idents: set):
    if isinstance(e, AttrRef):
        attrs.add(e.name)
    elif isinstance(e, IdentRef):
        idents.add(e.name)
    elif isinstance(e, Unary):
        _walk_refs(e.operand, attrs, idents)
    elif isinstance(e, Binary):
        _walk_refs(e.left, attrs, idents)
        _walk_refs(e.right, attrs, idents)
    elif isinstance(e, Ternary):
        _walk_refs(e.cond, attrs, idents)
        _walk_refs(e.then, attrs, idents)
        _walk_refs(e.other, attrs, idents)
    elif isinstance(e, Call):
        for a in e.args:
            _walk_refs(a, attrs, idents)
    elif isinstance(e, ListLit):
        for a in e.items:
            _walk_refs(a, attrs, idents)
    elif isinstance(e, Index):
        _walk_refs(e.seq, attrs, idents)
        _walk_refs(e.idx, attrs, idents)
    elif isinstance(e, Norm):
        attrs.add(e.attr.name)


def uses_aggregates(e: Expr) -> bool:
    """True when the tree contains Sum()/Average() aggregate calls."""
    if isinstance(e, Call):
        if e.fn in AGG_FUNCTIONS:
            return True
        return any(uses_aggregates(a) for a in e.args)
    if isinstance(e, Unary):
        return uses_aggregates(e.operand)
    if isinstance(e, Binary):
        return uses_aggregates(e.left) or uses_aggregates(e.right)
    if isinstance(e, Ternary):
        return any(uses_aggregates(x) for x in (e.cond, e.then, e.other))
    if isinstance(e, ListLit):
        return any(uses_aggregates(a) for a in e.items)
    if isinstance(e, Index):
        return uses_aggregates(e.seq) or uses_aggregates(e.idx)
    return False


def collect_aggregates(e: Expr) -> list[Call]:
    """All Sum()/Average() call sites in the tree, in source order."""
    out: list[Call] = []

    def walk(x):
        if isinstance(x, Call):
            if x.fn in AGG_FUNCTIONS:
                out.append(x)
            for a in x.args:
                walk(a)
        elif isinstance(x, Unary):
            walk(x.operand)
        elif isinstance(x, Binary):
            walk(x.left)
            walk(x.right)
        elif isinstance(x, Ternary):
            walk(x.cond)
            walk(x.then)
            walk(x.other)
        elif isinstance(x, ListLit):
            for a in x.items:
                walk(a)
        elif isinstance(x, Index):
            walk(x.seq)
            walk(x.idx)

    walk(e)
    return out


def norm_sites(e: Expr) -> list[Norm]:
    out = []
    _collect_norms(e, out)
    return out


def _collect_norms(e: Expr, out: list):
    if isinstance(e, Norm):
        out.append(e)
    elif isinstance(e, Unary):
        _collect_norms(e.operand, out)
    elif isinstance(e, Binary):
        _collect_norms(e.left, out)
        _collect_norms(e.right, out)
    elif isinstance(e, Ternary):
        for x in (e.cond, e.then, e.other):
            _collect_norms(x, out)
    elif isinstance(e, (Call, ListLit)):
        for a in (e.args if isinstance(e, Call) else e.items):
            _collect_norms(a, out)
    elif isinstance(e, Index):
        _collect_norms(e.seq, out)
        _collect_norms(e.idx, out)


# --- Normalization ------------------------------------------------------


def normalize(value: float, stats: DomainStats, mapping: str = LINEAR) -> float:
    """Map a value into [0,1] with the attribute's domain stats.

    Linear: (v-min)/(max-min); Log: ratio of log offsets (domain must be
    positive); Raw: identity. Linear/Log results are clamped to [0,1] and a
    singleton domain sends every value to 0.5.
    """
    if mapping == RAW:
        return value
    if value is None or value != value:
        return NAN
    lo, hi = stats.min, stats.max
    if mapping == LOG:
        if lo <= 0 or value <= 0:
            return NAN
        if lo == hi:
            return 0.5
        t = (math.log(value) - math.log(lo)) / (math.log(hi) - math.log(lo))
    else:
        if lo == hi:
            return 0.5
        t = (value - lo) / (hi - lo)
    if t < 0.0:
        return 0.0
    if t > 1.0:
        return 1.0
    return t


# --- Evaluation ---------------------------------------------------------


class Context:
    """Binding environment for expression evaluation.

    Name resolution order: variables, then accumulators, then builtins.
    ``stats`` is a callable (attr, scope) -> DomainStats for norm();
    ``aggregate`` is a callable (fn, expr, compiled) -> value installed by
    the engine for Sum()/Average() over the current unit.
    """

    __slots__ = ("row_index", "columns", "variables", "accumulators",
                 "builtins", "stats", "aggregate", "unit_index")

    def __init__(self, row_index=None, columns=None, variables=None,
                 accumulators=None, builtins=None, stats=None, aggregate=None):
        self.row_index = row_index
        self.columns = columns or {}
        self.variables = variables if variables is not None else {}
        self.accumulators = accumulators if accumulators is not None else {}
        self.builtins = builtins if builtins is not None else {}
        self.stats = stats
        self.aggregate = aggregate
        self.unit_index = -1  # engine bookkeeping: current output unit


def _tonum(v):
    t = type(v)
    if t is float:
        return v
    if t is bool:
        return 1.0 if v else 0.0
    if t is int:
        return float(v)
    return None


def truthy(v) -> bool:
    t = type(v)
    if t is bool:
        return v
    if t is float or t is int:
        return v == v and v != 0
    if v is None:
        return False
    return len(v) > 0


def _guard(v: float) -> float:
    # fold infinities to NaN; never construct an infinite number
    if v == math.inf or v == -math.inf:
        return NAN
    return v


def values_equal(a, b) -> bool:
    na, nb = _tonum(a), _tonum(b)
    if na is not None and nb is not None:
        return na == nb
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    if a is None and b is None:
        return True
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(values_equal(x, y) for x, y in zip(a, b))
    return False


def compare(op: str, a, b) -> bool:
    if op == "==":
        return values_equal(a, b)
    if op == "!=":
        return not values_equal(a, b)
    na, nb = _tonum(a), _tonum(b)
    if na is not None and nb is not None:
        if na != na or nb != nb:
            return False
        x, y = na, nb
    elif isinstance(a, str) and isinstance(b, str):
        x, y = a, b
    else:
        return False
    if op == "<":
        return x < y
    if op == ">":
        return x > y
    if op == "<=":
        return x <= y
    return x >= y


def _fn_sqrt(x):
    v = _tonum(x)
    if v is None or v != v or v < 0:
        return NAN
    return math.sqrt(v)


def _fn_floor(x):
    v = _tonum(x)
    if v is None or v != v:
        return NAN
    return float(math.floor(v))


def _fn_ceil(x):
    v = _tonum(x)
    if v is None or v != v:
        return NAN
    return float(math.ceil(v))


def _fn_abs(x):
    v = _tonum(x)
    if v is None:
        return NAN
    return abs(v)


def _fn_log(x):
    v = _tonum(x)
    if v is None or v != v or v <= 0:
        return NAN
    return _guard(math.log(v))


def _fn_minmax(pick, args):
    best = None
    for a in args:
        v = _tonum(a)
        if v is None or v != v:
            return NAN
        if best is None or pick(v, best):
            best = v
    return best if best is not None else NAN


_SIMPLE_FNS = {
    "sqrt": _fn_sqrt,
    "floor": _fn_floor,
    "ceil": _fn_ceil,
    "abs": _fn_abs,
    "log": _fn_log,
}


def compile_expr(e: Expr):
    """Compile an expression tree to a closure of one Context argument.

    Compilation is pure; the closure re-reads everything from the context,
    so one compiled expression is reusable across scopes and renders.
    """
    if isinstance(e, Num):
        v = e.value
        return lambda ctx: v
    if isinstance(e, Text):
        s = e.value
        return lambda ctx: s
    if isinstance(e, AttrRef):
        name = e.name

        def attr_fn(ctx, name=name):
            i = ctx.row_index
            if i is None:
                raise EvalError(f"attribute ${name} referenced without a current row")
            try:
                return ctx.columns[name][i]
            except KeyError:
                raise EvalError(f"unknown attribute ${name}") from None

        return attr_fn
    if isinstance(e, IdentRef):
        name = e.name

        def ident_fn(ctx, name=name):
            v = ctx.variables
            if name in v:
                return v[name]
            a = ctx.accumulators
            if name in a:
                return a[name]
            b = ctx.builtins
            if name in b:
                return b[name]
            raise EvalError(f"unresolved identifier {name!r}")

        return ident_fn
    if isinstance(e, Unary):
        f = compile_expr(e.operand)
        if e.op == "-":
            def neg_fn(ctx, f=f):
                v = _tonum(f(ctx))
                return NAN if v is None else -v
            return neg_fn

        def not_fn(ctx, f=f):
            return not truthy(f(ctx))

        return not_fn
    if isinstance(e, Binary):
        return _compile_binary(e)
    if isinstance(e, Ternary):
        c = compile_expr(e.cond)
        t = compile_expr(e.then)
        o = compile_expr(e.other)

        def ternary_fn(ctx, c=c, t=t, o=o):
            return t(ctx) if truthy(c(ctx)) else o(ctx)

        return ternary_fn
    if isinstance(e, Call):
        return _compile_call(e)
    if isinstance(e, ListLit):
        fns = tuple(compile_expr(a) for a in e.items)

        def list_fn(ctx, fns=fns):
            return [f(ctx) for f in fns]

        return list_fn
    if isinstance(e, Index):
        seq_f = compile_expr(e.seq)
        idx_f = compile_expr(e.idx)

        def index_fn(ctx, seq_f=seq_f, idx_f=idx_f):
            seq = seq_f(ctx)
            if not isinstance(seq, list):
                raise EvalError("indexing a non-list value")
            iv = _tonum(idx_f(ctx))
            if iv is None or iv != iv:
                return None
            i = int(iv)
            if 0 <= i < len(seq):
                return seq[i]
            return None

        return index_fn
    if isinstance(e, Norm):
        name = e.attr.name
        mapping = e.mapping
        scope = e.scope

        def norm_fn(ctx, name=name, mapping=mapping, scope=scope):
            i = ctx.row_index
            if i is None:
                raise EvalError(f"attribute ${name} referenced without a current row")
            v = ctx.columns[name][i]
            if mapping == RAW:
                return NAN if v is None else v
            if ctx.stats is None:
                raise EvalError("norm() is unavailable: no domain stats provider")
            return normalize(v if v is not None else NAN, ctx.stats(name, scope), mapping)

        return norm_fn
    raise TypeError(f"unknown expr node {e!r}")  # pragma: no cover


def _compile_binary(e: Binary):
    op = e.op
    l = compile_expr(e.left)
    r = compile_expr(e.right)
    if op == "&&":
        def and_fn(ctx, l=l, r=r):
            return truthy(l(ctx)) and truthy(r(ctx))
        return and_fn
    if op == "||":
        def or_fn(ctx, l=l, r=r):
            return truthy(l(ctx)) or truthy(r(ctx))
        return or_fn
    if op in _COMPARE:
        def cmp_fn(ctx, op=op, l=l, r=r):
            return compare(op, l(ctx), r(ctx))
        return cmp_fn
    if op == "+":
        def add_fn(ctx, l=l, r=r):
            a = _tonum(l(ctx))
            b = _tonum(r(ctx))
            if a is None or b is None:
                return NAN
            return _guard(a + b)
        return add_fn
    if op == "-":
        def sub_fn(ctx, l=l, r=r):
            a = _tonum(l(ctx))
            b = _tonum(r(ctx))
            if a is None or b is None:
                return NAN
            return _guard(a - b)
        return sub_fn
    if op == "*":
        def mul_fn(ctx, l=l, r=r):
            a = _tonum(l(ctx))
            b = _tonum(r(ctx))
            if a is None or b is None:
                return NAN
            return _guard(a * b)
        return mul_fn
    if op == "/":
        def div_fn(ctx, l=l, r=r):
            a = _tonum(l(ctx))
            b = _tonum(r(ctx))
            if a is None or b is None or b == 0.0:
                return NAN
            return _guard(a / b)
        return div_fn
    if op == "%":
        def mod_fn(ctx, l=l, r=r):
            a = _tonum(l(ctx))
            b = _tonum(r(ctx))
            if a is None or b is None or b == 0.0 or a != a or b != b:
                return NAN
            return _guard(a % b)
        return mod_fn
    raise TypeError(f"unknown operator {op!r}")  # pragma: no cover


def _compile_call(e: Call):
    if e.fn in AGG_FUNCTIONS:
        kind = e.fn
        arg = e.args[0]
        arg_f = compile_expr(arg)

        def agg_fn(ctx, kind=kind, arg=arg, arg_f=arg_f):
            if ctx.aggregate is None:
                raise EvalError(f"{kind}() is only available while rendering")
            return ctx.aggregate(kind, arg, arg_f)

        return agg_fn
    if e.fn == "split":
        tf = compile_expr(e.args[0])
        sf = compile_expr(e.args[1])

        def split_fn(ctx, tf=tf, sf=sf):
            t = tf(ctx)
            s = sf(ctx)
            if not isinstance(t, str) or not isinstance(s, str) or not s:
                return None
            return t.split(s)

        return split_fn
    if e.fn in ("min", "max"):
        fns = tuple(compile_expr(a) for a in e.args)
        pick = (lambda v, b: v < b) if e.fn == "min" else (lambda v, b: v > b)

        def minmax_fn(ctx, fns=fns, pick=pick):
            return _fn_minmax(pick, [f(ctx) for f in fns])

        return minmax_fn
    f = _SIMPLE_FNS[e.fn]
    a = compile_expr(e.args[0])

    def call_fn(ctx, f=f, a=a):
        return f(a(ctx))

    return call_fn


def evaluate(e: Expr, ctx: Context):
    """Evaluate an expression against a context (compile-and-run)."""
    return compile_expr(e)(ctx)
