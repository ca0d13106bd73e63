"""The visualization DSL: concrete block syntax, operator-tree model,
validation against a table schema, and the built-in macro gallery.

A program is one ``Visualization { ... }`` block whose items are dataflow
operator nodes: Partition, Sort/Order, Filter, Variable, Accumulator,
graphic primitives (with nested primitives, Paint/Font decorations,
RepeatGeometry and per-path Children overrides) and Margin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import expr as X
from .errors import Diagnostic, ParseError, VizError
from .lexer import EOF, IDENT, NUM, OP, STR, TokenStream, describe, tokenize
from .table import AttrType, DataTable, Schema

AUTO = "auto"
START, CENTER = "start", "center"

NAMED_COLORS = {
    "black": (0.0, 0.0, 0.0),
    "white": (1.0, 1.0, 1.0),
    "blue": (0.0, 0.0, 1.0),
    "red": (1.0, 0.0, 0.0),
    "gray": (0.5, 0.5, 0.5),
    "green": (0.0, 0.5, 0.0),
}

PRIMITIVE_PARAMS = {
    "FillRectangle": ("X", "Y", "Width", "Height"),
    "FillEllipse": ("X", "Y", "Width", "Height"),
    "Line": ("X1", "Y1", "X2", "Y2"),
    "Polyline": ("points",),
    "DrawString": ("text", "X", "Y"),
}

NODE_KEYWORDS = {
    "Partition", "SquarifiedTreemap", "Sort", "Order", "Filter",
    "Variable", "LocalVariable", "Accumulator", "Paint", "Font",
    "Children", "RepeatGeometry", "Margin",
} | set(PRIMITIVE_PARAMS)

BUILTIN_NAMES = {"Length", "depth", "childCount", "recordCount", "rowIndex"}

DEFAULT_MAX_DEPTH = 16


# --- Node model ----------------------------------------------------------


@dataclass(eq=True)
class ParamSpec:
    expr: X.Expr
    mapping: str = AUTO  # auto | linear | log | raw (auto resolves at eval)
    anchor: str = START


@dataclass(eq=True)
class Node:
    pass


@dataclass(eq=True)
class Partition(Node):
    key: X.Expr
    body: list = field(default_factory=list)
    max_depth: int = DEFAULT_MAX_DEPTH
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(eq=True)
class SquarifiedTreemap(Node):
    key: X.Expr
    weight: X.Expr
    body: list = field(default_factory=list)
    max_depth: int = DEFAULT_MAX_DEPTH
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(eq=True)
class Sort(Node):
    key: X.Expr
    accums: list = field(default_factory=list)
    descending: bool = False
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(eq=True)
class Order(Node):
    accums: list = field(default_factory=list)
    result: X.Expr = None
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(eq=True)
class Filter(Node):
    predicate: X.Expr
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(eq=True)
class Variable(Node):
    name: str
    init: X.Expr
    iter: X.Expr
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(eq=True)
class Accumulator(Node):
    name: str
    init: X.Expr = None
    iter: X.Expr = None
    end: X.Expr = None
    const: X.Expr = None  # expression-only form: a constant of the scope
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(eq=True)
class Paint(Node):
    hue: X.Expr = None
    saturation: X.Expr = None
    value: X.Expr = None
    color: tuple = None  # named-color rgb triple
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(eq=True)
class Font(Node):
    size: X.Expr = None
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(eq=True)
class Children(Node):
    cases: list = field(default_factory=list)  # (pattern tuple, node list)
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(eq=True)
class RepeatGeometry(Node):
    count: X.Expr = None
    index: str = "rep"
    body: list = field(default_factory=list)
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(eq=True)
class Margin(Node):
    fraction: X.Expr = None
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(eq=True)
class Primitive(Node):
    kind: str
    params: dict = field(default_factory=dict)  # name -> ParamSpec
    points: list = field(default_factory=list)  # Polyline: flat ParamSpec list
    paint: Paint = None
    font: Font = None
    nested: list = field(default_factory=list)  # nested primitives / repeats
    children: Children = None
    centered: bool = False
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(eq=True)
class VizProgram:
    body: list = field(default_factory=list)
    source_text: str = field(default="", compare=False)


# --- Parser --------------------------------------------------------------


def parse_program(text: str) -> VizProgram:
    """Parse DSL text into an operator tree.

    Blocks follow ``Keyword { field = expr; ...nested blocks... }`` with the
    assignment sugar ``Partition = expr { ... }`` / ``Sort = expr;``;
    ``//`` comments run to end of line.
    """
    ts = TokenStream(tokenize(text))
    t = ts.cur
    if not (t.kind == IDENT and t.value == "Visualization"):
        raise ParseError(f"expected 'Visualization', got {describe(t)}", t.line, t.col)
    ts.advance()
    body = _parse_block_items(ts)
    t = ts.cur
    if t.kind != EOF:
        raise ParseError(f"unexpected {describe(t)} after program", t.line, t.col)
    return VizProgram(body=body, source_text=text)


def _parse_block_items(ts: TokenStream) -> list:
    ts.expect_op("{")
    items: list[Node] = []
    while not ts.at_op("}"):
        items.extend(_parse_item(ts))
    ts.expect_op("}")
    return items


def _parse_item(ts: TokenStream) -> list:
    t = ts.cur
    if t.kind != IDENT:
        raise ParseError(f"expected an operator keyword, got {describe(t)}", t.line, t.col)
    kw = t.value
    if kw not in NODE_KEYWORDS:
        raise ParseError(f"unknown keyword {kw!r}", t.line, t.col)
    pos = (t.line, t.col)
    ts.advance()
    if kw in PRIMITIVE_PARAMS:
        return [_parse_primitive(ts, kw, pos)]
    if kw == "Partition":
        return [_parse_partition(ts, pos)]
    if kw == "SquarifiedTreemap":
        return [_parse_squarified(ts, pos)]
    if kw == "Sort":
        return [_parse_sort(ts, pos)]
    if kw == "Order":
        return [_parse_order(ts, pos)]
    if kw == "Filter":
        ts.expect_op("=")
        e = X.parse_expression(ts)
        ts.expect_op(";")
        return [Filter(e, pos=pos)]
    if kw in ("Variable", "LocalVariable"):
        return _parse_state_block(ts, Variable)
    if kw == "Accumulator":
        return _parse_state_block(ts, Accumulator)
    if kw == "Paint":
        return [_parse_paint(ts, pos)]
    if kw == "Font":
        return [_parse_font(ts, pos)]
    if kw == "Children":
        return [_parse_children(ts, pos)]
    if kw == "RepeatGeometry":
        return [_parse_repeat(ts, pos)]
    if kw == "Margin":
        ts.expect_op("=")
        e = X.parse_expression(ts)
        ts.expect_op(";")
        return [Margin(e, pos=pos)]
    raise ParseError(f"unknown keyword {kw!r}", *pos)  # pragma: no cover


def _parse_partition(ts: TokenStream, pos) -> Partition:
    key = None
    max_depth = DEFAULT_MAX_DEPTH
    if ts.eat_op("="):
        key = X.parse_expression(ts)
    ts.expect_op("{")
    body: list[Node] = []
    while not ts.at_op("}"):
        t = ts.cur
        if t.kind == IDENT and t.value == "key" and _next_is_assign(ts):
            ts.advance()
            ts.expect_op("=")
            key = X.parse_expression(ts)
            ts.expect_op(";")
        elif t.kind == IDENT and t.value == "maxDepth" and _next_is_assign(ts):
            ts.advance()
            ts.expect_op("=")
            e = X.parse_expression(ts)
            ts.expect_op(";")
            max_depth = int(_const_number(e, t))
        else:
            body.extend(_parse_item(ts))
    ts.expect_op("}")
    if key is None:
        raise ParseError("Partition requires a key expression", *pos)
    return Partition(key, body, max_depth, pos=pos)


def _parse_squarified(ts: TokenStream, pos) -> SquarifiedTreemap:
    key = None
    weight = None
    max_depth = DEFAULT_MAX_DEPTH
    ts.expect_op("{")
    body: list[Node] = []
    while not ts.at_op("}"):
        t = ts.cur
        if t.kind == IDENT and t.value in ("key", "weight", "maxDepth") and _next_is_assign(ts):
            name = t.value
            ts.advance()
            ts.expect_op("=")
            e = X.parse_expression(ts)
            ts.expect_op(";")
            if name == "key":
                key = e
            elif name == "weight":
                weight = e
            else:
                max_depth = int(_const_number(e, t))
        else:
            body.extend(_parse_item(ts))
    ts.expect_op("}")
    if key is None or weight is None:
        raise ParseError("SquarifiedTreemap requires key and weight", *pos)
    return SquarifiedTreemap(key, weight, body, max_depth, pos=pos)


def _parse_sort(ts: TokenStream, pos) -> Sort:
    if ts.eat_op("="):
        key = X.parse_expression(ts)
        ts.expect_op(";")
        return Sort(key, pos=pos)
    ts.expect_op("{")
    key = None
    descending = False
    accums: list[Accumulator] = []
    while not ts.at_op("}"):
        t = ts.cur
        if t.kind == IDENT and t.value == "key" and _next_is_assign(ts):
            ts.advance()
            ts.expect_op("=")
            key = X.parse_expression(ts)
            ts.expect_op(";")
        elif t.kind == IDENT and t.value == "descending" and _next_is_assign(ts):
            ts.advance()
            ts.expect_op("=")
            descending = _parse_bool(ts)
            ts.expect_op(";")
        elif t.kind == IDENT and t.value == "Accumulator":
            ts.advance()
            accums.extend(_parse_state_block(ts, Accumulator))
        else:
            raise ParseError(f"unexpected {describe(t)} in Sort block", t.line, t.col)
    ts.expect_op("}")
    if key is None:
        raise ParseError("Sort requires a key expression", *pos)
    return Sort(key, accums, descending, pos=pos)


def _parse_order(ts: TokenStream, pos) -> Order:
    ts.expect_op("{")
    accums: list[Accumulator] = []
    result = None
    while not ts.at_op("}"):
        t = ts.cur
        if t.kind == IDENT and t.value == "Accumulator":
            ts.advance()
            accums.extend(_parse_state_block(ts, Accumulator))
        elif t.kind == IDENT and t.value == "result" and _next_is_assign(ts):
            ts.advance()
            ts.expect_op("=")
            result = X.parse_expression(ts)
            ts.expect_op(";")
        else:
            raise ParseError(f"unexpected {describe(t)} in Order block", t.line, t.col)
    ts.expect_op("}")
    if result is None:
        raise ParseError("Order requires a result expression", *pos)
    return Order(accums, result, pos=pos)


def _parse_state_block(ts: TokenStream, cls) -> list:
    """Parse a Variable/Accumulator block: one or more named declarations."""
    ts.expect_op("{")
    out = []
    while not ts.at_op("}"):
        t = ts.expect(IDENT)
        name = t.value
        pos = (t.line, t.col)
        ts.expect_op("=")
        if ts.at_op("{"):
            fields = _parse_named_exprs(ts, allowed=("init", "iter", "end"))
            ts.eat_op(";")
            init, it, end = fields.get("init"), fields.get("iter"), fields.get("end")
            if init is None or it is None:
                raise ParseError(f"{name!r} needs init and iter expressions", *pos)
            if cls is Variable:
                if end is not None:
                    raise ParseError("Variable does not take an end expression", *pos)
                out.append(Variable(name, init, it, pos=pos))
            else:
                out.append(Accumulator(name, init, it, end, pos=pos))
        else:
            e = X.parse_expression(ts)
            ts.expect_op(";")
            if cls is Variable:
                # expression-only variable: a per-scope constant
                out.append(Variable(name, e, X.IdentRef(name), pos=pos))
            else:
                out.append(Accumulator(name, const=e, pos=pos))
    ts.expect_op("}")
    return out


def _parse_named_exprs(ts: TokenStream, allowed) -> dict:
    ts.expect_op("{")
    fields = {}
    while not ts.at_op("}"):
        t = ts.expect(IDENT)
        if t.value not in allowed:
            raise ParseError(f"unknown field {t.value!r}", t.line, t.col)
        if t.value in fields:
            raise ParseError(f"duplicate field {t.value!r}", t.line, t.col)
        ts.expect_op("=")
        fields[t.value] = X.parse_expression(ts)
        if not ts.at_op("}"):
            ts.expect_op(";")
        else:
            ts.eat_op(";")
    ts.expect_op("}")
    return fields


def _parse_paint(ts: TokenStream, pos) -> Paint:
    if ts.eat_op("="):
        color = _parse_color(ts)
        ts.expect_op(";")
        return Paint(color=color, pos=pos)
    ts.expect_op("{")
    fields: dict[str, X.Expr] = {}
    color = None
    while not ts.at_op("}"):
        t = ts.expect(IDENT)
        name = t.value
        if name == "color":
            ts.expect_op("=")
            color = _parse_color(ts)
            ts.expect_op(";")
            continue
        if name not in ("hue", "saturation", "value"):
            raise ParseError(f"unknown Paint field {name!r}", t.line, t.col)
        if name in fields:
            raise ParseError(f"duplicate parameter {name!r}", t.line, t.col)
        ts.expect_op("=")
        fields[name] = X.parse_expression(ts)
        if not ts.at_op("}"):
            ts.expect_op(";")
        else:
            ts.eat_op(";")
    ts.expect_op("}")
    if color is not None:
        return Paint(color=color, pos=pos)
    missing = {"hue", "saturation", "value"} - set(fields)
    if missing:
        raise ParseError(f"Paint missing {sorted(missing)}", *pos)
    return Paint(fields["hue"], fields["saturation"], fields["value"], pos=pos)


def _parse_color(ts: TokenStream) -> tuple:
    t = ts.cur
    if t.kind in (IDENT, STR):
        name = t.value
        if name in NAMED_COLORS:
            ts.advance()
            return NAMED_COLORS[name]
        raise ParseError(f"unknown color {name!r}", t.line, t.col)
    raise ParseError(f"expected a color name, got {describe(t)}", t.line, t.col)


def _parse_font(ts: TokenStream, pos) -> Font:
    if ts.eat_op("="):
        e = X.parse_expression(ts)
        ts.expect_op(";")
        return Font(e, pos=pos)
    fields = _parse_named_exprs(ts, allowed=("size",))
    if "size" not in fields:
        raise ParseError("Font requires a size", *pos)
    return Font(fields["size"], pos=pos)


def _parse_children(ts: TokenStream, pos) -> Children:
    ts.expect_op("{")
    cases = []
    while not ts.at_op("}"):
        pattern = [_parse_pattern_segment(ts)]
        while ts.eat_op("/"):
            pattern.append(_parse_pattern_segment(ts))
        nodes = _parse_block_items(ts)
        cases.append((tuple(pattern), nodes))
    ts.expect_op("}")
    if not cases:
        raise ParseError("Children requires at least one case", *pos)
    return Children(cases, pos=pos)


def _parse_pattern_segment(ts: TokenStream) -> str:
    t = ts.cur
    if ts.at_op("*"):
        ts.advance()
        return "*"
    if t.kind in (IDENT, STR):
        ts.advance()
        return str(t.value)
    if t.kind == NUM:
        ts.advance()
        return X.fmt_number(t.value)
    raise ParseError(f"bad Children pattern segment: {describe(t)}", t.line, t.col)


def _parse_repeat(ts: TokenStream, pos) -> RepeatGeometry:
    ts.expect_op("{")
    count = None
    index = "rep"
    body: list[Node] = []
    while not ts.at_op("}"):
        t = ts.cur
        if t.kind == IDENT and t.value == "count" and _next_is_assign(ts):
            ts.advance()
            ts.expect_op("=")
            count = X.parse_expression(ts)
            ts.expect_op(";")
        elif t.kind == IDENT and t.value == "index" and _next_is_assign(ts):
            ts.advance()
            ts.expect_op("=")
            index = ts.expect(IDENT).value
            ts.expect_op(";")
        else:
            body.extend(_parse_item(ts))
    ts.expect_op("}")
    if count is None:
        raise ParseError("RepeatGeometry requires a count", *pos)
    return RepeatGeometry(count, index, body, pos=pos)


def _parse_primitive(ts: TokenStream, kind: str, pos) -> Primitive:
    allowed = PRIMITIVE_PARAMS[kind]
    prim = Primitive(kind, pos=pos)
    ts.expect_op("{")
    while not ts.at_op("}"):
        t = ts.cur
        if t.kind == IDENT and t.value in NODE_KEYWORDS:
            sub = _parse_item(ts)
            for node in sub:
                if isinstance(node, Paint):
                    if prim.paint is not None:
                        raise ParseError("duplicate Paint", t.line, t.col)
                    prim.paint = node
                elif isinstance(node, Font):
                    if prim.font is not None:
                        raise ParseError("duplicate Font", t.line, t.col)
                    prim.font = node
                elif isinstance(node, Children):
                    if prim.children is not None:
                        raise ParseError("duplicate Children", t.line, t.col)
                    prim.children = node
                elif isinstance(node, (Primitive, RepeatGeometry)):
                    prim.nested.append(node)
                else:
                    raise ParseError(
                        f"{type(node).__name__} not allowed inside a primitive",
                        t.line, t.col)
            continue
        if t.kind != IDENT:
            raise ParseError(f"expected a parameter name, got {describe(t)}", t.line, t.col)
        name = t.value
        ts.advance()
        ts.expect_op("=")
        if name == "Centered":
            prim.centered = _parse_bool(ts)
            ts.expect_op(";")
            continue
        if name not in allowed:
            raise ParseError(f"unknown parameter {name!r} for {kind}", t.line, t.col)
        if name in prim.params or (name == "points" and prim.points):
            raise ParseError(f"duplicate parameter {name!r}", t.line, t.col)
        e = X.parse_expression(ts)
        ts.expect_op(";")
        if name == "points":
            if not isinstance(e, X.ListLit) or len(e.items) < 4 or len(e.items) % 2:
                raise ParseError(
                    "points must be a literal list of an even number (>= 4) "
                    "of coordinates", t.line, t.col)
            prim.points = [ParamSpec(item) for item in e.items]
        else:
            prim.params[name] = ParamSpec(e)
    ts.expect_op("}")
    if prim.centered:
        for pname in ("X", "Y"):
            if pname in prim.params:
                prim.params[pname].anchor = CENTER
    return prim


def _parse_bool(ts: TokenStream) -> bool:
    t = ts.cur
    if t.kind == IDENT and t.value in ("true", "false"):
        ts.advance()
        return t.value == "true"
    raise ParseError(f"expected true or false, got {describe(t)}", t.line, t.col)


def _const_number(e: X.Expr, t) -> float:
    if isinstance(e, X.Num):
        return e.value
    raise ParseError("expected a numeric literal", t.line, t.col)


def _next_is_assign(ts: TokenStream) -> bool:
    nxt = ts.tokens[ts.pos + 1] if ts.pos + 1 < len(ts.tokens) else None
    return nxt is not None and nxt.kind == OP and nxt.value == "="


# --- Printer ---------------------------------------------------------------


def print_program(p: VizProgram) -> str:
    out = ["Visualization {"]
    _print_items(p.body, out, 1)
    out.append("}")
    return "\n".join(out) + "\n"


def _line(out, depth, text):
    out.append("  " * depth + text)


def _print_items(items, out, d):
    for node in items:
        _print_node(node, out, d)


def _print_node(node, out, d):
    pe = X.print_expr
    if isinstance(node, Partition):
        _line(out, d, f"Partition = {pe(node.key)} {{")
        if node.max_depth != DEFAULT_MAX_DEPTH:
            _line(out, d + 1, f"maxDepth = {node.max_depth};")
        _print_items(node.body, out, d + 1)
        _line(out, d, "}")
    elif isinstance(node, SquarifiedTreemap):
        _line(out, d, "SquarifiedTreemap {")
        _line(out, d + 1, f"key = {pe(node.key)};")
        _line(out, d + 1, f"weight = {pe(node.weight)};")
        if node.max_depth != DEFAULT_MAX_DEPTH:
            _line(out, d + 1, f"maxDepth = {node.max_depth};")
        _print_items(node.body, out, d + 1)
        _line(out, d, "}")
    elif isinstance(node, Sort):
        if not node.accums and not node.descending:
            _line(out, d, f"Sort = {pe(node.key)};")
        else:
            _line(out, d, "Sort {")
            _line(out, d + 1, f"key = {pe(node.key)};")
            if node.descending:
                _line(out, d + 1, "descending = true;")
            for a in node.accums:
                _print_node(a, out, d + 1)
            _line(out, d, "}")
    elif isinstance(node, Order):
        _line(out, d, "Order {")
        for a in node.accums:
            _print_node(a, out, d + 1)
        _line(out, d + 1, f"result = {pe(node.result)};")
        _line(out, d, "}")
    elif isinstance(node, Filter):
        _line(out, d, f"Filter = {pe(node.predicate)};")
    elif isinstance(node, Variable):
        if node.iter == X.IdentRef(node.name):
            _line(out, d, f"Variable {{ {node.name} = {pe(node.init)}; }}")
        else:
            _line(out, d, f"Variable {{ {node.name} = {{ init = {pe(node.init)}; "
                          f"iter = {pe(node.iter)}; }} }}")
    elif isinstance(node, Accumulator):
        if node.const is not None:
            _line(out, d, f"Accumulator {{ {node.name} = {pe(node.const)}; }}")
        else:
            end = f" end = {pe(node.end)};" if node.end is not None else ""
            _line(out, d, f"Accumulator {{ {node.name} = {{ init = {pe(node.init)}; "
                          f"iter = {pe(node.iter)};{end} }} }}")
    elif isinstance(node, Paint):
        if node.color is not None:
            name = next(k for k, v in NAMED_COLORS.items() if v == node.color)
            _line(out, d, f"Paint = {name};")
        else:
            _line(out, d, "Paint {")
            _line(out, d + 1, f"hue = {pe(node.hue)};")
            _line(out, d + 1, f"saturation = {pe(node.saturation)};")
            _line(out, d + 1, f"value = {pe(node.value)};")
            _line(out, d, "}")
    elif isinstance(node, Font):
        _line(out, d, f"Font = {pe(node.size)};")
    elif isinstance(node, Children):
        _line(out, d, "Children {")
        for pattern, nodes in node.cases:
            label = "/".join(_pattern_segment_text(s) for s in pattern)
            _line(out, d + 1, f"{label} {{")
            _print_items(nodes, out, d + 2)
            _line(out, d + 1, "}")
        _line(out, d, "}")
    elif isinstance(node, RepeatGeometry):
        _line(out, d, "RepeatGeometry {")
        _line(out, d + 1, f"count = {pe(node.count)};")
        _line(out, d + 1, f"index = {node.index};")
        _print_items(node.body, out, d + 1)
        _line(out, d, "}")
    elif isinstance(node, Margin):
        _line(out, d, f"Margin = {pe(node.fraction)};")
    elif isinstance(node, Primitive):
        _line(out, d, f"{node.kind} {{")
        if node.centered:
            _line(out, d + 1, "Centered = true;")
        if node.points:
            coords = ", ".join(pe(ps.expr) for ps in node.points)
            _line(out, d + 1, f"points = {{ {coords} }};")
        for name in PRIMITIVE_PARAMS[node.kind]:
            if name in node.params:
                _line(out, d + 1, f"{name} = {pe(node.params[name].expr)};")
        if node.paint is not None:
            _print_node(node.paint, out, d + 1)
        if node.font is not None:
            _print_node(node.font, out, d + 1)
        _print_items(node.nested, out, d + 1)
        if node.children is not None:
            _print_node(node.children, out, d + 1)
        _line(out, d, "}")
    else:  # pragma: no cover
        raise TypeError(f"cannot print {node!r}")


def _pattern_segment_text(s: str) -> str:
    if s == "*" or s.isidentifier():
        return s
    return '"' + s.replace('"', '\\"') + '"'


# --- Validation ------------------------------------------------------------


GEOMETRIC_PARAM_NAMES = {"X", "Y", "Width", "Height", "X1", "Y1", "X2", "Y2"}


def resolved_mapping(spec: ParamSpec, schema: Schema) -> str:
    """Resolve the Auto site rule: a bare reference to a numeric attribute
    used directly as a geometric/paint parameter is min-max normalized;
    every other expression is raw."""
    if spec.mapping != AUTO:
        return spec.mapping
    e = spec.expr
    if isinstance(e, X.AttrRef) and schema.type_of(e.name) is AttrType.NUMERIC:
        return X.LINEAR
    return X.RAW


class _Scope:
    def __init__(self, parent=None):
        self.parent = parent
        self.variables: set[str] = set()
        self.accumulators: set[str] = set()
        self.extra: set[str] = set()  # RepeatGeometry indices

    def names(self) -> set:
        own = self.variables | self.accumulators | self.extra
        return own | (self.parent.names() if self.parent else set())

    def own(self) -> set:
        return self.variables | self.accumulators | self.extra

    def outer_variables(self) -> set:
        s = self.parent
        out = set()
        while s:
            out |= s.variables | s.extra
            s = s.parent
        return out


def validate(program: VizProgram, schema: Schema, table: DataTable | None = None) -> list[Diagnostic]:
    """Check a parsed program against a schema; diagnostics are the result.

    An empty list means every attribute reference names a schema attribute,
    every identifier resolves, log mappings have positive domains (when a
    table is supplied), Children patterns fit their partition nesting, and
    names are not shadowed within a scope.
    """
    v = _Validator(schema, table)
    v.scope_items(program.body, _Scope(), partition_depth=0)
    return v.diagnostics


class _Validator:
    def __init__(self, schema: Schema, table):
        self.schema = schema
        self.table = table
        self.diagnostics: list[Diagnostic] = []

    def err(self, msg, pos=(0, 0)):
        self.diagnostics.append(Diagnostic(msg, pos[0], pos[1]))

    # -- expressions --

    def expr(self, e, scope: _Scope, pos, *, rows=True, aggregates=True,
             same_scope_vars=False, label=""):
        if e is None:
            return
        attrs, idents = X.free_refs(e)
        for a in sorted(attrs):
            if not self.schema.has(a):
                self.err(f"unknown attribute {a!r}", pos)
            elif not rows:
                self.err(f"attribute ${a} not allowed in {label}", pos)
        known = scope.names() | BUILTIN_NAMES
        for name in sorted(idents):
            if name not in known:
                self.err(f"unresolved identifier {name!r}", pos)
            elif not same_scope_vars and name in scope.variables:
                self.err(
                    f"variable {name!r} referenced in {label}, which runs "
                    "before the output phase", pos)
        if not aggregates and X.uses_aggregates(e):
            self.err(f"Sum()/Average() not allowed in {label}", pos)
        elif aggregates:
            for call in X.collect_aggregates(e):
                arg_attrs, arg_idents = X.free_refs(call.args[0])
                bad = arg_idents & scope.variables
                if bad:
                    self.err(
                        f"{call.fn}() argument references variable "
                        f"{sorted(bad)[0]!r}; aggregates reduce over rows, "
                        "not over the unit loop", pos)
                if X.uses_aggregates(call.args[0]):
                    self.err("nested Sum()/Average() is not supported", pos)
        for site in X.norm_sites(e):
            name = site.attr.name
            if not self.schema.has(name):
                continue
            if self.schema.type_of(name) is not AttrType.NUMERIC:
                self.err(f"norm() on non-numeric attribute {name!r}", pos)
            elif site.mapping == X.LOG and self.table is not None:
                st = self.table.global_stats(name)
                if st.min <= 0:
                    self.err(
                        f"log mapping on attribute {name!r} whose domain "
                        f"includes {X.fmt_number(st.min)} (must be positive)", pos)

    # -- scope walk --

    def declare(self, scope: _Scope, name: str, kind: str, pos):
        if name in scope.own():
            self.err(f"duplicate name {name!r} in scope", pos)
        if name in BUILTIN_NAMES:
            self.err(f"{kind} {name!r} shadows a builtin", pos)
        (scope.variables if kind == "variable" else scope.accumulators).add(name)

    def scope_items(self, items, scope: _Scope, partition_depth: int):
        partitions = [n for n in items if isinstance(n, (Partition, SquarifiedTreemap))]
        if len(partitions) > 1:
            self.err("at most one Partition per scope", partitions[1].pos)
        # declarations first so later phases resolve forward declarations
        for node in items:
            if isinstance(node, Variable):
                self.declare(scope, node.name, "variable", node.pos)
            elif isinstance(node, Accumulator):
                self.declare(scope, node.name, "accumulator", node.pos)
        for node in items:
            self.node(node, scope, partition_depth)

    def node(self, node, scope: _Scope, partition_depth: int):
        if isinstance(node, Filter):
            self.expr(node.predicate, scope, node.pos, aggregates=False, label="Filter")
            for site in X.norm_sites(node.predicate):
                if site.scope == X.LOCAL:
                    self.err(
                        "norm(..., local) not allowed in Filter: local "
                        "domains are computed after filtering", node.pos)
        elif isinstance(node, Variable):
            self.expr(node.init, scope, node.pos, same_scope_vars=True, label="Variable init")
            self.expr(node.iter, scope, node.pos, same_scope_vars=True, label="Variable iter")
        elif isinstance(node, Accumulator):
            self.accumulator(node, scope)
        elif isinstance(node, Sort):
            for a in node.accums:
                self.accumulator(a, scope)
            self.expr(node.key, scope, node.pos, label="Sort key")
        elif isinstance(node, Order):
            for a in node.accums:
                self.accumulator(a, scope)
            self.expr(node.result, scope, node.pos, rows=False, label="Order result")
        elif isinstance(node, (Partition, SquarifiedTreemap)):
            self.expr(node.key, scope, node.pos, aggregates=False, label="Partition key")
            if isinstance(node, SquarifiedTreemap):
                self.expr(node.weight, scope, node.pos, label="SquarifiedTreemap weight")
            inner = _Scope(scope)
            self.scope_items(node.body, inner, partition_depth + 1)
        elif isinstance(node, Primitive):
            self.primitive(node, scope, partition_depth)
        elif isinstance(node, RepeatGeometry):
            self.expr(node.count, scope, node.pos, label="RepeatGeometry count")
            inner = _Scope(scope)
            inner.extra.add(node.index)
            for sub in node.body:
                if isinstance(sub, (Primitive, RepeatGeometry)):
                    self.node(sub, inner, partition_depth)
                else:
                    self.err("RepeatGeometry body must contain primitives", node.pos)
        elif isinstance(node, Margin):
            self.expr(node.fraction, scope, node.pos, rows=False,
                      aggregates=False, label="Margin")
        elif isinstance(node, (Paint, Font)):
            self.paint_or_font(node, scope)
        elif isinstance(node, Children):
            self.err("Children only allowed inside a primitive", node.pos)

    def accumulator(self, node: Accumulator, scope: _Scope):
        if node.const is not None:
            self.expr(node.const, scope, node.pos, rows=False, aggregates=False,
                      label="constant accumulator")
            return
        self.expr(node.init, scope, node.pos, aggregates=False, label="Accumulator init")
        self.expr(node.iter, scope, node.pos, aggregates=False, label="Accumulator iter")
        if node.end is not None:
            self.expr(node.end, scope, node.pos, aggregates=False, label="Accumulator end")

    def numeric_param(self, name: str, spec: ParamSpec, node):
        e = spec.expr
        if isinstance(e, X.AttrRef) and self.schema.type_of(e.name) is AttrType.TEXT:
            self.err(
                f"parameter {name!r} maps text attribute ${e.name}; "
                "geometric parameters need a numeric attribute", node.pos)

    def paint_or_font(self, node, scope: _Scope):
        if isinstance(node, Paint) and node.color is None:
            for e in (node.hue, node.saturation, node.value):
                self.expr(e, scope, node.pos, same_scope_vars=True, label="Paint")
        elif isinstance(node, Font):
            self.expr(node.size, scope, node.pos, same_scope_vars=True, label="Font")

    def primitive(self, node: Primitive, scope: _Scope, partition_depth: int):
        required = set(PRIMITIVE_PARAMS[node.kind])
        given = set(node.params) | ({"points"} if node.points else set())
        for missing in sorted(required - given):
            self.err(f"{node.kind} missing parameter {missing!r}", node.pos)
        for name, spec in node.params.items():
            self.expr(spec.expr, scope, node.pos, same_scope_vars=True, label="parameter")
            if name != "text":
                self.numeric_param(name, spec, node)
        for spec in node.points:
            self.expr(spec.expr, scope, node.pos, same_scope_vars=True, label="points")
            self.numeric_param("points", spec, node)
        if node.paint is not None:
            self.paint_or_font(node.paint, scope)
        if node.font is not None:
            self.paint_or_font(node.font, scope)
        for sub in node.nested:
            self.node(sub, scope, partition_depth)
        if node.children is not None:
            if partition_depth == 0:
                self.err("Children requires an enclosing Partition", node.children.pos)
            for pattern, nodes in node.children.cases:
                if len(pattern) > max(partition_depth, 1):
                    self.err(
                        f"Children pattern {'/'.join(pattern)!r} is deeper than "
                        f"the enclosing partition nesting ({partition_depth})",
                        node.children.pos)
                inner = _Scope(scope)
                self.scope_items(nodes, inner, partition_depth)


# --- Macros ------------------------------------------------------------------


MACRO_NAMES = (
    "plot2d", "histogram", "parallel_histograms", "adjusted_parallel_histograms",
    "grid_of", "treemap", "squarified_treemap", "parallel_coordinates",
)


def _attr(name: str) -> str:
    return f"${name}" if name.isidentifier() else f'$"{name}"'


def _require(params: dict, key: str, macro: str) -> str:
    if key not in params or not params[key]:
        raise VizError(f"macro {macro!r} requires parameter {key!r}")
    return params[key]


def _attr_list(params: dict, key: str, macro: str) -> list:
    v = _require(params, key, macro)
    if isinstance(v, str):
        v = [a.strip() for a in v.split(",") if a.strip()]
    if not v:
        raise VizError(f"macro {macro!r} requires parameter {key!r}")
    return list(v)


def expand_macro(name: str, params: dict) -> VizProgram:
    """Expand a named macro into a full program.

    Macros cover the built-in display schemes; parameters name the data
    attributes to map (lists may be given as comma-separated strings).
    """
    if name not in MACRO_NAMES:
        raise VizError(f"unknown macro {name!r} (try one of {', '.join(MACRO_NAMES)})")
    text = _MACRO_BUILDERS[name](params)
    return parse_program(text)


def _macro_plot2d(params):
    x = _attr(_require(params, "x", "plot2d"))
    y = _attr(_require(params, "y", "plot2d"))
    size = params.get("size", "0.04")
    return (
        "Visualization {\n"
        "  FillEllipse {\n"
        f"    X = {x};\n"
        f"    Y = {y};\n"
        f"    Width = {size};\n"
        f"    Height = {size};\n"
        "  }\n"
        "}\n"
    )


def _macro_histogram(params):
    a = _require(params, "attr", "histogram")
    return (
        "Visualization {\n"
        f"  Sort = {_attr(a)};\n"
        "  Variable { i = { init = 0; iter = i + 1/Length; } }\n"
        "  FillRectangle {\n"
        "    X = i;\n"
        "    Y = 0;\n"
        "    Width = 1/Length;\n"
        f"    Height = norm({_attr(a)});\n"
        "  }\n"
        "}\n"
    )


def _macro_parallel_histograms(params):
    attrs = _attr_list(params, "attrs", "parallel_histograms")
    sort_key = params.get("sort", attrs[0])
    n = len(attrs)
    bars = []
    for k, a in enumerate(attrs):
        bars.append(
            "    FillRectangle {\n"
            "      X = 0;\n"
            f"      Y = {k}/{n};\n"
            "      Width = 1;\n"
            f"      Height = norm({_attr(a)})/{n};\n"
            "    }\n"
        )
    return (
        "Visualization {\n"
        f"  Sort = {_attr(sort_key)};\n"
        "  Variable { i = { init = 0; iter = i + 1/Length; } }\n"
        "  FillRectangle {\n"
        "    X = i;\n"
        "    Y = 0;\n"
        "    Width = 1/Length;\n"
        "    Height = 1;\n"
        + "".join(bars) +
        "  }\n"
        "}\n"
    )


def _macro_adjusted(params):
    w = _attr(_require(params, "weight", "adjusted_parallel_histograms"))
    attrs = params.get("attrs") or []
    if isinstance(attrs, str):
        attrs = [a.strip() for a in attrs.split(",") if a.strip()]
    n = max(len(attrs), 1)
    bars = []
    for k, a in enumerate(attrs):
        bars.append(
            "    FillRectangle {\n"
            "      X = 0;\n"
            f"      Y = {k}/{n};\n"
            "      Width = 1;\n"
            f"      Height = norm({_attr(a)})/{n};\n"
            "    }\n"
        )
    return (
        "Visualization {\n"
        f"  Accumulator {{ Sum = {{ init = 0; iter = Sum + {w}; }} }}\n"
        f"  Variable {{ i = {{ init = 0; iter = i + {w}/Sum; }} }}\n"
        "  FillRectangle {\n"
        "    X = i;\n"
        "    Y = 0;\n"
        f"    Width = {w}/Sum;\n"
        "    Height = 1;\n"
        + "".join(bars) +
        "  }\n"
        "}\n"
    )


def _macro_grid_of(params):
    by = _attr(_require(params, "by", "grid_of"))
    x = _attr(_require(params, "x", "grid_of"))
    y = _attr(_require(params, "y", "grid_of"))
    special = params.get("special")
    cases = [
        "        * {\n"
        "          FillEllipse {\n"
        f"            X = {x};\n"
        f"            Y = {y};\n"
        "            Width = 0.04;\n"
        "            Height = 0.04;\n"
        "          }\n"
        "        }\n"
    ]
    if special:
        cases.insert(0,
            f"        {special} {{\n"
            "          FillRectangle {\n"
            "            X = 0;\n"
            "            Y = 0;\n"
            "            Width = 1;\n"
            "            Height = 1;\n"
            "            Paint = black;\n"
            "          }\n"
            "          FillEllipse {\n"
            f"            X = {x};\n"
            f"            Y = {y};\n"
            "            Width = 0.04;\n"
            "            Height = 0.04;\n"
            "            Paint = white;\n"
            "          }\n"
            "        }\n")
    return (
        "Visualization {\n"
        f"  Partition = {by} {{\n"
        "    Accumulator {\n"
        "      Rows = sqrt(childCount);\n"
        "      Columns = floor(sqrt(childCount - 1)) + 1;\n"
        "    }\n"
        "    Variable { i = { init = 0; iter = i + 1; } }\n"
        "    FillRectangle {\n"
        "      X = (i % Columns)/Columns;\n"
        "      Y = floor(i/Columns)/Rows;\n"
        "      Width = 1/Columns;\n"
        "      Height = 1/Rows;\n"
        "      Children {\n"
        + "".join(cases) +
        "      }\n"
        "    }\n"
        "  }\n"
        "}\n"
    )


def _macro_treemap(params):
    path = _attr(_require(params, "path", "treemap"))
    weight = _attr(_require(params, "weight", "treemap"))
    return (
        "Visualization {\n"
        f"  Partition = split({path}, \"/\")[depth] {{\n"
        "    Accumulator {\n"
        f"      Total = {{ init = 0; iter = Total + {weight}; }}\n"
        "      Horizontal = depth % 2;\n"
        "    }\n"
        "    Variable {\n"
        f"      Position = {{ init = 0; iter = Position + Sum({weight})/Total; }}\n"
        "    }\n"
        "    FillRectangle {\n"
        "      X = Horizontal ? 0 : Position;\n"
        "      Y = Horizontal ? Position : 0;\n"
        f"      Width = Horizontal ? 1 : Sum({weight})/Total;\n"
        f"      Height = Horizontal ? Sum({weight})/Total : 1;\n"
        "    }\n"
        "  }\n"
        "}\n"
    )


def _macro_squarified(params):
    path = _attr(_require(params, "path", "squarified_treemap"))
    weight = _attr(_require(params, "weight", "squarified_treemap"))
    return (
        "Visualization {\n"
        "  SquarifiedTreemap {\n"
        f"    key = split({path}, \"/\")[depth];\n"
        f"    weight = {weight};\n"
        "  }\n"
        "}\n"
    )


def _macro_parallel_coordinates(params):
    attrs = _attr_list(params, "attrs", "parallel_coordinates")
    if len(attrs) < 2:
        raise VizError("parallel_coordinates needs at least 2 attrs")
    n = len(attrs)
    pts = []
    for k, a in enumerate(attrs):
        pts.append(f"{k}/{n - 1}" if k else "0")
        pts.append(f"norm({_attr(a)})")
    return (
        "Visualization {\n"
        "  Polyline {\n"
        f"    points = {{ {', '.join(pts)} }};\n"
        "  }\n"
        "}\n"
    )


_MACRO_BUILDERS = {
    "plot2d": _macro_plot2d,
    "histogram": _macro_histogram,
    "parallel_histograms": _macro_parallel_histograms,
    "adjusted_parallel_histograms": _macro_adjusted,
    "grid_of": _macro_grid_of,
    "treemap": _macro_treemap,
    "squarified_treemap": _macro_squarified,
    "parallel_coordinates": _macro_parallel_coordinates,
}
