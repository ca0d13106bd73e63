"""Execution engine: runs a validated program over a table as the fixed
dataflow, with instrumented row-access accounting.

A *scope* is one application of an operator block to a row set: the root
block over the whole table, a partition body over one group, a Children
case over its group, or the per-row fallback where recursion stops. Scope
phases run in a fixed order: Filter, grouping probe, Accumulators,
Sort/Order, then the output loop over the scope's units (groups when a
partition is present, rows otherwise). Each unit of a partition scope then
recurses inside the rectangle it was given.

The same machinery backs both the direct interpreter (`execute`) and the
pass-plan compiler/executor in the plan module: building a scope performs
its structure passes, and `emit_scope_output` is shared by build and replay
so both paths produce identical instruction sequences.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

from . import expr as X
from . import program as P
from .errors import Diagnostic, EngineError, EvalError, VizError
from .scene import (
    DRAW_STRING, FILL_ELLIPSE, FILL_RECT, LINE, POLYLINE, SET_COLOR, SET_FONT,
    Rect, Representation, UNIT_RECT, fmt_num, hsv_to_rgb, resolve_device,
    resolve_point,
)
from .table import DataTable, DomainStats, InstrumentedCursor

NAN = math.nan

PRIM_KIND = {
    "FillRectangle": FILL_RECT,
    "FillEllipse": FILL_ELLIPSE,
    "Line": LINE,
    "Polyline": POLYLINE,
    "DrawString": DRAW_STRING,
}


@dataclass
class RenderOptions:
    device_width: int = 800
    device_height: int = 600
    viewport: Rect = UNIT_RECT
    cache: bool = True
    timeout: float | None = None  # seconds; None disables the deadline


@dataclass
class ComplexityReport:
    """Row-access accounting for one render.

    k_observed is the maximum per-row access count; k_planned is the
    per-row pass bound declared by structure discovery. A render is
    certified data-linear when it used no comparison sort and stayed within
    the planned bound.
    """

    per_row_counts: list
    k_observed: int
    k_planned: int
    sort_passes: int
    table_length: int
    total_accesses: int

    @property
    def certified_data_linear(self) -> bool:
        return self.sort_passes == 0 and self.k_observed <= self.k_planned

    def as_dict(self) -> dict:
        return {
            "schemaVersion": 1,
            "kPlanned": self.k_planned,
            "kObserved": self.k_observed,
            "perRowMax": self.k_observed,
            "sortPasses": self.sort_passes,
            "certifiedDataLinear": self.certified_data_linear,
            "tableLength": self.table_length,
            "totalAccesses": self.total_accesses,
        }


def complexity_of(report: ComplexityReport) -> dict:
    return {
        "kObserved": report.k_observed,
        "certifiedDataLinear": report.certified_data_linear,
    }


# --- Trace (test/introspection hook) ---------------------------------------


class Trace:
    """Optional render introspection: the scope tree with unit geometry,
    observed variable values, and accumulator results."""

    def __init__(self):
        self.root: ScopeTrace | None = None


@dataclass
class ScopeTrace:
    kind: str  # "partition" | "squarify" | "plain"
    depth: int
    path: tuple
    rows: list
    unit_keys: list
    unit_rows: list
    unit_rects: list
    var_values: dict
    accums: dict
    var_nodes: list = field(default_factory=list)
    sibling_count: int = 1
    children: list = field(default_factory=list)


# --- Static content classification ------------------------------------------


@dataclass
class Content:
    filters: list
    accums: list
    sort: P.Sort | None
    order: P.Order | None
    variables: list
    output: list
    margins: list
    paint: P.Paint | None
    font: P.Font | None
    agg_sites: list  # distinct (kind, arg expr) pairs, by printed text
    local_stat_attrs: list


def classify_content(items) -> tuple[Content, object]:
    """Split a scope's item list into phases; returns (content, partition node).

    When a Partition (or SquarifiedTreemap) is present, its body merges into
    the scope content: body accumulators run over the scope's rows and body
    primitives emit once per group.
    """
    partition = None
    rest = []
    for node in items:
        if isinstance(node, (P.Partition, P.SquarifiedTreemap)):
            if partition is not None:
                raise EngineError("more than one Partition in scope")
            partition = node
        else:
            rest.append(node)
    merged = rest + (list(partition.body) if partition is not None else [])
    c = Content([], [], None, None, [], [], [], None, None, [], [])
    for node in merged:
        if isinstance(node, P.Filter):
            c.filters.append(node)
        elif isinstance(node, P.Accumulator):
            c.accums.append(node)
        elif isinstance(node, P.Sort):
            if c.sort is not None or c.order is not None:
                raise EngineError("more than one Sort/Order in scope")
            c.sort = node
        elif isinstance(node, P.Order):
            if c.sort is not None or c.order is not None:
                raise EngineError("more than one Sort/Order in scope")
            c.order = node
        elif isinstance(node, P.Variable):
            c.variables.append(node)
        elif isinstance(node, (P.Primitive, P.RepeatGeometry)):
            c.output.append(node)
        elif isinstance(node, P.Margin):
            c.margins.append(node)
        elif isinstance(node, P.Paint):
            c.paint = node
        elif isinstance(node, P.Font):
            c.font = node
        elif isinstance(node, (P.Partition, P.SquarifiedTreemap)):
            raise EngineError(
                "nested Partition inside a partition body is not supported; "
                "use a depth-indexed key or Children")
        elif isinstance(node, P.Children):
            raise EngineError("Children is only allowed inside a primitive")
    _collect_sites(c, partition)
    return c, partition


def _unit_level_exprs(c: Content, partition):
    out = []
    for v in c.variables:
        out.extend((v.init, v.iter))

    def prim_exprs(prim):
        for spec in prim.params.values():
            out.append(spec.expr)
        for spec in prim.points:
            out.append(spec.expr)
        if prim.paint is not None and prim.paint.color is None:
            out.extend((prim.paint.hue, prim.paint.saturation, prim.paint.value))
        if prim.font is not None:
            out.append(prim.font.size)
        for sub in prim.nested:
            walk_output(sub)

    def walk_output(node):
        if isinstance(node, P.Primitive):
            prim_exprs(node)
        elif isinstance(node, P.RepeatGeometry):
            out.append(node.count)
            for sub in node.body:
                walk_output(sub)

    for node in c.output:
        walk_output(node)
    if c.paint is not None and c.paint.color is None:
        out.extend((c.paint.hue, c.paint.saturation, c.paint.value))
    if c.font is not None:
        out.append(c.font.size)
    if c.sort is not None:
        out.append(c.sort.key)
    if isinstance(partition, P.SquarifiedTreemap):
        out.append(partition.weight)
    return [e for e in out if e is not None]


def _collect_sites(c: Content, partition):
    """Discover distinct aggregate call sites and local-stat attributes."""
    seen = {}
    local_attrs = []
    exprs = _unit_level_exprs(c, partition)
    # filters/accums/order participate in local stats discovery too
    for f in c.filters:
        exprs.append(f.predicate)
    for a in c.accums:
        exprs.extend(x for x in (a.init, a.iter, a.end, a.const) if x is not None)
    if c.order is not None:
        exprs.append(c.order.result)
        for a in c.order.accums:
            exprs.extend(x for x in (a.init, a.iter, a.end, a.const) if x is not None)
    if c.sort is not None:
        for a in c.sort.accums:
            exprs.extend(x for x in (a.init, a.iter, a.end, a.const) if x is not None)
    for e in exprs:
        for call in X.collect_aggregates(e):
            key = (call.fn, X.print_expr(call.args[0]))
            if key not in seen:
                seen[key] = call
        for site in X.norm_sites(e):
            if site.scope == X.LOCAL and site.attr.name not in local_attrs:
                local_attrs.append(site.attr.name)
    if isinstance(partition, P.SquarifiedTreemap):
        # the weight reduction is an implicit Sum site
        key = ("Sum", X.print_expr(partition.weight))
        seen.setdefault(key, X.Call("Sum", (partition.weight,)))
    c.agg_sites = list(seen.keys())
    c.local_stat_attrs = local_attrs


# --- Scope run (the materialized scope tree) --------------------------------


class ScopeRun:
    """One scope applied to a row set: baked structure plus value slots.

    Structure fields (rows, units, children kinds, pass counts) are fixed at
    build time and replayed verbatim by the plan executor; value fields
    (accumulators, unit rects, variable snapshots) are recomputed on replay.
    """

    __slots__ = (
        "scope_id", "content", "partition", "squarify", "rows", "depth",
        "path", "sibling_count", "units", "unit_keys", "children",
        "own_passes", "probe_pass", "has_output_pass", "accum_values",
        "key_by_row", "terminal_kind", "accum_rows",
    )

    def __init__(self, scope_id, content, partition, rows, depth, path, sibling_count):
        self.scope_id = scope_id
        self.content = content
        self.partition = partition
        self.squarify = isinstance(partition, P.SquarifiedTreemap)
        self.rows = rows
        self.depth = depth
        self.path = path
        self.sibling_count = sibling_count
        self.units = []       # list of row-index lists
        self.unit_keys = []   # partition key per unit (None for row units)
        self.children = []    # per unit: ScopeRun | None
        self.own_passes = 0
        self.probe_pass = False
        self.has_output_pass = False
        self.accum_values = {}
        self.key_by_row = None
        self.accum_rows = None  # pre-sort row order, when a reorder happened
        self.terminal_kind = None  # why recursion stopped, for diagnostics

    def k_planned(self) -> int:
        best = 0
        for ch in self.children:
            if ch is not None:
                k = ch.k_planned()
                if k > best:
                    best = k
        return self.own_passes + best


# --- Render context ----------------------------------------------------------


class RenderContext:
    def __init__(self, table: DataTable, schema, options: RenderOptions,
                 sink: Representation, cursor: InstrumentedCursor):
        self.table = table
        self.schema = schema
        self.options = options
        self.sink = sink
        self.cursor = cursor
        self.device = (float(options.device_width), float(options.device_height))
        self.cache_enabled = options.cache
        self.agg_cache: dict = {}
        self.local_stats_cache: dict = {}
        self.compiled: dict = {}
        self.param_plans: dict = {}
        self.sort_passes = 0
        self.scope_counter = 0
        self.trace: Trace | None = None
        self.deadline = (time.monotonic() + options.timeout) if options.timeout else None
        self._tick = 0

    def compile(self, e: X.Expr):
        f = self.compiled.get(id(e))
        if f is None:
            f = self.compiled[id(e)] = X.compile_expr(e)
        return f

    def diag(self, message: str):
        self.sink.diagnostics.append(Diagnostic(message))

    def check_deadline(self):
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise EngineError("render timed out")

    def tick(self, n=1):
        self._tick += n
        if self._tick >= 65536:
            self._tick = 0
            self.check_deadline()


def _builtins_for(rctx, run) -> dict:
    return {
        "Length": float(rctx.table.length),
        "depth": float(run.depth),
        "childCount": float(run.sibling_count),
        "recordCount": float(len(run.rows)),
        "rowIndex": 0.0,
    }


def _make_context(rctx: RenderContext, run: ScopeRun, vars_base, accums_base) -> X.Context:
    ctx = X.Context(
        row_index=None,
        columns=rctx.table.columns,
        variables=dict(vars_base),
        accumulators=dict(accums_base),
        builtins=_builtins_for(rctx, run),
    )
    ctx.stats = _make_stats_provider(rctx, run)
    ctx.aggregate = _make_agg_handler(rctx, run, ctx)
    return ctx


# --- Domain stats -------------------------------------------------------------


def _make_stats_provider(rctx: RenderContext, run: ScopeRun):
    def provider(name: str, scope_kind: str) -> DomainStats:
        if scope_kind == X.GLOBAL:
            return rctx.table.global_stats(name)
        return _local_stats(rctx, run, name)

    return provider


def _local_stats(rctx: RenderContext, run: ScopeRun, name: str) -> DomainStats:
    key = (run.scope_id, name)
    st = rctx.local_stats_cache.get(key) if rctx.cache_enabled else None
    if st is None:
        col = rctx.table.columns[name]
        cursor_row = rctx.cursor.access
        lo, hi = math.inf, -math.inf
        for ri in run.rows:
            cursor_row(ri)
            v = col[ri]
            if v is None or v != v:
                continue
            if v < lo:
                lo = v
            if v > hi:
                hi = v
        st = DomainStats(name, 0.0, 1.0, "local") if lo > hi else DomainStats(name, lo, hi, "local")
        if rctx.cache_enabled:
            rctx.local_stats_cache[key] = st
    return st


# --- Aggregates ---------------------------------------------------------------


def _fold_aggregate(rctx, ctx, kind, arg_f, unit_rows):
    cursor_row = rctx.cursor.access
    total = 0.0
    count = 0
    saved = ctx.row_index
    for ri in unit_rows:
        cursor_row(ri)
        ctx.row_index = ri
        v = arg_f(ctx)
        if type(v) is bool:
            v = 1.0 if v else 0.0
        elif type(v) is not float or v != v:
            if v is None or type(v) is str or type(v) is list:
                continue
            if v != v:
                continue
        total += v
        count += 1
    ctx.row_index = saved
    if kind == "Sum":
        return total
    return total / count if count else NAN


def _make_agg_handler(rctx: RenderContext, run: ScopeRun, ctx: X.Context):
    def handler(kind, arg_expr, arg_f):
        ui = ctx.unit_index
        if ui < 0:
            # scope-level request (e.g. group-sort keys before the output
            # loop set a unit); fold over the whole scope
            return _fold_aggregate(rctx, ctx, kind, arg_f, run.rows)
        units = run.units
        if not rctx.cache_enabled:
            unit_rows = (run.rows[ui],) if units is None else units[ui]
            return _fold_aggregate(rctx, ctx, kind, arg_f, unit_rows)
        key = (run.scope_id, kind, X.print_expr(arg_expr))
        per_unit = rctx.agg_cache.get(key)
        if per_unit is None:
            if units is None:
                per_unit = [_fold_aggregate(rctx, ctx, kind, arg_f, (ri,))
                            for ri in run.rows]
            else:
                per_unit = [_fold_aggregate(rctx, ctx, kind, arg_f, u)
                            for u in units]
            rctx.agg_cache[key] = per_unit
        return per_unit[ui]

    return handler


# --- Accumulators, sorting, ordering -----------------------------------------


def _fold_accumulator(node: P.Accumulator, rows, ctx, rctx) -> float:
    if node.const is not None:
        try:
            value = rctx.compile(node.const)(ctx)
        except EvalError as e:
            rctx.diag(f"accumulator {node.name}: {e}")
            value = NAN
        ctx.accumulators[node.name] = value
        return value
    init_f = rctx.compile(node.init)
    iter_f = rctx.compile(node.iter)
    cursor_row = rctx.cursor.access
    accums = ctx.accumulators
    builtins = ctx.builtins
    saved_row = ctx.row_index
    ctx.row_index = None
    try:
        value = init_f(ctx)
    except EvalError as e:
        rctx.diag(f"accumulator {node.name} init: {e}")
        value = NAN
    name = node.name
    accums[name] = value
    pos = 0
    try:
        for ri in rows:
            cursor_row(ri)
            ctx.row_index = ri
            builtins["rowIndex"] = float(pos)
            accums[name] = value = iter_f(ctx)
            pos += 1
    except EvalError as e:
        rctx.diag(f"accumulator {name} iter: {e}")
        value = NAN
    ctx.row_index = saved_row
    if node.end is not None:
        accums[name] = value
        try:
            value = rctx.compile(node.end)(ctx)
        except EvalError as e:
            rctx.diag(f"accumulator {name} end: {e}")
            value = NAN
    accums[name] = value
    rctx.tick(len(rows))
    return value


def _sort_key_bucket(v):
    # NaN/Null keys sort last, stably
    if v is None or (type(v) is float and v != v):
        return 1
    return 0


def _check_sort_keys(keys):
    kinds = set()
    for v in keys:
        if v is None or (type(v) is float and v != v):
            continue
        if type(v) is bool or type(v) is int:
            kinds.add("num")
        elif type(v) is float:
            kinds.add("num")
        elif type(v) is str:
            kinds.add("text")
        else:
            raise EngineError(f"sort key of unsupported type {type(v).__name__}")
    if len(kinds) > 1:
        raise EngineError("sort keys mix numbers and text")


def order_rows(node, table: DataTable, rows=None, bindings=None):
    """Standalone row ordering for a Sort or Order node; returns positions.

    This is the library surface for the ordering operator; the engine uses
    the same internals during a render.
    """
    rep = Representation()
    options = RenderOptions()
    rctx = RenderContext(table, table.schema, options, rep, InstrumentedCursor(table))
    if rows is None:
        rows = list(range(table.length))
    content, _ = classify_content([])
    run = ScopeRun(0, content, None, list(rows), 0, (), 1)
    ctx = _make_context(rctx, run, {}, bindings or {})
    if isinstance(node, P.Sort):
        perm = _row_sort_permutation(node, run, ctx, rctx)
    elif isinstance(node, P.Order):
        perm = _order_permutation(node, run, ctx, rctx)
    else:
        raise VizError("order_rows expects a Sort or Order node")
    return perm


def _row_sort_permutation(node: P.Sort, run: ScopeRun, ctx, rctx) -> list:
    key_f = rctx.compile(node.key)
    cursor_row = rctx.cursor.access
    keys = []
    saved = ctx.row_index
    for ri in run.rows:
        cursor_row(ri)
        ctx.row_index = ri
        try:
            keys.append(key_f(ctx))
        except EvalError as e:
            rctx.diag(f"sort key: {e}")
            keys.append(None)
    ctx.row_index = saved
    _check_sort_keys(keys)
    order = range(len(keys))
    normal = [i for i in order if _sort_key_bucket(keys[i]) == 0]
    nans = [i for i in order if _sort_key_bucket(keys[i]) == 1]
    normal.sort(key=lambda i: keys[i], reverse=node.descending)
    rctx.sort_passes += 1
    return normal + nans


def _order_permutation(node: P.Order, run: ScopeRun, ctx, rctx) -> list:
    for a in node.accums:
        _fold_accumulator(a, run.rows, ctx, rctx)
    saved = ctx.row_index
    ctx.row_index = None
    try:
        result = rctx.compile(node.result)(ctx)
    finally:
        ctx.row_index = saved
    n = len(run.rows)
    if not isinstance(result, list):
        raise EngineError("Order result is not a list")
    perm = []
    seen = [False] * n
    for v in result:
        if type(v) is bool or not isinstance(v, (int, float)) or v != v or v != int(v):
            raise EngineError(f"Order result contains a non-index value {v!r}")
        i = int(v)
        if not 0 <= i < n:
            raise EngineError(f"Order result index {i} out of range [0, {n})")
        if seen[i]:
            raise EngineError(f"Order result repeats index {i}")
        seen[i] = True
        perm.append(i)
    if len(perm) != n:
        missing = seen.index(False)
        raise EngineError(f"Order result misses index {missing}")
    return perm


# --- Parameter evaluation plans ----------------------------------------------


def _numeric_wrap(base):
    def fn(ctx, base=base):
        v = base(ctx)
        t = type(v)
        if t is float:
            return v
        if t is bool:
            return 1.0 if v else 0.0
        if t is int:
            return float(v)
        return NAN

    return fn


def _param_fn(rctx: RenderContext, spec: P.ParamSpec, numeric: bool = True):
    mapping = P.resolved_mapping(spec, rctx.schema)
    if mapping == X.LINEAR and isinstance(spec.expr, X.AttrRef):
        # implicit min-max normalization of a bare numeric attribute, with
        # the domain prebound for the hot loop
        name = spec.expr.name
        col = rctx.table.columns[name]
        st = rctx.table.global_stats(name)
        lo, hi = st.min, st.max
        if lo == hi:
            def singleton_fn(ctx, col=col):
                v = col[ctx.row_index]
                return NAN if v is None or v != v else 0.5
            return singleton_fn
        span = hi - lo

        def norm_fn(ctx, col=col, lo=lo, span=span):
            v = col[ctx.row_index]
            if v is None or v != v:
                return NAN
            t = (v - lo) / span
            return 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)

        return norm_fn
    base = rctx.compile(spec.expr)
    if numeric:
        return _numeric_wrap(base)
    return base


class _PrimPlan:
    __slots__ = ("kind", "params", "points", "anchor_center", "paint_plan",
                 "font_fn", "rect_fns", "line_fns", "text_fns", "has_nested")

    def __init__(self, rctx, prim: P.Primitive, scope_paint, scope_font):
        self.kind = PRIM_KIND[prim.kind]
        self.params = {
            name: _param_fn(rctx, spec, numeric=(name != "text"))
            for name, spec in prim.params.items()
        }
        self.points = [_param_fn(rctx, spec) for spec in prim.points]
        self.anchor_center = prim.centered
        self.has_nested = bool(prim.nested)
        p = self.params
        self.rect_fns = (
            (p["X"], p["Y"], p["Width"], p["Height"])
            if self.kind in (FILL_RECT, FILL_ELLIPSE) else None)
        self.line_fns = (
            (p["X1"], p["Y1"], p["X2"], p["Y2"]) if self.kind == LINE else None)
        self.text_fns = (
            (p["text"], p["X"], p["Y"]) if self.kind == DRAW_STRING else None)
        paint = prim.paint if prim.paint is not None else scope_paint
        if paint is None:
            self.paint_plan = None
        elif paint.color is not None:
            self.paint_plan = paint.color
        else:
            self.paint_plan = (
                rctx.compile(paint.hue),
                rctx.compile(paint.saturation),
                rctx.compile(paint.value),
            )
        font = prim.font if prim.font is not None else scope_font
        self.font_fn = rctx.compile(font.size) if font is not None else None


def _prim_plan(rctx: RenderContext, prim: P.Primitive, content: Content) -> _PrimPlan:
    plan = rctx.param_plans.get(id(prim))
    if plan is None:
        plan = _PrimPlan(rctx, prim, content.paint, content.font)
        rctx.param_plans[id(prim)] = plan
    return plan


# --- Emission -----------------------------------------------------------------


def _emit_paint(plan: _PrimPlan, ctx, rctx):
    pp = plan.paint_plan
    if pp is None:
        return
    if isinstance(pp, tuple) and len(pp) == 3 and not callable(pp[0]):
        r, g, b = pp
    else:
        try:
            h = pp[0](ctx)
            s = pp[1](ctx)
            v = pp[2](ctx)
        except EvalError as e:
            rctx.diag(f"paint: {e}")
            return
        r, g, b = hsv_to_rgb(
            _coerce_num(h), _coerce_num(s), _coerce_num(v), rctx.sink.diagnostics)
    rctx.sink.instructions.append((SET_COLOR, r, g, b))


def _coerce_num(v):
    t = type(v)
    if t is float:
        return v
    if t is bool:
        return 1.0 if v else 0.0
    if t is int:
        return float(v)
    return NAN


def _emit_primitive(prim: P.Primitive, ctx, rctx, viewport: Rect, run,
                    need_rect: bool = False) -> Rect | None:
    plan = _prim_plan(rctx, prim, run.content)
    params = plan.params
    kind = plan.kind
    sink = rctx.sink.instructions
    device = rctx.device
    try:
        if plan.rect_fns is not None:
            xf, yf, wf, hf = plan.rect_fns
            x = xf(ctx)
            y = yf(ctx)
            w = wf(ctx)
            h = hf(ctx)
            if x != x or y != y or w != w or h != h:
                rctx.diag(f"{prim.kind} skipped: parameter is NaN")
                return None
            if plan.anchor_center:
                x -= w / 2
                y -= h / 2
            if w < 0 or h < 0:
                rctx.diag(f"{prim.kind}: negative size ({fmt_num(w)}, {fmt_num(h)}) clamped to 0")
                w = max(w, 0.0)
                h = max(h, 0.0)
            _emit_paint(plan, ctx, rctx)
            vx = viewport.x
            vy = viewport.y
            vw = viewport.width
            vh = viewport.height
            ax = vx + x * vw
            ay = vy + y * vh
            aw = w * vw
            ah = h * vh
            W, H = device
            sink.append((kind, ax * W, (1.0 - (ay + ah)) * H, aw * W, ah * H))
            if plan.has_nested or need_rect:
                abs_rect = Rect(ax, ay, aw, ah)
                for sub in prim.nested:
                    _emit_output_node(sub, ctx, rctx, abs_rect, run)
                return abs_rect
            return None
        if kind == LINE:
            xf, yf, x2f, y2f = plan.line_fns
            x1 = xf(ctx)
            y1 = yf(ctx)
            x2 = x2f(ctx)
            y2 = y2f(ctx)
            if x1 != x1 or y1 != y1 or x2 != x2 or y2 != y2:
                rctx.diag("Line skipped: parameter is NaN")
                return None
            _emit_paint(plan, ctx, rctx)
            p1 = resolve_point(x1, y1, viewport, device)
            p2 = resolve_point(x2, y2, viewport, device)
            sink.append((LINE, p1[0], p1[1], p2[0], p2[1]))
            return None
        if kind == POLYLINE:
            coords = []
            ok = True
            for fn in plan.points:
                v = fn(ctx)
                if v != v:
                    ok = False
                    break
                coords.append(v)
            if not ok:
                rctx.diag("Polyline skipped: point is NaN")
                return None
            pts = tuple(
                resolve_point(coords[i], coords[i + 1], viewport, device)
                for i in range(0, len(coords), 2)
            )
            _emit_paint(plan, ctx, rctx)
            sink.append((POLYLINE, pts))
            return None
        # DrawString
        tf, xf, yf = plan.text_fns
        text = tf(ctx)
        if text is None:
            rctx.diag("DrawString skipped: text is null")
            return None
        if not isinstance(text, str):
            tv = _coerce_num(text)
            if tv != tv:
                rctx.diag("DrawString skipped: text is not printable")
                return None
            text = fmt_num(tv)
        x = xf(ctx)
        y = yf(ctx)
        if x != x or y != y:
            rctx.diag("DrawString skipped: position is NaN")
            return None
        _emit_paint(plan, ctx, rctx)
        if plan.font_fn is not None:
            try:
                size = _coerce_num(plan.font_fn(ctx))
            except EvalError as e:
                rctx.diag(f"font: {e}")
                size = NAN
            if size == size:
                sink.append((SET_FONT, size))
        px, py = resolve_point(x, y, viewport, device)
        sink.append((DRAW_STRING, text, px, py))
        return None
    except EvalError as e:
        rctx.diag(f"{prim.kind} skipped: {e}")
        return None


def _emit_output_node(node, ctx, rctx, viewport: Rect, run,
                      need_rect: bool = False) -> Rect | None:
    if isinstance(node, P.Primitive):
        return _emit_primitive(node, ctx, rctx, viewport, run, need_rect)
    # RepeatGeometry: loop the body with the index bound as a variable
    try:
        count = _coerce_num(rctx.compile(node.count)(ctx))
    except EvalError as e:
        rctx.diag(f"RepeatGeometry count: {e}")
        return None
    if count != count:
        rctx.diag("RepeatGeometry skipped: count is NaN")
        return None
    n = max(int(count), 0)
    name = node.index
    variables = ctx.variables
    for k in range(n):
        rctx.tick()
        variables[name] = float(k)
        for sub in node.body:
            _emit_output_node(sub, ctx, rctx, viewport, run)
    variables.pop(name, None)
    return None


# --- Squarified layout ---------------------------------------------------------


def _sq_worst(row, areas, side):
    s = 0.0
    for i in row:
        s += areas[i]
    if s <= 0 or side <= 0:
        return math.inf
    s2 = s * s
    w2 = side * side
    worst = 0.0
    for i in row:
        a = areas[i]
        if a <= 0:
            return math.inf
        asp = max(w2 * a / s2, s2 / (w2 * a))
        if asp > worst:
            worst = asp
    return worst


def _sq_layout_row(row, areas, x, y, w, h, out):
    s = sum(areas[i] for i in row)
    if w >= h:
        # column strip along the left edge, stacked bottom-to-top
        t = s / h if h > 0 else 0.0
        cy = y
        for i in row:
            ih = areas[i] / t if t > 0 else 0.0
            out[i] = Rect(x, cy, t, ih)
            cy += ih
        return x + t, y, w - t, h
    t = s / w if w > 0 else 0.0
    cx = x
    for i in row:
        iw = areas[i] / t if t > 0 else 0.0
        out[i] = Rect(cx, y, iw, t)
        cx += iw
    return x, y + t, w, h - t


def squarify_layout(weights, rect: Rect) -> list:
    """Pack one rectangle per weight into ``rect`` with the squarified
    row-packing heuristic (weights processed in descending order; a new row
    starts whenever adding the next item would worsen the row's worst aspect
    ratio). Nonpositive/NaN weights yield None entries."""
    n = len(weights)
    out = [None] * n
    order = sorted(
        (i for i in range(n) if weights[i] == weights[i] and weights[i] > 0),
        key=lambda i: -weights[i],
    )
    if not order:
        return out
    total = sum(weights[i] for i in order)
    scale = (rect.width * rect.height) / total if total > 0 else 0.0
    areas = {i: weights[i] * scale for i in order}
    x, y, w, h = rect.x, rect.y, rect.width, rect.height
    row = []
    k = 0
    while k < len(order):
        i = order[k]
        side = min(w, h)
        if not row or _sq_worst(row + [i], areas, side) <= _sq_worst(row, areas, side):
            row.append(i)
            k += 1
        else:
            x, y, w, h = _sq_layout_row(row, areas, x, y, w, h, out)
            row = []
    if row:
        _sq_layout_row(row, areas, x, y, w, h, out)
    return out


def slice_layout(weights, rect: Rect, horizontal: bool) -> list:
    """Single-direction slicing (the treemap's per-level strip layout)."""
    n = len(weights)
    out = [None] * n
    total = sum(w for w in weights if w == w and w > 0)
    if total <= 0:
        return out
    pos = 0.0
    for i, wt in enumerate(weights):
        share = wt / total if wt == wt and wt > 0 else 0.0
        if horizontal:
            out[i] = Rect(rect.x, rect.y + pos * rect.height, rect.width, share * rect.height)
        else:
            out[i] = Rect(rect.x + pos * rect.width, rect.y, share * rect.width, rect.height)
        pos += share
    return out


# --- Scope output pass ----------------------------------------------------------


def emit_scope_output(rctx: RenderContext, run: ScopeRun, ctx: X.Context,
                      viewport: Rect, want_snapshots: bool, trace_vars=None):
    """The output pass: iterate units in order, emit primitives, fold
    variables. Shared verbatim by the direct interpreter and plan replay so
    both produce identical instruction streams. Returns per-unit variable
    snapshots when requested."""
    content = run.content
    units = run.units
    plain = units is None
    n_units = len(run.rows) if plain else len(units)
    record_rects = (run.partition is not None) or (rctx.trace is not None)
    unit_rects = [None] * n_units if record_rects else None
    snapshots = [None] * n_units if want_snapshots else None
    sq_rects = None
    if run.squarify:
        weights = _squarify_weights(rctx, run, ctx)
        sq_rects = squarify_layout(weights, viewport)
        if not any(r is not None for r in sq_rects) and n_units:
            rctx.diag("squarified treemap: no positive weights")
    variables = content.variables
    if not (content.output or variables or run.squarify):
        if want_snapshots:
            base = dict(ctx.variables)
            for ui in range(n_units):
                snapshots[ui] = base
        return unit_rects, snapshots
    # variable initialization precedes the loop; no current row
    ctx.row_index = None
    var_fns = []
    for v in variables:
        try:
            ctx.variables[v.name] = rctx.compile(v.init)(ctx)
        except EvalError as e:
            rctx.diag(f"variable {v.name} init: {e}")
            ctx.variables[v.name] = NAN
        var_fns.append((v.name, rctx.compile(v.iter)))
    cursor_access = rctx.cursor.access
    builtins = ctx.builtins
    rows = run.rows
    output = content.output
    scope_paint = None
    if run.squarify:
        scope_paint = _squarify_paint_plan(rctx, content)
    for ui in range(n_units):
        rctx.tick()
        ctx.unit_index = ui
        if plain:
            rep_row = rows[ui]
        else:
            unit_rows = units[ui]
            rep_row = unit_rows[0] if unit_rows else None
            builtins["recordCount"] = float(len(unit_rows))
        builtins["rowIndex"] = float(ui)
        if rep_row is not None:
            cursor_access(rep_row)
            ctx.row_index = rep_row
        rect = None
        if sq_rects is not None:
            rect = sq_rects[ui]
            if rect is not None:
                _emit_squarify_rect(rctx, ctx, rect, scope_paint)
        for node in output:
            r = _emit_output_node(node, ctx, rctx, viewport, run, record_rects)
            if rect is None and r is not None:
                rect = r
        if record_rects:
            unit_rects[ui] = rect
        if want_snapshots:
            snapshots[ui] = dict(ctx.variables)
        if trace_vars is not None:
            for v in variables:
                trace_vars[v.name].append(ctx.variables[v.name])
        for name, fn in var_fns:
            try:
                ctx.variables[name] = fn(ctx)
            except EvalError as e:
                rctx.diag(f"variable {name} iter: {e}")
                ctx.variables[name] = NAN
    ctx.unit_index = -1
    return unit_rects, snapshots


def _squarify_weights(rctx, run, ctx):
    weight_expr = run.partition.weight
    weight_f = _numeric_wrap(rctx.compile(weight_expr))
    weights = []
    saved_unit = ctx.unit_index
    for ui in range(len(run.units)):
        ctx.unit_index = ui
        w = ctx.aggregate("Sum", weight_expr, weight_f)
        weights.append(w if w == w else 0.0)
    ctx.unit_index = saved_unit
    return weights


def _squarify_paint_plan(rctx, content: Content):
    paint = content.paint
    if paint is None:
        return None
    if paint.color is not None:
        return paint.color
    return (rctx.compile(paint.hue), rctx.compile(paint.saturation),
            rctx.compile(paint.value))


def _emit_squarify_rect(rctx, ctx, rect: Rect, paint_plan):
    if paint_plan is not None:
        if callable(paint_plan[0]):
            try:
                r, g, b = hsv_to_rgb(
                    _coerce_num(paint_plan[0](ctx)),
                    _coerce_num(paint_plan[1](ctx)),
                    _coerce_num(paint_plan[2](ctx)),
                    rctx.sink.diagnostics)
            except EvalError as e:
                rctx.diag(f"paint: {e}")
                r = g = b = None
        else:
            r, g, b = paint_plan
        if r is not None:
            rctx.sink.instructions.append((SET_COLOR, r, g, b))
    rctx.sink.instructions.append(
        (FILL_RECT,) + resolve_device(rect.x, rect.y, rect.width, rect.height,
                                      UNIT_RECT, rctx.device))


# --- Scope build (direct interpretation) ------------------------------------------


def _normalize_key(v):
    if type(v) is float and v != v:
        return None
    if type(v) is bool:
        return 1.0 if v else 0.0
    if type(v) is int:
        return float(v)
    return v


def key_text(v) -> str:
    if v is None:
        return ""
    if type(v) is float:
        return fmt_num(v)
    return str(v)


def _pattern_matches(pattern: tuple, path: tuple) -> bool:
    if len(pattern) > len(path):
        return False
    tail = path[len(path) - len(pattern):]
    for seg, key in zip(pattern, tail):
        if seg != "*" and seg != key:
            return False
    return True


def _children_override(content: Content, path: tuple):
    for node in content.output:
        if isinstance(node, P.Primitive) and node.children is not None:
            for pattern, nodes in node.children.cases:
                if _pattern_matches(pattern, path):
                    return nodes
    return None


def build_scope(rctx: RenderContext, items, rows, depth, path, viewport: Rect,
                sibling_count, vars_base, accums_base, trace_parent=None) -> ScopeRun:
    """Build and run one scope: structure passes, output pass, recursion."""
    rctx.check_deadline()
    content, partition = classify_content(items)
    rctx.scope_counter += 1
    run = ScopeRun(rctx.scope_counter, content, partition, list(rows), depth,
                   path, sibling_count)
    ctx = _make_context(rctx, run, vars_base, accums_base)

    # 1. filters restrict the row set
    for f in content.filters:
        pred = rctx.compile(f.predicate)
        cursor_access = rctx.cursor.access
        kept = []
        for ri in run.rows:
            cursor_access(ri)
            ctx.row_index = ri
            try:
                if X.truthy(pred(ctx)):
                    kept.append(ri)
            except EvalError as e:
                rctx.diag(f"filter: {e}")
        ctx.row_index = None
        run.rows = kept
        run.own_passes += 1
        rctx.tick(len(rows))
    ctx.builtins["recordCount"] = float(len(run.rows))

    # 2. margins shrink the scope viewport
    for m in content.margins:
        try:
            f = _coerce_num(rctx.compile(m.fraction)(ctx))
        except EvalError as e:
            rctx.diag(f"margin: {e}")
            continue
        if f == f and 0 <= f < 0.5:
            viewport = viewport.inset(f)
        else:
            rctx.diag(f"margin {fmt_num(f) if f == f else 'NaN'} ignored")

    # 3. grouping probe: resolve the partition for this row set or strip it
    group_count = None
    if partition is not None:
        group_count = _probe_partition(rctx, run, ctx)
    ctx.builtins["childCount"] = float(
        group_count if run.partition is not None else run.sibling_count)

    # 4. accumulators: one non-output pass each
    for a in content.accums:
        value = _fold_accumulator(a, run.rows, ctx, rctx)
        run.accum_values[a.name] = value
        if a.const is None:
            run.own_passes += 1

    # 5. iteration order: Order or row-level Sort; group sorts follow grouping
    group_sort = False
    if content.order is not None:
        run.own_passes += len([a for a in content.order.accums if a.const is None])
        run.accum_rows = run.rows
        perm = _order_permutation(content.order, run, ctx, rctx)
        run.rows = [run.rows[i] for i in perm]
        for a in content.order.accums:
            ctx.accumulators.pop(a.name, None)
    elif content.sort is not None:
        group_sort = run.partition is not None and (
            bool(content.sort.accums) or X.uses_aggregates(content.sort.key))
        if not group_sort:
            run.own_passes += 1
            run.accum_rows = run.rows
            perm = _row_sort_permutation(content.sort, run, ctx, rctx)
            run.rows = [run.rows[i] for i in perm]

    # 6. units: groups in first-appearance order over the final row order
    if run.partition is not None:
        groups = {}
        order = []
        key_by_row = run.key_by_row
        for ri in run.rows:
            k = key_by_row[ri]
            bucket = groups.get(k)
            if bucket is None:
                groups[k] = bucket = []
                order.append(k)
            bucket.append(ri)
        run.units = [groups[k] for k in order]
        run.unit_keys = order
        ctx.builtins["childCount"] = float(len(run.units))
        if group_sort:
            _sort_groups(rctx, run, ctx, content.sort)
    else:
        run.units = None
        run.unit_keys = None

    # 7. planned value passes for aggregates and local stats
    run.own_passes += len(content.agg_sites) + len(content.local_stat_attrs)

    # 8. output pass
    run.has_output_pass = bool(content.output or content.variables or run.squarify)
    if run.has_output_pass:
        run.own_passes += 1
    trace_vars = None
    strace = None
    if rctx.trace is not None:
        trace_vars = {v.name: [] for v in content.variables}
        strace = ScopeTrace(
            kind=("squarify" if run.squarify else
                  "partition" if run.partition is not None else "plain"),
            depth=depth, path=path, rows=list(run.rows),
            unit_keys=list(run.unit_keys) if run.unit_keys is not None else None,
            unit_rows=[list(u) for u in run.units] if run.units is not None
                      else [[ri] for ri in run.rows],
            unit_rects=[], var_values=trace_vars, accums=dict(run.accum_values),
            var_nodes=list(content.variables), sibling_count=run.sibling_count)
        if trace_parent is None:
            rctx.trace.root = strace
        else:
            trace_parent.children.append(strace)
    want_snapshots = run.partition is not None
    unit_rects, snapshots = emit_scope_output(
        rctx, run, ctx, viewport, want_snapshots, trace_vars)
    if strace is not None:
        strace.unit_rects = list(unit_rects) if unit_rects is not None else []

    # 9. recursion into each group's rectangle
    if run.partition is not None:
        accums_snapshot = dict(ctx.accumulators)
        n_units = len(run.units)
        run.children = [None] * n_units
        for ui in range(n_units):
            child_path = path + (key_text(run.unit_keys[ui]),)
            child_items = _children_override(content, child_path)
            if child_items is None:
                child_items = [run.partition]
            child_viewport = unit_rects[ui] or viewport
            run.children[ui] = build_scope(
                rctx, child_items, run.units[ui], depth + 1, child_path,
                child_viewport, n_units, snapshots[ui], accums_snapshot,
                strace)
    else:
        run.children = []
    return run


def _probe_partition(rctx: RenderContext, run: ScopeRun, ctx):
    """Evaluate the partition key for this row set and decide termination.

    Recursion stops when the scope is a singleton, the key yields null for
    every row, a single group equals the whole set, or maxDepth is reached;
    the body then applies per row (the partition is stripped)."""
    partition = run.partition
    if len(run.rows) <= 1:
        _strip_partition(run, "singleton")
        return None
    if run.depth >= partition.max_depth:
        rctx.diag(f"maxDepth {partition.max_depth} reached at path "
                  f"{'/'.join(run.path) or '<root>'}; recursion stopped")
        _strip_partition(run, "maxDepth")
        return None
    key_f = rctx.compile(partition.key)
    cursor_access = rctx.cursor.access
    key_by_row = {}
    distinct = {}
    for ri in run.rows:
        cursor_access(ri)
        ctx.row_index = ri
        try:
            k = _normalize_key(key_f(ctx))
        except EvalError as e:
            rctx.diag(f"partition key: {e}")
            k = None
        key_by_row[ri] = k
        distinct[k] = True
    ctx.row_index = None
    run.own_passes += 1
    run.probe_pass = True
    rctx.tick(len(run.rows))
    keys = list(distinct)
    if keys == [None]:
        _strip_partition(run, "nullKey")
        return None
    if len(keys) == 1:
        _strip_partition(run, "unchanged")
        return None
    run.key_by_row = key_by_row
    return len(keys)


def _strip_partition(run: ScopeRun, reason: str):
    run.terminal_kind = reason
    run.partition = None
    run.squarify = False


def _sort_groups(rctx: RenderContext, run: ScopeRun, ctx, sort: P.Sort):
    """Order partition groups by a per-group key built from inner
    accumulators and/or aggregates."""
    inner_values = {a.name: [] for a in sort.accums}
    for a in sort.accums:
        if a.const is None:
            run.own_passes += 1
        for unit_rows in run.units:
            inner_values[a.name].append(_fold_accumulator(a, unit_rows, ctx, rctx))
    run.own_passes += 1  # per-group key evaluation (touches representatives)
    key_f = rctx.compile(sort.key)
    keys = []
    cursor_access = rctx.cursor.access
    for ui, unit_rows in enumerate(run.units):
        ctx.unit_index = ui
        for a in sort.accums:
            ctx.accumulators[a.name] = inner_values[a.name][ui]
        ctx.builtins["recordCount"] = float(len(unit_rows))
        if unit_rows:
            cursor_access(unit_rows[0])
            ctx.row_index = unit_rows[0]
        try:
            keys.append(key_f(ctx))
        except EvalError as e:
            rctx.diag(f"group sort key: {e}")
            keys.append(None)
    ctx.unit_index = -1
    ctx.row_index = None
    for a in sort.accums:
        ctx.accumulators.pop(a.name, None)
    ctx.builtins["recordCount"] = float(len(run.rows))
    _check_sort_keys(keys)
    order = list(range(len(keys)))
    normal = [i for i in order if _sort_key_bucket(keys[i]) == 0]
    nans = [i for i in order if _sort_key_bucket(keys[i]) == 1]
    normal.sort(key=lambda i: keys[i], reverse=sort.descending)
    rctx.sort_passes += 1
    perm = normal + nans
    run.units = [run.units[i] for i in perm]
    run.unit_keys = [run.unit_keys[i] for i in perm]


# --- Entry points ------------------------------------------------------------------


def execute(program: P.VizProgram, table: DataTable,
            options: RenderOptions | None = None,
            trace: Trace | None = None) -> tuple[Representation, ComplexityReport]:
    """Direct recursive interpretation of a validated program."""
    options = options or RenderOptions()
    rep = Representation(options.device_width, options.device_height)
    cursor = InstrumentedCursor(table)
    rctx = RenderContext(table, table.schema, options, rep, cursor)
    rctx.trace = trace
    root = build_scope(rctx, program.body, range(table.length), 0, (),
                       options.viewport, 1, {}, {})
    report = ComplexityReport(
        per_row_counts=cursor.counts,
        k_observed=cursor.max_per_row,
        k_planned=root.k_planned(),
        sort_passes=rctx.sort_passes,
        table_length=table.length,
        total_accesses=cursor.total_accesses,
    )
    return rep, report


def replay_scope(rctx: RenderContext, run: ScopeRun, viewport: Rect,
                 vars_base, accums_base):
    """Plan-executor walk over a compiled scope tree: re-fold the
    accumulator passes and re-run the output pass against a fresh cursor,
    keeping the grouping, ordering, and termination decisions baked at
    compile time. Shares emit_scope_output with the direct interpreter, so
    the instruction stream is identical by construction."""
    rctx.check_deadline()
    content = run.content
    ctx = _make_context(rctx, run, vars_base, accums_base)
    ctx.builtins["recordCount"] = float(len(run.rows))
    ctx.builtins["childCount"] = float(
        len(run.units) if run.units is not None else run.sibling_count)
    for m in content.margins:
        try:
            f = _coerce_num(rctx.compile(m.fraction)(ctx))
        except EvalError as e:
            rctx.diag(f"margin: {e}")
            continue
        if f == f and 0 <= f < 0.5:
            viewport = viewport.inset(f)
        else:
            rctx.diag(f"margin {fmt_num(f) if f == f else 'NaN'} ignored")
    accum_rows = run.accum_rows if run.accum_rows is not None else run.rows
    for a in content.accums:
        _fold_accumulator(a, accum_rows, ctx, rctx)
    unit_rects, snapshots = emit_scope_output(
        rctx, run, ctx, viewport, run.partition is not None, None)
    if run.partition is not None:
        accums_snapshot = dict(ctx.accumulators)
        for ui, child in enumerate(run.children):
            child_viewport = unit_rects[ui] or viewport
            replay_scope(rctx, child, child_viewport, snapshots[ui], accums_snapshot)
