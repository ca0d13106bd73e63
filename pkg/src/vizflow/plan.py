"""Canonical pass-plan form: instance-aware lowering of a program into a
flat, predetermined schedule of passes over the table, plus its executor.

Compilation runs a structure-discovery render over the actual table (the
attributes' finite domains make the recursion depth resolvable per
instance), which fixes every grouping, ordering, and termination decision.
The resulting plan lists one entry per pass; executing it re-runs only the
value passes (accumulator folds, aggregate folds, output loops) against a
fresh instrumented cursor, so the observed per-row access count stays
within the planned bound, and the instruction stream is identical to the
direct interpreter's.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import expr as X
from . import program as P
from .engine import (
    ComplexityReport, RenderContext, RenderOptions, ScopeRun, build_scope,
    replay_scope,
)
from .errors import EngineError, VizError
from .scene import Representation
from .table import DataTable, InstrumentedCursor


@dataclass(frozen=True)
class PassSpec:
    """One pass of the canonical schedule (descriptor; the executable
    structure lives in the compiled scope tree)."""

    kind: str      # filter | partition-key | accumulator | sort-key |
                   # group-sort | order-accumulator | aggregate |
                   # domain-stats | output
    detail: str
    depth: int
    path: tuple
    row_count: int


@dataclass
class PassPlan:
    """Compiled schedule for one (program, table) pair.

    k_planned is the per-row pass bound: the maximum, over rows, of the
    number of passes that can touch that row. sort_passes counts the
    comparison sorts the schedule contains; any nonzero count marks the
    plan non-certifying.
    """

    root: ScopeRun
    passes: list
    k_planned: int
    sort_passes: int
    table_length: int
    schema_names: tuple
    program: P.VizProgram = field(repr=False, default=None)

    @property
    def certifying(self) -> bool:
        return self.sort_passes == 0


def _scope_passes(run: ScopeRun, out: list):
    c = run.content
    meta = dict(depth=run.depth, path=run.path, row_count=len(run.rows))
    n_before = len(out)
    for _ in c.filters:
        out.append(PassSpec("filter", "", **meta))
    if run.probe_pass:
        out.append(PassSpec("partition-key", "", **meta))
    for a in c.accums:
        if a.const is None:
            out.append(PassSpec("accumulator", a.name, **meta))
    if c.order is not None:
        for a in c.order.accums:
            if a.const is None:
                out.append(PassSpec("order-accumulator", a.name, **meta))
    elif c.sort is not None:
        group_sort = run.partition is not None and (
            bool(c.sort.accums) or _sort_uses_aggregates(c.sort))
        if group_sort:
            for a in c.sort.accums:
                if a.const is None:
                    out.append(PassSpec("order-accumulator", a.name, **meta))
            out.append(PassSpec("group-sort", "", **meta))
        else:
            out.append(PassSpec("sort-key", "", **meta))
    for kind, text in c.agg_sites:
        out.append(PassSpec("aggregate", f"{kind}({text})", **meta))
    for name in c.local_stat_attrs:
        out.append(PassSpec("domain-stats", name, **meta))
    if run.has_output_pass:
        out.append(PassSpec("output", "", **meta))
    if len(out) - n_before != run.own_passes:
        raise EngineError(
            f"pass accounting drift at path {'/'.join(run.path) or '<root>'}: "
            f"{len(out) - n_before} descriptors vs {run.own_passes} planned")
    for child in run.children:
        if child is not None:
            _scope_passes(child, out)


def _sort_uses_aggregates(sort: P.Sort) -> bool:
    return X.uses_aggregates(sort.key)


def compile_canonical(program: P.VizProgram, table: DataTable,
                      options: RenderOptions | None = None) -> PassPlan:
    """Lower a validated program into the flat pass schedule for ``table``.

    Discovery interprets the program once over the table with a throwaway
    output sink and its own cursor; the render itself is not instrumented
    into the returned plan's accounting.
    """
    options = options or RenderOptions()
    rep = Representation(options.device_width, options.device_height)
    cursor = InstrumentedCursor(table)
    rctx = RenderContext(table, table.schema, options, rep, cursor)
    root = build_scope(rctx, program.body, range(table.length), 0, (),
                       options.viewport, 1, {}, {})
    passes: list[PassSpec] = []
    _scope_passes(root, passes)
    return PassPlan(
        root=root,
        passes=passes,
        k_planned=root.k_planned(),
        sort_passes=rctx.sort_passes,
        table_length=table.length,
        schema_names=tuple(table.schema.names),
        program=program,
    )


def execute_plan(plan: PassPlan, table: DataTable,
                 options: RenderOptions | None = None):
    """Run a compiled plan over the table it was compiled for.

    Per pass: the baked order input supplies the row indices; each row is
    accessed once and the per-row work re-runs. The representation is
    instruction-for-instruction identical to direct execution.
    """
    if table.length != plan.table_length or tuple(table.schema.names) != plan.schema_names:
        raise VizError("plan was compiled for a different table")
    options = options or RenderOptions()
    rep = Representation(options.device_width, options.device_height)
    cursor = InstrumentedCursor(table)
    rctx = RenderContext(table, table.schema, options, rep, cursor)
    replay_scope(rctx, plan.root, options.viewport, {}, {})
    report = ComplexityReport(
        per_row_counts=cursor.counts,
        k_observed=cursor.max_per_row,
        k_planned=plan.k_planned,
        sort_passes=plan.sort_passes,
        table_length=table.length,
        total_accesses=cursor.total_accesses,
    )
    return rep, report
