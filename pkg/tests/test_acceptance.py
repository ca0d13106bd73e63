"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines. Criteria that name a CLI flag run through the CLI; structural and
equivalence criteria drive the library surface directly.
"""

import math
import random
import time

import pytest

from vizflow import expr as X
from vizflow.cli import main as cli_main
from vizflow.engine import RenderOptions, Trace, execute
from vizflow.gallery import (
    dataset_for,
    gallery_entry,
    list_gallery,
    synth_cities,
    synth_filetree,
)
from vizflow.plan import compile_canonical, execute_plan
from vizflow.program import expand_macro, parse_program, validate
from vizflow.scene import UNIT_RECT, to_svg, to_text
from vizflow.table import load_csv


def report(name: str, detail: str = ""):
    suffix = f" ({detail})" if detail else ""
    print(f"ACCEPTANCE {name}: PASS{suffix}")


NAMES_CSV = "name\njohn\nmary\ntom\n"


# 1 ---------------------------------------------------------------------------


def test_name_list_golden(tmp_path):
    """The name-list program over (john, mary, tom) dumps exactly the
    three-line representation, byte for byte, through the CLI."""
    entry = gallery_entry("name_list")
    (tmp_path / "p.viz").write_text(entry.program_text)
    (tmp_path / "d.csv").write_text(NAMES_CSV)
    dump = tmp_path / "dump.txt"
    code = cli_main([
        "render", "--program", str(tmp_path / "p.viz"),
        "--data", str(tmp_path / "d.csv"),
        "--dump", str(dump), "--width", "800", "--height", "640",
    ])
    assert code == 0
    expected = (
        'drawString("john", 0, 0);\n'
        'drawString("mary", 0, 20);\n'
        'drawString("tom", 0, 40);\n'
    )
    assert dump.read_bytes() == expected.encode()
    report("name-list-golden")


# 2 ---------------------------------------------------------------------------


def test_identity_complexity(tmp_path):
    """The name-list program reads each row exactly once: kObserved = 1 and
    total accesses = Length for Length in {3, 100, 10^4}."""
    import json

    entry = gallery_entry("name_list")
    (tmp_path / "p.viz").write_text(entry.program_text)
    for n in (3, 100, 10_000):
        if n == 3:
            (tmp_path / "d.csv").write_text(NAMES_CSV)
        else:
            (tmp_path / "d.csv").write_text(
                "name\n" + "\n".join(f"row{i}" for i in range(n)) + "\n")
        stats = tmp_path / "stats.json"
        code = cli_main([
            "render", "--program", str(tmp_path / "p.viz"),
            "--data", str(tmp_path / "d.csv"),
            "--stats", str(stats), "--height", "640",
        ])
        assert code == 0
        payload = json.loads(stats.read_text())
        assert payload["kObserved"] == 1, n
        assert payload["totalAccesses"] == n
        assert payload["tableLength"] == n
    report("identity-complexity", "Length in {3, 100, 10000}")


# 3 ---------------------------------------------------------------------------


def test_data_linearity_certificates():
    """Every sort-free gallery program stays within its planned per-row
    bound, and the bound is constant across table sizes at fixed partition
    depth. Exact integer assertions."""
    checked = 0
    for entry in list_gallery():
        if not entry.expected.get("certified", False):
            continue
        planned = []
        for n in (100, 1_000, 10_000):
            table = dataset_for(entry, n=n, seed=3)
            rep, rpt = execute(entry.program(), table, RenderOptions())
            assert rpt.sort_passes == 0, entry.name
            assert rpt.k_observed <= rpt.k_planned, (entry.name, n)
            assert rpt.certified_data_linear, (entry.name, n)
            planned.append(rpt.k_planned)
        assert len(set(planned)) == 1, (entry.name, planned)
        checked += 1
    assert checked >= 8
    report("data-linearity-certificates", f"{checked} sort-free entries x 3 sizes")


# 4 ---------------------------------------------------------------------------


def test_canonical_form_oracle():
    """Direct interpretation and the compiled pass plan produce
    byte-identical dumps for every gallery program x 20 seeds x sizes
    {10, 100, 1000}."""
    opts = RenderOptions(device_width=400, device_height=300)
    entries = list_gallery()
    assert len(entries) >= 10
    tables: dict = {}
    pairs = 0
    for entry in entries:
        for seed in range(20):
            for n in (10, 100, 1000):
                key = (entry.dataset, n, seed)
                table = tables.get(key)
                if table is None:
                    table = tables[key] = dataset_for(entry, n=n, seed=seed)
                prog = entry.program()
                rep_a, _ = execute(prog, table, opts)
                plan = compile_canonical(prog, table, opts)
                rep_b, rpt_b = execute_plan(plan, table, opts)
                assert to_text(rep_a) == to_text(rep_b), (entry.name, seed, n)
                assert rpt_b.k_observed <= rpt_b.k_planned
                pairs += 1
    report("canonical-form-oracle", f"{pairs} render pairs byte-identical")


# 5 ---------------------------------------------------------------------------


def test_adjusted_width_histograms():
    """For random positive populations the adjusted-width rectangles tile
    the unit width: widths sum to 1 within 1e-9 and each width share
    matches the population share within 1e-12 relative error."""
    prog_text = expand_macro(
        "adjusted_parallel_histograms", {"weight": "Population"}).source_text
    for seed in range(20):
        rng = random.Random(seed)
        n = rng.randint(3, 60)
        pops = [rng.uniform(1.0, 1e6) for _ in range(n)]
        csv = "Population\n" + "\n".join(repr(p) for p in pops) + "\n"
        table = load_csv(csv)
        trace = Trace()
        prog = parse_program(prog_text)
        assert validate(prog, table.schema, table) == []
        execute(prog, table, RenderOptions(), trace=trace)
        widths = [r.width for r in trace.root.unit_rects]
        assert len(widths) == n
        total = sum(widths)
        assert abs(total - 1.0) <= 1e-9, seed
        pop_total = sum(pops)
        for w, p in zip(widths, pops):
            expected = p / pop_total
            assert abs(w / total - expected) <= 1e-12 * abs(expected), seed
    report("adjusted-width-histograms", "20 seeds")


# 6 ---------------------------------------------------------------------------


def _walk_tiling(st, viewport, check):
    rects = [r for r in st.unit_rects if r is not None]
    if len(rects) >= 1 and st.kind in ("partition", "plain"):
        check(st, viewport, rects)
    if st.kind in ("partition", "squarify"):
        for ui, child in enumerate(st.children):
            child_viewport = st.unit_rects[ui] if ui < len(st.unit_rects) and \
                st.unit_rects[ui] is not None else viewport
            _walk_tiling(child, child_viewport, check)


def test_treemap_tiling():
    """On a 10^4-file synthetic tree of depth 4: at every node, children
    extents along the split axis sum to the parent extent within 1e-9;
    child interiors are pairwise disjoint; orientation alternates with
    depth parity."""
    prog = gallery_entry("treemap").program()
    nodes_checked = 0

    def check(st, viewport, rects):
        nonlocal nodes_checked
        horizontal = st.depth % 2  # 0: x-slicing, 1: y-slicing
        if horizontal == 0:
            total = sum(r.width for r in rects)
            assert abs(total - viewport.width) <= 1e-9, st.path
            for r in rects:
                assert abs(r.height - viewport.height) <= 1e-9, st.path
            spans = sorted((r.x, r.x + r.width) for r in rects)
        else:
            total = sum(r.height for r in rects)
            assert abs(total - viewport.height) <= 1e-9, st.path
            for r in rects:
                assert abs(r.width - viewport.width) <= 1e-9, st.path
            spans = sorted((r.y, r.y + r.height) for r in rects)
        for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
            assert b0 >= a1 - 1e-9, st.path  # interiors disjoint
        nodes_checked += 1

    for seed in (0, 7):
        table = synth_filetree(10_000, seed=seed, max_depth=4)
        trace = Trace()
        rep, rpt = execute(prog, table, RenderOptions(), trace=trace)
        assert rep.diagnostics == []
        assert rpt.certified_data_linear
        _walk_tiling(trace.root, UNIT_RECT, check)
    assert nodes_checked > 100
    report("treemap-tiling", f"{nodes_checked} nodes on 2 seeds")


# 7 ---------------------------------------------------------------------------


def test_squarified_improvement():
    """On seeded flat weight sets the squarified layout's worst aspect
    ratio never exceeds slice-and-dice's on the same weights."""

    def max_aspect(rects):
        worst = 0.0
        for r in rects:
            if r is not None and r.width > 1e-12 and r.height > 1e-12:
                worst = max(worst, r.width / r.height, r.height / r.width)
        return worst

    sq_prog = gallery_entry("squarified_treemap").program()
    sl_prog = gallery_entry("treemap").program()
    for seed in range(12):
        table = synth_filetree(40, seed=seed, max_depth=1)
        tr_sq = Trace()
        execute(sq_prog, table, RenderOptions(), trace=tr_sq)
        tr_sl = Trace()
        execute(sl_prog, table, RenderOptions(), trace=tr_sl)
        a_sq = max_aspect(tr_sq.root.unit_rects)
        a_sl = max_aspect(tr_sl.root.unit_rects)
        assert a_sq <= a_sl + 1e-9, (seed, a_sq, a_sl)
    report("squarified-improvement", "12 seeds")


# 8 ---------------------------------------------------------------------------


def test_cache_neutrality(tmp_path):
    """Every gallery render yields byte-identical dumps with caching on and
    with --no-cache."""
    for entry in list_gallery():
        table = dataset_for(entry, n=min(entry.default_rows, 60), seed=5)
        (tmp_path / "p.viz").write_text(entry.program_text)
        (tmp_path / "d.csv").write_text(table.to_csv())
        base = ["render", "--program", str(tmp_path / "p.viz"),
                "--data", str(tmp_path / "d.csv")]
        a = tmp_path / "cached.txt"
        b = tmp_path / "uncached.txt"
        assert cli_main(base + ["--dump", str(a)]) == 0, entry.name
        assert cli_main(base + ["--dump", str(b), "--no-cache"]) == 0, entry.name
        assert a.read_bytes() == b.read_bytes(), entry.name
    report("cache-neutrality", "all gallery entries")


# 9 ---------------------------------------------------------------------------


def test_performance_smoke():
    """plot2d over one million synthetic cities renders to SVG in under
    10 seconds (single run; checks the linear pass structure)."""
    table = synth_cities(1_000_000, seed=1)
    prog = gallery_entry("plot2d").program()
    start = time.perf_counter()
    rep, rpt = execute(prog, table, RenderOptions())
    svg = to_svg(rep)
    elapsed = time.perf_counter() - start
    assert rpt.k_observed == 1
    assert svg.count("<ellipse") == 1_000_000
    assert elapsed < 10.0, f"render took {elapsed:.2f}s"
    report("performance-smoke", f"{elapsed:.2f}s for 10^6 rows")


# 10 --------------------------------------------------------------------------


def _reference_fold_check(table, st):
    """Independently re-fold every variable of one scope and compare with
    the observed per-unit values (1e-12 relative tolerance)."""
    if not st.var_nodes:
        return 0
    length = float(table.length)
    n_units = len(st.unit_rows)
    builtins = {
        "Length": length,
        "depth": float(st.depth),
        "childCount": float(n_units if st.kind in ("partition", "squarify")
                            else st.sibling_count),
        "recordCount": float(len(st.rows)),
        "rowIndex": 0.0,
    }
    current_unit = [0]

    def aggregate(kind, arg_expr, arg_f):
        rows = st.unit_rows[current_unit[0]]
        total = 0.0
        count = 0
        sub = X.Context(columns=table.columns, accumulators=dict(st.accums),
                        builtins=dict(builtins), stats=stats)
        for ri in rows:
            sub.row_index = ri
            v = X.evaluate(arg_expr, sub)
            if isinstance(v, float) and v == v:
                total += v
                count += 1
        if kind == "Sum":
            return total
        return total / count if count else math.nan

    def stats(name, scope_kind):
        if scope_kind == "global":
            return table.global_stats(name)
        from vizflow.table import domain_stats

        return domain_stats(table, name, st.rows, "local")

    state = {}
    ctx = X.Context(columns=table.columns, variables=state,
                    accumulators=dict(st.accums), builtins=builtins,
                    stats=stats, aggregate=aggregate)
    ctx.row_index = None
    for v in st.var_nodes:
        state[v.name] = X.evaluate(v.init, ctx)
    checked = 0
    for ui in range(n_units):
        current_unit[0] = ui
        rows = st.unit_rows[ui]
        builtins["rowIndex"] = float(ui)
        if st.kind in ("partition", "squarify"):
            builtins["recordCount"] = float(len(rows))
        ctx.row_index = rows[0] if rows else None
        for v in st.var_nodes:
            observed = st.var_values[v.name][ui]
            expected = state[v.name]
            if isinstance(expected, float) and isinstance(observed, float):
                if expected != expected:
                    assert observed != observed
                else:
                    assert abs(observed - expected) <= 1e-12 * max(1.0, abs(expected))
            else:
                assert observed == expected
            checked += 1
        for v in st.var_nodes:
            state[v.name] = X.evaluate(v.iter, ctx)
    return checked


def _walk_fold(table, st):
    n = _reference_fold_check(table, st)
    for child in st.children:
        n += _walk_fold(table, child)
    return n


def test_variable_and_accumulator_laws():
    """200 random programs from the macro space over small random tables:
    every variable's observed sequence equals an independent left fold of
    its iteration expression, and the predefined Average equals the
    arithmetic mean, both at 1e-12 relative tolerance."""
    rng = random.Random(20260811)
    numeric = ["Population", "Crime", "HousingCost", "Climate", "Latitude", "Longitude"]
    fold_macros = ["histogram", "parallel_histograms",
                   "adjusted_parallel_histograms", "grid_of", "treemap"]
    programs = 0
    folds = 0
    means = 0
    while programs < 140:
        macro = fold_macros[rng.randrange(len(fold_macros))]
        seed = rng.randrange(10_000)
        n = rng.randint(5, 25)
        if macro == "treemap":
            prog = expand_macro("treemap", {"path": "Path", "weight": "FileSize"})
            table = synth_filetree(n, seed=seed, max_depth=rng.randint(1, 3))
        else:
            params = {
                "histogram": lambda: {"attr": rng.choice(numeric)},
                "parallel_histograms": lambda: {
                    "attrs": rng.sample(numeric, rng.randint(2, 4))},
                "adjusted_parallel_histograms": lambda: {
                    "weight": "Population",
                    "attrs": rng.sample(numeric, rng.randint(0, 2))},
                "grid_of": lambda: {"by": "State", "x": rng.choice(numeric),
                                    "y": rng.choice(numeric)},
            }[macro]()
            prog = expand_macro(macro, params)
            table = synth_cities(n, seed=seed)
        assert validate(prog, table.schema, table) == [], macro
        trace = Trace()
        execute(prog, table, RenderOptions(), trace=trace)
        folds += _walk_fold(table, trace.root)
        programs += 1
    while programs < 200:
        seed = rng.randrange(10_000)
        n = rng.randint(8, 30)
        attr = rng.choice(numeric)
        table = synth_cities(n, seed=seed)
        prog = parse_program(
            "Visualization { Partition = $State {\n"
            f"  FillRectangle {{ X = Average(${attr}); Y = 0; "
            "Width = 0.1; Height = 0.1; }\n"
            "} }")
        trace = Trace()
        execute(prog, table, RenderOptions(), trace=trace)
        root = trace.root
        col = table.columns[attr]
        if root.kind == "partition":
            unit_iter = zip(root.unit_rows, root.unit_rects)
        else:
            unit_iter = zip(root.unit_rows, root.unit_rects)
        for rows, rect in unit_iter:
            values = [col[i] for i in rows]
            mean = sum(values) / len(values)
            assert rect is not None
            assert abs(rect.x - mean) <= 1e-12 * max(1.0, abs(mean))
            means += 1
        programs += 1
    assert programs == 200
    report("variable-accumulator-laws",
           f"200 programs, {folds} fold checks, {means} mean checks")
