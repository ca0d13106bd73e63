import math

import pytest

from vizflow import expr as X
from vizflow.engine import (
    RenderOptions,
    Trace,
    complexity_of,
    execute,
    order_rows,
    squarify_layout,
    slice_layout,
)
from vizflow.errors import EngineError
from vizflow.gallery import synth_cities, synth_filetree
from vizflow.program import Accumulator, Order, Sort, parse_program
from vizflow.scene import Rect, UNIT_RECT, to_text
from vizflow.table import AttrType, DataTable, Schema, load_csv


def table_of(**cols):
    attrs = []
    for name, values in cols.items():
        numeric = all(isinstance(v, (int, float)) or v is None for v in values)
        attrs.append((name, AttrType.NUMERIC if numeric else AttrType.TEXT))
        cols[name] = [float(v) if isinstance(v, (int, float)) else v for v in values]
    return DataTable(Schema(tuple(attrs)), cols)


def render(text, table, width=100, height=100, trace=None, cache=True):
    prog = parse_program(text)
    rep, report = execute(prog, table,
                          RenderOptions(device_width=width, device_height=height,
                                        cache=cache),
                          trace=trace)
    return prog, rep, report


# --- direct interpretation basics ------------------------------------------


def test_plot_emits_one_ellipse_per_row_normalized():
    t = table_of(Longitude=[0.0, 5.0, 10.0], Latitude=[0.0, 5.0, 10.0])
    _, rep, report = render(
        "Visualization { FillEllipse { X = $Longitude; Y = $Latitude; "
        "Width = .04; Height = .04; } }", t)
    ellipses = [i for i in rep.instructions if i[0] == "fillEllipse"]
    assert len(ellipses) == 3
    # normalized positions: x = 0, 0.5, 1 of a 100px device
    assert [e[1] for e in ellipses] == [0.0, 50.0, 100.0]
    assert report.k_observed == 1
    assert report.total_accesses == 3
    assert rep.diagnostics == []


def test_parallel_histogram_positions():
    # four rows: outer bars sit at x = 0, .25, .5, .75, each width .25
    t = table_of(Population=[10, 20, 30, 40], Climate=[1, 2, 3, 4], Crime=[4, 3, 2, 1])
    trace = Trace()
    render(
        "Visualization {\n"
        "  Sort = $Population;\n"
        "  Variable { i = { init = 0; iter = i + 1/Length; } }\n"
        "  FillRectangle { X = i; Y = 0; Width = 1/Length; Height = 1; }\n"
        "}", t, trace=trace)
    assert trace.root.var_values["i"] == [0.0, 0.25, 0.5, 0.75]


def test_adjusted_widths_follow_population_shares():
    t = table_of(Population=[1, 3, 4])
    _, rep, report = render(
        "Visualization {\n"
        "  Accumulator { Sum = { init = 0; iter = Sum + $Population; } }\n"
        "  Variable { i = { init = 0; iter = i + $Population/Sum; } }\n"
        "  FillRectangle { X = i; Y = 0; Width = $Population/Sum; Height = 1; }\n"
        "}", t, width=1000)
    rects = [i for i in rep.instructions if i[0] == "fillRectangle"]
    assert [(r[1], r[3]) for r in rects] == [(0.0, 125.0), (125.0, 375.0), (500.0, 500.0)]
    assert report.k_observed == 2
    assert report.certified_data_linear


def test_variable_iterates_after_output():
    t = table_of(v=[7, 7])
    _, rep, _ = render(
        "Visualization { Variable { i = { init = 0; iter = i + 1; } }\n"
        "DrawString { text = \"x\"; X = i; Y = 0; } }", t)
    texts = [i for i in rep.instructions if i[0] == "drawString"]
    assert texts[0][2] == 0.0  # first row sees the init value


def test_filter_restricts_downstream_operators():
    t = table_of(v=[1, 2, 3, 4])
    _, rep, report = render(
        "Visualization {\n"
        "  Filter = $v > 2;\n"
        "  Accumulator { N = { init = 0; iter = N + 1; } }\n"
        "  DrawString { text = N; X = 0; Y = 0; }\n"
        "}", t)
    texts = [i for i in rep.instructions if i[0] == "drawString"]
    assert len(texts) == 2  # rows 3 and 4 survive
    assert texts[0][1] == "2"  # the accumulator only saw filtered rows


def test_paint_precedes_primitive():
    t = table_of(v=[1])
    _, rep, _ = render(
        "Visualization { FillRectangle { X=0; Y=0; Width=1; Height=1;"
        " Paint = black; } }", t)
    assert rep.instructions[0][0] == "setColor"
    assert rep.instructions[0][1:] == (0.0, 0.0, 0.0)
    assert rep.instructions[1][0] == "fillRectangle"


def test_no_paint_means_no_color_instruction():
    t = table_of(v=[1])
    _, rep, _ = render(
        "Visualization { FillRectangle { X=0; Y=0; Width=1; Height=1; } }", t)
    assert [i[0] for i in rep.instructions] == ["fillRectangle"]


def test_hsv_paint_value_zero_is_black():
    t = table_of(Population=[2_000_000, 500])
    _, rep, _ = render(
        "Visualization { FillEllipse { X=0; Y=0; Width=.1; Height=.1;\n"
        "  Paint { hue = .75; saturation = .5; value = $Population > 1M ? 1 : 0; } } }", t)
    colors = [i for i in rep.instructions if i[0] == "setColor"]
    assert colors[0][1:] != (0.0, 0.0, 0.0)  # the 2M city is blue-ish
    assert colors[1][1:] == (0.0, 0.0, 0.0)  # the small city is black


def test_nan_parameter_skips_primitive_with_diagnostic():
    t = table_of(v=[1, None, 3])
    _, rep, _ = render(
        "Visualization { FillRectangle { X = norm($v); Y = 0; Width = .1; Height = .1; } }", t)
    rects = [i for i in rep.instructions if i[0] == "fillRectangle"]
    assert len(rects) == 2
    assert any("NaN" in d.message for d in rep.diagnostics)


def test_nested_primitives_use_local_coordinates():
    t = table_of(v=[1])
    _, rep, _ = render(
        "Visualization { FillRectangle { X = 0.5; Y = 0; Width = 0.5; Height = 1;\n"
        "  FillRectangle { X = 0; Y = 0; Width = 1; Height = 0.5; } } }", t)
    outer, inner = [i for i in rep.instructions if i[0] == "fillRectangle"]
    assert outer[1:] == (50.0, 0.0, 50.0, 100.0)
    # child occupies the parent's lower half: device y = 50..100
    assert inner[1:] == (50.0, 50.0, 50.0, 50.0)


def test_repeat_geometry_binds_index():
    t = table_of(v=[1])
    _, rep, _ = render(
        "Visualization { RepeatGeometry { count = 3; index = k;\n"
        "  Line { X1 = k/4; Y1 = 0; X2 = k/4; Y2 = 1; } } }", t)
    lines = [i for i in rep.instructions if i[0] == "line"]
    assert [l[1] for l in lines] == [0.0, 25.0, 50.0]


def test_margin_insets_scope_viewport():
    t = table_of(v=[1])
    _, rep, _ = render(
        "Visualization { Margin = 0.1; FillRectangle { X=0; Y=0; Width=1; Height=1; } }", t)
    r = rep.instructions[0]
    assert r[1:] == pytest.approx((10.0, 10.0, 80.0, 80.0), abs=1e-9)


def test_polyline_parallel_coordinates_shape():
    t = table_of(a=[1, 2, 3], b=[3, 2, 1])
    _, rep, _ = render(
        "Visualization { Polyline { points = { 0, norm($a), 1, norm($b) }; } }", t)
    polys = [i for i in rep.instructions if i[0] == "polyline"]
    assert len(polys) == 3
    # first row: a=min -> y=0 -> device 100; b=max -> y=1 -> device 0
    assert polys[0][1] == ((0.0, 100.0), (100.0, 0.0))


# --- ordering ----------------------------------------------------------------


def test_sort_ascending_permutation():
    t = table_of(Population=[3, 1, 2])
    perm = order_rows(Sort(X.parse_expr("$Population")), t)
    assert perm == [1, 2, 0]


def test_sort_stability_on_equal_keys():
    t = table_of(v=[5, 5, 1])
    perm = order_rows(Sort(X.parse_expr("$v")), t)
    assert perm == [2, 0, 1]


def test_sort_descending_stable():
    t = table_of(v=[1, 5, 5])
    perm = order_rows(Sort(X.parse_expr("$v"), descending=True), t)
    assert perm == [1, 2, 0]


def test_sort_nan_keys_go_last():
    t = table_of(v=[2, None, 1])
    perm = order_rows(Sort(X.parse_expr("$v")), t)
    assert perm == [2, 0, 1]


def test_sort_mixed_types_rejected():
    t = table_of(v=[1, "x"])
    with pytest.raises(EngineError, match="mix"):
        order_rows(Sort(X.parse_expr("$v")), t)


def test_order_applies_permutation():
    t = table_of(v=[10, 20, 30])
    node = Order(accums=[], result=X.parse_expr("{2, 1, 0}"))
    assert order_rows(node, t) == [2, 1, 0]


def test_order_with_accumulator_pass():
    t = table_of(v=[10, 20, 30])
    node = Order(
        accums=[Accumulator("Idx", init=X.parse_expr("{}"),
                            iter=X.parse_expr("{rowIndex, Idx[0], Idx[1]}"))],
        result=X.parse_expr("Idx"))
    assert order_rows(node, t) == [2, 1, 0]


def test_order_rejects_duplicate_index():
    t = table_of(v=[1, 2, 3])
    node = Order(accums=[], result=X.parse_expr("{0, 0, 2}"))
    with pytest.raises(EngineError, match="repeats index 0"):
        order_rows(node, t)


def test_order_rejects_missing_index():
    t = table_of(v=[1, 2, 3])
    node = Order(accums=[], result=X.parse_expr("{0, 2}"))
    with pytest.raises(EngineError, match="misses index 1"):
        order_rows(node, t)


def test_group_sort_by_inner_sum():
    # groups a (sum 4) and b (sum 8); ascending puts a first even though b
    # appears first in the data
    t = table_of(g=["b", "b", "a", "a"], w=[3, 5, 1, 3])
    trace = Trace()
    render(
        "Visualization { Partition = $g {\n"
        "  Sort { key = S; Accumulator { S = { init = 0; iter = S + $w; } } }\n"
        "  FillRectangle { X = 0; Y = 0; Width = 1; Height = 1; }\n"
        "} }", t, trace=trace)
    assert trace.root.unit_keys == ["a", "b"]


def test_row_sort_inside_partition_orders_groups_by_first_appearance():
    t = table_of(g=["b", "a", "b", "a"], w=[4, 3, 2, 1])
    trace = Trace()
    render(
        "Visualization { Partition = $g {\n"
        "  Sort = $w;\n"
        "  FillRectangle { X = 0; Y = 0; Width = 1; Height = 1; }\n"
        "} }", t, trace=trace)
    # sorted rows: w=1 (a), 2 (b), 3 (a), 4 (b) -> 'a' appears first
    assert trace.root.unit_keys == ["a", "b"]
    assert trace.root.unit_rows == [[3, 1], [2, 0]]


# --- partitions, recursion, termination ---------------------------------------


def test_partition_groups_cover_and_are_disjoint():
    t = synth_cities(60, seed=9)
    trace = Trace()
    render(
        "Visualization { Partition = $State { "
        "FillRectangle { X=0; Y=0; Width=1; Height=1; } } }", t, trace=trace)
    groups = trace.root.unit_rows
    flat = [ri for g in groups for ri in g]
    assert sorted(flat) == list(range(60))
    assert len(flat) == len(set(flat))
    # first-appearance order of keys
    states = t.columns["State"]
    seen = []
    for s in states:
        if s not in seen:
            seen.append(s)
    assert trace.root.unit_keys == seen


def test_unchanged_partition_recurses_per_row_inside_group_rect():
    # one state only: the root partition collapses to a per-row scope
    t = table_of(State=["CA", "CA", "CA"], Longitude=[1, 2, 3], Latitude=[1, 2, 3])
    trace = Trace()
    _, rep, _ = render(
        "Visualization { Partition = $State {\n"
        "  FillRectangle { X = Average(norm($Longitude)) - 0.05; "
        "Y = Average(norm($Latitude)) - 0.05; Width = 0.1; Height = 0.1; }\n"
        "} }", t, trace=trace)
    root = trace.root
    assert root.kind == "plain"  # single group == whole set, stripped
    rects = [i for i in rep.instructions if i[0] == "fillRectangle"]
    assert len(rects) == 3  # one per city


def test_state_grouping_nests_city_plot_inside_state_rect():
    t = table_of(State=["CA", "CA", "NY", "NY"],
                 Longitude=[0, 2, 8, 10], Latitude=[0, 2, 8, 10])
    trace = Trace()
    _, rep, _ = render(
        "Visualization { Partition = $State {\n"
        "  FillRectangle { X = Average(norm($Longitude)) - 0.05; "
        "Y = Average(norm($Latitude)) - 0.05; Width = 0.1; Height = 0.1; }\n"
        "} }", t, trace=trace)
    root = trace.root
    assert root.kind == "partition"
    assert root.unit_keys == ["CA", "NY"]
    # state rect at the group's average normalized position
    ca_rect = root.unit_rects[0]
    assert ca_rect.x == pytest.approx(0.1 - 0.05, abs=1e-12)  # mean(0, .2) - .05
    # recursion: each state scope re-applies per row INSIDE the state rect
    # (positions are never clamped, so only the rect centers must stay inside)
    ca_child = root.children[0]
    assert ca_child.kind == "plain"
    for r in ca_child.unit_rects:
        cx = r.x + r.width / 2
        cy = r.y + r.height / 2
        assert ca_rect.x - 1e-9 <= cx <= ca_rect.x + ca_rect.width + 1e-9
        assert ca_rect.y - 1e-9 <= cy <= ca_rect.y + ca_rect.height + 1e-9


def test_children_override_matches_specific_case_first():
    t = table_of(State=["CA", "CA", "NY"], HousingCost=[1, 2, 3], Climate=[1, 2, 3])
    trace = Trace()
    _, rep, _ = render(
        "Visualization { Partition = $State {\n"
        "  FillRectangle { X = 0; Y = 0; Width = 1; Height = 1;\n"
        "    Children {\n"
        "      CA { DrawString { text = \"special\"; X = 0; Y = 0; } }\n"
        "      *  { DrawString { text = \"plain\"; X = 0; Y = 0; } }\n"
        "    }\n"
        "  }\n"
        "} }", t, trace=trace)
    texts = [i[1] for i in rep.instructions if i[0] == "drawString"]
    assert texts == ["special", "special", "plain"]


def test_null_partition_key_terminates_recursion():
    t = table_of(Path=["a", "b"], FileSize=[3, 1])
    trace = Trace()
    render(
        "Visualization { Partition = split($Path, \"/\")[depth] {\n"
        "  FillRectangle { X = 0; Y = 0; Width = Sum($FileSize); Height = 1; }\n"
        "} }", t, trace=trace)
    # children of the singleton groups are per-row scopes
    for child in trace.root.children:
        assert child.kind == "plain"


def test_max_depth_stops_recursion_with_diagnostic():
    t = table_of(g=["a", "a", "b", "b"], v=[1, 2, 3, 4])
    # multi-row groups would re-partition at depth 1, but maxDepth caps it
    _, rep, _ = render(
        "Visualization { Partition { key = $g; maxDepth = 1;\n"
        "  FillRectangle { X = 0; Y = 0; Width = 1; Height = 1; }\n"
        "} }", t)
    assert any("maxDepth" in d.message for d in rep.diagnostics)


def test_record_count_and_child_count_builtins():
    t = table_of(g=["a", "a", "a", "b", "b"], v=[1, 2, 3, 4, 5])
    trace = Trace()
    _, rep, _ = render(
        "Visualization { Partition = $g {\n"
        "  DrawString { text = childCount; X = recordCount; Y = 0; }\n"
        "} }", t, trace=trace)
    texts = [i for i in rep.instructions if i[0] == "drawString"]
    # the scope's own output pass runs per group first; the default
    # recursion then re-applies the body per row inside each group
    assert [i[1] for i in texts] == ["2"] * 7
    assert [i[2] for i in texts[:2]] == [300.0, 200.0]
    assert [i[2] for i in texts[2:]] == [300.0] * 3 + [200.0] * 2


# --- accumulators and aggregates ----------------------------------------------


def test_predefined_average_matches_mean():
    t = synth_cities(37, seed=5)
    trace = Trace()
    render(
        "Visualization { Partition = $State {\n"
        "  FillRectangle { X = Average($Population); Y = 0; Width = .1; Height = .1; }\n"
        "} }", t, trace=trace)
    root = trace.root
    states = t.columns["State"]
    pops = t.columns["Population"]
    for key, rows in zip(root.unit_keys, root.unit_rows):
        values = [pops[i] for i in rows]
        mean = sum(values) / len(values)
        # the rect x is the raw mean composed into the viewport; compare via rect
        ui = root.unit_keys.index(key)
        assert root.unit_rects[ui].x == pytest.approx(mean, rel=1e-12)


def test_accumulator_end_expression():
    t = table_of(v=[2, 4, 6])
    trace = Trace()
    render(
        "Visualization {\n"
        "  Accumulator { M = { init = 0; iter = M + $v; end = M / recordCount; } }\n"
        "  FillRectangle { X = M; Y = 0; Width = .1; Height = .1; }\n"
        "}", t, trace=trace)
    assert trace.root.accums["M"] == pytest.approx(4.0, rel=1e-12)


def test_accumulator_sequence_dependency():
    t = table_of(v=[1, 2, 3])
    trace = Trace()
    render(
        "Visualization {\n"
        "  Accumulator { A = { init = 0; iter = A + $v; } B = { init = 0; iter = B + A; } }\n"
        "  FillRectangle { X = 0; Y = 0; Width = 1; Height = 1; }\n"
        "}", t, trace=trace)
    # B folds with A already final (A = 6): B = 18
    assert trace.root.accums["A"] == 6.0
    assert trace.root.accums["B"] == 18.0


def test_variable_fold_law_against_reference_fold():
    # independent reference: left-fold the iter expression over the
    # iteration order using the bare evaluator
    t = table_of(v=[3, 1, 4, 1, 5])
    trace = Trace()
    prog, rep, _ = render(
        "Visualization {\n"
        "  Sort = $v;\n"
        "  Variable { i = { init = 0; iter = i + $v/10; } }\n"
        "  FillRectangle { X = i; Y = 0; Width = .1; Height = .1; }\n"
        "}", t, trace=trace)
    observed = trace.root.var_values["i"]
    order = trace.root.rows
    init = X.parse_expr("0")
    it = X.parse_expr("i + $v/10")
    value = X.evaluate(init, X.Context())
    expected = []
    for ri in order:
        expected.append(value)
        ctx = X.Context(row_index=ri, columns=t.columns, variables={"i": value})
        value = X.evaluate(it, ctx)
    assert observed == pytest.approx(expected, rel=1e-12)


# --- caching -------------------------------------------------------------------


def test_cache_neutral_output():
    t = synth_filetree(60, seed=2, max_depth=3)
    text = (
        "Visualization { Partition = split($Path, \"/\")[depth] {\n"
        "  Accumulator { Total = { init = 0; iter = Total + $FileSize; } }\n"
        "  Variable { P = { init = 0; iter = P + Sum($FileSize)/Total; } }\n"
        "  FillRectangle { X = P; Y = 0; Width = Sum($FileSize)/Total; Height = 1; }\n"
        "} }")
    _, rep_on, _ = render(text, t, cache=True)
    _, rep_off, _ = render(text, t, cache=False)
    assert to_text(rep_on) == to_text(rep_off)


def test_determinism_byte_identical():
    t = synth_cities(50, seed=4)
    text = "Visualization { FillEllipse { X=$Longitude; Y=$Latitude; Width=.04; Height=.04; } }"
    _, rep1, _ = render(text, t)
    _, rep2, _ = render(text, t)
    assert to_text(rep1) == to_text(rep2)


# --- squarified layout -----------------------------------------------------------


def test_squarify_tiles_exactly():
    weights = [6.0, 6.0, 4.0, 3.0, 2.0, 2.0, 1.0]
    rects = squarify_layout(weights, Rect(0, 0, 1, 1))
    total_area = sum(r.width * r.height for r in rects if r)
    assert total_area == pytest.approx(1.0, abs=1e-9)
    # pairwise disjoint interiors
    for i, a in enumerate(rects):
        for b in rects[i + 1:]:
            ix = max(0.0, min(a.x + a.width, b.x + b.width) - max(a.x, b.x))
            iy = max(0.0, min(a.y + a.height, b.y + b.height) - max(a.y, b.y))
            assert ix * iy < 1e-9


def test_squarify_beats_slicing_on_aspect():
    import random

    for seed in range(10):
        rng = random.Random(seed)
        weights = [rng.uniform(1, 100) for _ in range(30)]
        sq = squarify_layout(weights, Rect(0, 0, 1, 1))
        sl = slice_layout(weights, Rect(0, 0, 1, 1), horizontal=False)

        def max_aspect(rects):
            worst = 0.0
            for r in rects:
                if r and r.width > 0 and r.height > 0:
                    worst = max(worst, r.width / r.height, r.height / r.width)
            return worst

        assert max_aspect(sq) <= max_aspect(sl) + 1e-9, f"seed {seed}"


def test_squarified_treemap_scope():
    t = table_of(Path=["a", "b", "c", "d"], FileSize=[8, 4, 2, 2])
    trace = Trace()
    _, rep, report = render(
        "Visualization { SquarifiedTreemap { key = split($Path, \"/\")[depth]; "
        "weight = $FileSize; } }", t, trace=trace)
    rects = [i for i in rep.instructions if i[0] == "fillRectangle"]
    assert len(rects) == 4
    assert report.certified_data_linear
    area = sum(r.width * r.height for r in trace.root.unit_rects if r)
    assert area == pytest.approx(1.0, abs=1e-9)


# --- complexity ------------------------------------------------------------------


def test_complexity_of_shape():
    t = table_of(v=[1, 2])
    _, _, report = render(
        "Visualization { FillRectangle { X=0; Y=0; Width=1; Height=1; } }", t)
    info = complexity_of(report)
    assert info == {"kObserved": 1, "certifiedDataLinear": True}


def test_sort_disqualifies_certificate():
    t = table_of(v=[2, 1])
    _, _, report = render(
        "Visualization { Sort = $v; FillRectangle { X=0; Y=0; Width=1; Height=1; } }", t)
    assert report.sort_passes == 1
    assert not report.certified_data_linear


def test_local_norm_uses_group_domain():
    t = table_of(g=["a", "a", "b", "b"], v=[0, 10, 100, 200])
    _, rep, _ = render(
        "Visualization { Partition = $g {\n"
        "  FillRectangle { X = 0; Y = 0; Width = 1; Height = 1;\n"
        "    Children { * { FillRectangle { X = norm($v, linear, local); Y = 0;"
        " Width = .1; Height = .1; } } }\n"
        "  }\n"
        "} }", t)
    rects = [i for i in rep.instructions if i[0] == "fillRectangle"]
    inner = rects[2:]
    # each group normalizes against its own min/max: positions 0 and 1 locally
    assert [r[1] for r in inner] == [0.0, 100.0, 0.0, 100.0]


def test_timeout_aborts_render():
    t = synth_cities(200_000, seed=1)
    prog = parse_program(
        "Visualization { FillEllipse { X=$Longitude; Y=$Latitude; Width=.01; Height=.01; } }")
    with pytest.raises(EngineError, match="timed out"):
        execute(prog, t, RenderOptions(timeout=1e-9))
