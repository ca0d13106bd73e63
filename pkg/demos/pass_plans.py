"""Canonical pass plans: compile gallery programs for a concrete table,
inspect their schedules, and confirm the plan executor reproduces the
direct interpreter byte for byte.
"""

import vizflow as V
from vizflow.engine import RenderOptions, execute
from vizflow.gallery import dataset_for

opts = RenderOptions(device_width=640, device_height=480)

for name in ("plot2d", "adjusted_parallel_histograms", "parallel_histograms", "treemap"):
    entry = V.gallery_entry(name)
    table = dataset_for(entry, n=300, seed=2)
    program = entry.program()
    plan = V.compile_canonical(program, table, opts)

    rep_direct, report_direct = execute(program, table, opts)
    rep_planned, report_planned = V.execute_plan(plan, table, opts)
    identical = V.to_text(rep_direct) == V.to_text(rep_planned)

    kinds = {}
    for p in plan.passes:
        kinds[p.kind] = kinds.get(p.kind, 0) + 1
    print(f"{name}:")
    print(f"  passes: {kinds} (total {len(plan.passes)})")
    print(f"  per-row bound kPlanned={plan.k_planned}, "
          f"observed={report_planned.k_observed}, "
          f"sortPasses={plan.sort_passes}, "
          f"certified={report_planned.certified_data_linear}")
    print(f"  plan output identical to direct interpreter: {identical}")
