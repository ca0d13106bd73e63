"""Render the 2D-plot family over synthetic city statistics.

Walks from the bare scatter plot to a conditional palette and embedded
per-city bar charts, writing one SVG per step next to this script.
"""

from pathlib import Path

import vizflow as V

OUT = Path(__file__).parent
cities = V.synth_cities(400, seed=7)

# Plain scatter: bare numeric attributes are implicitly normalized, so
# longitude/latitude land in the unit square without any scaling code.
plot = V.gallery_entry("plot2d")
rep, report = V.execute(plot.program(), cities)
(OUT / "cities_plot.svg").write_text(V.to_svg(rep))
print(f"plot2d: {rep.geometric_count()} ellipses, "
      f"kObserved={report.k_observed}, certified={report.certified_data_linear}")

# Conditional paint: cities above one million inhabitants get a blue hue.
highlighted = V.gallery_entry("highlighted_plot")
rep, report = V.execute(highlighted.program(), cities)
(OUT / "cities_highlighted.svg").write_text(V.to_svg(rep))
millionaires = sum(1 for p in cities.columns["Population"] if p > 1e6)
print(f"highlighted_plot: {millionaires} cities above 1M, still one pass "
      f"(kObserved={report.k_observed})")

# Nested primitives: each city's rectangle hosts two bars drawn in the
# rectangle's own coordinate system.
bars = V.gallery_entry("embedded_bars")
rep, report = V.execute(bars.program(), cities)
(OUT / "cities_bars.svg").write_text(V.to_svg(rep))
print(f"embedded_bars: {rep.geometric_count()} rectangles from "
      f"{cities.length} rows, kPlanned={report.k_planned}")
