"""Built-in gallery: one program per supported display scheme, plus seeded
synthetic dataset generators for desk-scale testing.

The real city/file/web-log datasets behind the original figures are not
bundled; every gallery entry renders against a deterministic synthetic
table with the same schema.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .errors import VizError
from .program import VizProgram, expand_macro, parse_program
from .table import AttrType, DataTable, Schema

STATES = ("CA", "NY", "TX", "FL", "WA", "IL", "CO", "GA", "OR", "MA")

CITY_ATTRS = ("name", "State", "Population", "Crime", "HousingCost",
              "Climate", "Latitude", "Longitude")


@dataclass(frozen=True)
class GalleryEntry:
    name: str
    title: str
    program_text: str
    dataset: str          # "cities" | "filetree" | "filetree_flat"
    default_rows: int
    expected: dict = field(default_factory=dict)

    def program(self) -> VizProgram:
        return parse_program(self.program_text)


NAME_LIST_TEXT = """\
Visualization {
  Variable { i = { init = 0; iter = i + 1; } }
  DrawString {
    text = $name;
    X = 0;
    Y = 1 - i/32;
  }
}
"""

HIGHLIGHTED_PLOT_TEXT = """\
Visualization {
  FillEllipse {
    X = $Longitude;
    Y = $Latitude;
    Width = 0.04;
    Height = 0.04;
    Paint {
      hue = 0.75;
      saturation = 0.5;
      value = $Population > 1M ? 1 : 0;
    }
  }
}
"""

EMBEDDED_BARS_TEXT = """\
Visualization {
  FillRectangle {
    X = $Longitude;
    Y = $Latitude;
    Width = 0.06;
    Height = 0.06;
    FillRectangle {
      X = 0;
      Y = 0;
      Width = 0.5;
      Height = $Crime;
    }
    FillRectangle {
      X = 0.5;
      Y = 0;
      Width = 0.5;
      Height = $Climate;
    }
  }
}
"""

STATE_GROUPING_TEXT = """\
Visualization {
  Partition = $State {
    FillRectangle {
      X = Average(norm($Longitude)) - 0.05;
      Y = Average(norm($Latitude)) - 0.05;
      Width = 0.1;
      Height = 0.1;
    }
  }
}
"""


def _entries() -> list[GalleryEntry]:
    def macro_text(name, **params):
        return expand_macro(name, params).source_text

    return [
        GalleryEntry(
            "name_list", "Name list (the one-below-the-other string dump)",
            NAME_LIST_TEXT, "cities", 3,
            expected={"kPlanned": 1, "certified": True}),
        GalleryEntry(
            "plot2d", "2D plot of city coordinates",
            macro_text("plot2d", x="Longitude", y="Latitude"), "cities", 60,
            expected={"kPlanned": 1, "certified": True}),
        GalleryEntry(
            "highlighted_plot", "2D plot highlighting cities above 1M inhabitants",
            HIGHLIGHTED_PLOT_TEXT, "cities", 60,
            expected={"kPlanned": 1, "certified": True}),
        GalleryEntry(
            "embedded_bars", "2D plot of two-valued bar charts",
            EMBEDDED_BARS_TEXT, "cities", 40,
            expected={"kPlanned": 1, "certified": True}),
        GalleryEntry(
            "parallel_histograms", "Parallel histograms (population-sorted bars)",
            macro_text("parallel_histograms", attrs=["Population", "Climate", "Crime"]),
            "cities", 40,
            expected={"kPlanned": 2, "certified": False}),
        GalleryEntry(
            "adjusted_parallel_histograms",
            "Adjusted-width parallel histograms (width is the population share)",
            macro_text("adjusted_parallel_histograms", weight="Population",
                       attrs=["Climate", "Crime"]),
            "cities", 40,
            expected={"kPlanned": 2, "certified": True}),
        GalleryEntry(
            "state_grouping", "States as rectangles at their cities' mean position",
            STATE_GROUPING_TEXT, "cities", 60,
            expected={"certified": True}),
        GalleryEntry(
            "grid_of_plots", "Grid of per-state 2D plots (CA drawn on black)",
            macro_text("grid_of", by="State", x="HousingCost", y="Climate",
                       special="CA"),
            "cities", 80,
            expected={"certified": True}),
        GalleryEntry(
            "treemap", "File treemap with alternating packing direction",
            macro_text("treemap", path="Path", weight="FileSize"),
            "filetree", 120,
            expected={"certified": True}),
        GalleryEntry(
            "squarified_treemap", "Squarified file treemap",
            macro_text("squarified_treemap", path="Path", weight="FileSize"),
            "filetree", 120,
            expected={"certified": True}),
        GalleryEntry(
            "parallel_coordinates", "Parallel coordinates over four attributes",
            macro_text("parallel_coordinates",
                       attrs=["Population", "Climate", "Crime", "HousingCost"]),
            "cities", 40,
            expected={"kPlanned": 1, "certified": True}),
    ]


_GALLERY: dict[str, GalleryEntry] | None = None


def list_gallery() -> list[GalleryEntry]:
    global _GALLERY
    if _GALLERY is None:
        _GALLERY = {e.name: e for e in _entries()}
    return list(_GALLERY.values())


def gallery_entry(name: str) -> GalleryEntry:
    list_gallery()
    entry = _GALLERY.get(name)
    if entry is None:
        raise VizError(f"unknown gallery entry {name!r}")
    return entry


def dataset_for(entry: GalleryEntry, n: int | None = None, seed: int = 1) -> DataTable:
    n = n or entry.default_rows
    if entry.dataset == "cities":
        return synth_cities(n, seed)
    if entry.dataset == "filetree":
        return synth_filetree(n, seed, max_depth=4)
    if entry.dataset == "filetree_flat":
        return synth_filetree(n, seed, max_depth=1)
    raise VizError(f"unknown dataset {entry.dataset!r}")


# --- Synthetic datasets -------------------------------------------------------


def synth_cities(n: int, seed: int = 1) -> DataTable:
    """Deterministic city-statistics table with the eight classic attributes.

    States come from a fixed ten-symbol set (including CA); populations span
    three decades so some cities exceed one million inhabitants.
    """
    if n < 1:
        raise VizError("synth_cities needs n >= 1")
    rng = random.Random(seed)
    names = [f"city{i:05d}" for i in range(n)]
    states = [STATES[rng.randrange(len(STATES))] for _ in range(n)]
    population = [float(int(10 ** rng.uniform(3.5, 7.2))) for _ in range(n)]
    crime = [round(rng.uniform(0.0, 100.0), 3) for _ in range(n)]
    housing = [float(int(rng.uniform(60_000, 900_000))) for _ in range(n)]
    climate = [round(rng.uniform(0.0, 100.0), 3) for _ in range(n)]
    latitude = [round(rng.uniform(25.0, 49.0), 4) for _ in range(n)]
    longitude = [round(rng.uniform(-124.0, -67.0), 4) for _ in range(n)]
    schema = Schema((
        ("name", AttrType.TEXT),
        ("State", AttrType.TEXT),
        ("Population", AttrType.NUMERIC),
        ("Crime", AttrType.NUMERIC),
        ("HousingCost", AttrType.NUMERIC),
        ("Climate", AttrType.NUMERIC),
        ("Latitude", AttrType.NUMERIC),
        ("Longitude", AttrType.NUMERIC),
    ))
    return DataTable(schema, {
        "name": names,
        "State": states,
        "Population": population,
        "Crime": crime,
        "HousingCost": housing,
        "Climate": climate,
        "Latitude": latitude,
        "Longitude": longitude,
    })


def synth_filetree(n: int, seed: int = 0, max_depth: int = 4) -> DataTable:
    """Deterministic file table: unique '/'-separated paths (directories are
    implicit, so no path prefixes another) and positive file sizes.

    The first path always reaches max_depth, keeping the discovered
    partition depth - and with it the planned pass bound - independent of
    the table size.
    """
    if n < 1:
        raise VizError("synth_filetree needs n >= 1")
    if max_depth < 1:
        raise VizError("synth_filetree needs max_depth >= 1")
    rng = random.Random(seed)
    paths = []
    sizes = []
    for i in range(n):
        depth = max_depth if i == 0 else rng.randint(1, max_depth)
        parts = [f"d{rng.randrange(3)}" for _ in range(depth - 1)]
        parts.append(f"f{i}.dat")
        paths.append("/".join(parts))
        sizes.append(float(rng.randint(1, 1000)))
    schema = Schema((("Path", AttrType.TEXT), ("FileSize", AttrType.NUMERIC)))
    return DataTable(schema, {"Path": paths, "FileSize": sizes})
