// Client-side macro templates: the dropdown-driven way to build programs.
// These mirror the engine's built-in macros; only program TEXT is produced
// here - rendering always goes through the service.

export interface MacroParam {
  name: string;
  kind: "attr" | "attr-list" | "optional-attr";
  label: string;
}

export interface MacroSpec {
  name: string;
  label: string;
  dataset: "cities" | "filetree";
  params: MacroParam[];
  build(values: Record<string, string | string[]>): string;
}

function attr(name: string): string {
  return /^[A-Za-z_][A-Za-z0-9_]*$/.test(name) ? `$${name}` : `$"${name}"`;
}

function list(v: string | string[] | undefined): string[] {
  if (v === undefined) return [];
  if (Array.isArray(v)) return v.filter((s) => s.length > 0);
  return v
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s.length > 0);
}

function one(v: string | string[] | undefined, fallback = ""): string {
  const items = list(v);
  return items[0] ?? fallback;
}

export const MACROS: MacroSpec[] = [
  {
    name: "plot2d",
    label: "2D plot",
    dataset: "cities",
    params: [
      { name: "x", kind: "attr", label: "X attribute" },
      { name: "y", kind: "attr", label: "Y attribute" },
    ],
    build: (v) =>
      [
        "Visualization {",
        "  FillEllipse {",
        `    X = ${attr(one(v.x))};`,
        `    Y = ${attr(one(v.y))};`,
        "    Width = .04;",
        "    Height = .04;",
        "  }",
        "}",
        "",
      ].join("\n"),
  },
  {
    name: "histogram",
    label: "Histogram (sorted bars)",
    dataset: "cities",
    params: [{ name: "attr", kind: "attr", label: "Attribute" }],
    build: (v) =>
      [
        "Visualization {",
        `  Sort = ${attr(one(v.attr))};`,
        "  Variable { i = { init = 0; iter = i + 1/Length; } }",
        "  FillRectangle {",
        "    X = i;",
        "    Y = 0;",
        "    Width = 1/Length;",
        `    Height = norm(${attr(one(v.attr))});`,
        "  }",
        "}",
        "",
      ].join("\n"),
  },
  {
    name: "parallel_histograms",
    label: "Parallel histograms",
    dataset: "cities",
    params: [{ name: "attrs", kind: "attr-list", label: "Attributes" }],
    build: (v) => {
      const attrs = list(v.attrs);
      const n = attrs.length || 1;
      const bars = attrs.map((a, k) =>
        [
          "    FillRectangle {",
          "      X = 0;",
          `      Y = ${k}/${n};`,
          "      Width = 1;",
          `      Height = norm(${attr(a)})/${n};`,
          "    }",
        ].join("\n"),
      );
      return [
        "Visualization {",
        `  Sort = ${attr(attrs[0] ?? "Population")};`,
        "  Variable { i = { init = 0; iter = i + 1/Length; } }",
        "  FillRectangle {",
        "    X = i;",
        "    Y = 0;",
        "    Width = 1/Length;",
        "    Height = 1;",
        ...bars,
        "  }",
        "}",
        "",
      ].join("\n");
    },
  },
  {
    name: "adjusted_parallel_histograms",
    label: "Adjusted-width parallel histograms",
    dataset: "cities",
    params: [
      { name: "weight", kind: "attr", label: "Width attribute" },
      { name: "attrs", kind: "attr-list", label: "Bar attributes" },
    ],
    build: (v) => {
      const w = attr(one(v.weight));
      const attrs = list(v.attrs);
      const n = Math.max(attrs.length, 1);
      const bars = attrs.map((a, k) =>
        [
          "    FillRectangle {",
          "      X = 0;",
          `      Y = ${k}/${n};`,
          "      Width = 1;",
          `      Height = norm(${attr(a)})/${n};`,
          "    }",
        ].join("\n"),
      );
      return [
        "Visualization {",
        `  Accumulator { Sum = { init = 0; iter = Sum + ${w}; } }`,
        `  Variable { i = { init = 0; iter = i + ${w}/Sum; } }`,
        "  FillRectangle {",
        "    X = i;",
        "    Y = 0;",
        `    Width = ${w}/Sum;`,
        "    Height = 1;",
        ...bars,
        "  }",
        "}",
        "",
      ].join("\n");
    },
  },
  {
    name: "grid_of",
    label: "Grid of per-group plots",
    dataset: "cities",
    params: [
      { name: "by", kind: "attr", label: "Group by" },
      { name: "x", kind: "attr", label: "X attribute" },
      { name: "y", kind: "attr", label: "Y attribute" },
      { name: "special", kind: "optional-attr", label: "Highlighted group key" },
    ],
    build: (v) => {
      const cases: string[] = [];
      const special = one(v.special);
      const plot = (indent: string, paint: string) =>
        [
          `${indent}FillEllipse {`,
          `${indent}  X = ${attr(one(v.x))};`,
          `${indent}  Y = ${attr(one(v.y))};`,
          `${indent}  Width = 0.04;`,
          `${indent}  Height = 0.04;`,
          ...(paint ? [`${indent}  Paint = ${paint};`] : []),
          `${indent}}`,
        ].join("\n");
      if (special) {
        cases.push(
          [
            `        ${special} {`,
            "          FillRectangle {",
            "            X = 0;",
            "            Y = 0;",
            "            Width = 1;",
            "            Height = 1;",
            "            Paint = black;",
            "          }",
            plot("          ", "white"),
            "        }",
          ].join("\n"),
        );
      }
      cases.push(["        * {", plot("          ", ""), "        }"].join("\n"));
      return [
        "Visualization {",
        `  Partition = ${attr(one(v.by))} {`,
        "    Accumulator {",
        "      Rows = sqrt(childCount);",
        "      Columns = floor(sqrt(childCount - 1)) + 1;",
        "    }",
        "    Variable { i = { init = 0; iter = i + 1; } }",
        "    FillRectangle {",
        "      X = (i % Columns)/Columns;",
        "      Y = floor(i/Columns)/Rows;",
        "      Width = 1/Columns;",
        "      Height = 1/Rows;",
        "      Children {",
        ...cases,
        "      }",
        "    }",
        "  }",
        "}",
        "",
      ].join("\n");
    },
  },
  {
    name: "treemap",
    label: "Treemap (alternating packing)",
    dataset: "filetree",
    params: [
      { name: "path", kind: "attr", label: "Path attribute" },
      { name: "weight", kind: "attr", label: "Weight attribute" },
    ],
    build: (v) => {
      const weight = attr(one(v.weight));
      return [
        "Visualization {",
        `  Partition = split(${attr(one(v.path))}, "/")[depth] {`,
        "    Accumulator {",
        `      Total = { init = 0; iter = Total + ${weight}; }`,
        "      Horizontal = depth % 2;",
        "    }",
        "    Variable {",
        `      Position = { init = 0; iter = Position + Sum(${weight})/Total; }`,
        "    }",
        "    FillRectangle {",
        "      X = Horizontal ? 0 : Position;",
        "      Y = Horizontal ? Position : 0;",
        `      Width = Horizontal ? 1 : Sum(${weight})/Total;`,
        `      Height = Horizontal ? Sum(${weight})/Total : 1;`,
        "    }",
        "  }",
        "}",
        "",
      ].join("\n");
    },
  },
  {
    name: "squarified_treemap",
    label: "Squarified treemap",
    dataset: "filetree",
    params: [
      { name: "path", kind: "attr", label: "Path attribute" },
      { name: "weight", kind: "attr", label: "Weight attribute" },
    ],
    build: (v) =>
      [
        "Visualization {",
        "  SquarifiedTreemap {",
        `    key = split(${attr(one(v.path))}, "/")[depth];`,
        `    weight = ${attr(one(v.weight))};`,
        "  }",
        "}",
        "",
      ].join("\n"),
  },
  {
    name: "parallel_coordinates",
    label: "Parallel coordinates",
    dataset: "cities",
    params: [{ name: "attrs", kind: "attr-list", label: "Attributes" }],
    build: (v) => {
      const attrs = list(v.attrs);
      const n = Math.max(attrs.length - 1, 1);
      const pts = attrs.flatMap((a, k) => [
        k === 0 ? "0" : `${k}/${n}`,
        `norm(${attr(a)})`,
      ]);
      return [
        "Visualization {",
        "  Polyline {",
        `    points = { ${pts.join(", ")} };`,
        "  }",
        "}",
        "",
      ].join("\n");
    },
  },
];

export function macroByName(name: string): MacroSpec | undefined {
  return MACROS.find((m) => m.name === name);
}
