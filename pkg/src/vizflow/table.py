"""Tabular data model: CSV ingestion, schema inference, domain statistics,
and the instrumented random-access cursor used for complexity accounting.

Values are plain Python objects: numbers are ``float`` (finite or NaN, never
infinite), text is ``str``, missing cells are ``None``, and list values are
Python lists. Numeric cells accept ``k`` (x1e3) and ``M`` (x1e6) suffixes.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass
from enum import Enum

from .errors import IngestError, VizError

NUMERIC_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?[kM]?$")

_SUFFIX = {"k": 1e3, "M": 1e6}


class AttrType(Enum):
    NUMERIC = "numeric"
    TEXT = "text"


def parse_number(text: str) -> float | None:
    """Parse a numeric literal, honoring k/M magnitude suffixes.

    Returns None when the text is not a number. Infinities are folded to NaN
    so that no value in the system is ever infinite.
    """
    text = text.strip()
    if not text or not NUMERIC_RE.match(text):
        return None
    factor = 1.0
    if text[-1] in _SUFFIX:
        factor = _SUFFIX[text[-1]]
        text = text[:-1]
    try:
        v = float(text) * factor
    except ValueError:
        return None
    if math.isinf(v):
        return math.nan
    return v


@dataclass(frozen=True)
class Schema:
    """Ordered attribute list; names are unique and nonempty."""

    attributes: tuple[tuple[str, AttrType], ...]

    def __post_init__(self):
        names = [n for n, _ in self.attributes]
        if len(set(names)) != len(names):
            raise VizError("duplicate attribute names in schema")
        if any(not n for n in names):
            raise VizError("empty attribute name in schema")

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.attributes]

    def type_of(self, name: str) -> AttrType | None:
        for n, t in self.attributes:
            if n == name:
                return t
        return None

    def has(self, name: str) -> bool:
        return self.type_of(name) is not None


@dataclass(frozen=True)
class DomainStats:
    """Min/max of a numeric attribute over some row subset.

    Null/NaN values are excluded; an all-excluded subset falls back to (0, 1).
    """

    attribute: str
    min: float
    max: float
    scope: str = "global"


class DataTable:
    """Immutable column-oriented table. Row order is ingestion order."""

    def __init__(self, schema: Schema, columns: dict[str, list]):
        self.schema = schema
        self.columns = columns
        lengths = {len(c) for c in columns.values()}
        if len(lengths) > 1:
            raise VizError("ragged columns")
        self.length = lengths.pop() if lengths else 0
        self._global_stats: dict[str, DomainStats] = {}

    def __len__(self) -> int:
        return self.length

    def row(self, i: int) -> dict:
        return {name: self.columns[name][i] for name in self.schema.names}

    def global_stats(self, attribute: str) -> DomainStats:
        """Whole-table domain stats, computed lazily and cached as table
        metadata (like the schema, these are not render-time row accesses)."""
        st = self._global_stats.get(attribute)
        if st is None:
            st = domain_stats(self, attribute, range(self.length))
            self._global_stats[attribute] = st
        return st

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.schema.names)
        names = self.schema.names
        cols = [self.columns[n] for n in names]
        types = [self.schema.type_of(n) for n in names]
        for i in range(self.length):
            row = []
            for c, t in zip(cols, types):
                v = c[i]
                if v is None:
                    row.append("")
                elif t is AttrType.NUMERIC:
                    row.append(format_cell(v))
                else:
                    row.append(v)
            w.writerow(row)
        return buf.getvalue()


def format_cell(v: float) -> str:
    if v != v:
        return ""
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


class InstrumentedCursor:
    """Random-access cursor that counts every row access.

    accessCounts[i] equals exactly the number of row(i) calls since creation.
    """

    def __init__(self, table: DataTable):
        self.table = table
        self.counts = [0] * table.length
        self.current = -1

    def row(self, i: int):
        if not 0 <= i < self.table.length:
            raise VizError(f"row index {i} out of range [0, {self.table.length})")
        self.counts[i] += 1
        self.current = i
        return RowView(self.table, i)

    def access(self, i: int):
        """Counting-only access for hot loops (no RowView allocation)."""
        if not 0 <= i < self.table.length:
            raise VizError(f"row index {i} out of range [0, {self.table.length})")
        self.counts[i] += 1
        self.current = i

    @property
    def total_accesses(self) -> int:
        return sum(self.counts)

    @property
    def max_per_row(self) -> int:
        return max(self.counts, default=0)


@dataclass
class RowView:
    """Attribute accessor for one row."""

    table: DataTable
    index: int

    def __getitem__(self, attribute: str):
        return self.table.columns[attribute][self.index]


def load_csv(data: bytes | str, delimiter: str = ",", has_header: bool = True) -> DataTable:
    """Ingest CSV bytes/text into a DataTable with an inferred schema.

    An attribute is numeric iff every nonempty cell parses as a number
    (k/M suffixes allowed); otherwise it is text. Empty cells become None.
    Ragged rows and empty inputs are ingestion errors.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8-sig")
        except UnicodeDecodeError as e:
            raise IngestError(f"input is not valid UTF-8: {e}") from e
    # csv emits [] for blank lines; skip them entirely
    rows = [r for r in csv.reader(io.StringIO(data), delimiter=delimiter) if r]
    if not rows:
        raise IngestError("empty input")
    if has_header:
        header, body = rows[0], rows[1:]
    else:
        header = [f"col{i}" for i in range(len(rows[0]))]
        body = rows
    if not body:
        raise IngestError("no data rows")
    width = len(header)
    for rowno, r in enumerate(body, start=2 if has_header else 1):
        if len(r) != width:
            raise IngestError(f"ragged row {rowno}: expected {width} cells, got {len(r)}")

    raw_cols = [[r[j] for r in body] for j in range(width)]
    attrs = []
    columns: dict[str, list] = {}
    for name, raw in zip(header, raw_cols):
        name = name.strip()
        # vacuously numeric when every cell is empty
        numeric = all(parse_number(c) is not None for c in raw if c.strip() != "")
        if numeric:
            attrs.append((name, AttrType.NUMERIC))
            columns[name] = [parse_number(c) if c.strip() != "" else None for c in raw]
        else:
            attrs.append((name, AttrType.TEXT))
            columns[name] = [c if c.strip() != "" else None for c in raw]
    return DataTable(Schema(tuple(attrs)), columns)


def domain_stats(table: DataTable, attribute: str, rows, scope: str = "global") -> DomainStats:
    """Min/max over the given row subset, excluding None/NaN.

    Falls back to (0, 1) when every value is excluded, so downstream
    normalization stays defined.
    """
    t = table.schema.type_of(attribute)
    if t is None:
        raise VizError(f"unknown attribute {attribute!r}")
    if t is not AttrType.NUMERIC:
        raise VizError(f"attribute {attribute!r} is not numeric")
    col = table.columns[attribute]
    lo = math.inf
    hi = -math.inf
    for i in rows:
        v = col[i]
        if v is None or v != v:
            continue
        if v < lo:
            lo = v
        if v > hi:
            hi = v
    if lo > hi:
        return DomainStats(attribute, 0.0, 1.0, scope)
    return DomainStats(attribute, lo, hi, scope)
