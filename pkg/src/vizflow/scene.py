"""Graphic-instruction representation and its two backends: the canonical
text dump (the golden-test contract) and an SVG 1.1 subset.

Instructions carry device coordinates. The normalized drawing space used by
the engine is the unit square with the origin at the bottom-left and y
increasing upward; conversion to device space flips y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

from .errors import Diagnostic

FILL_RECT = "fillRectangle"
FILL_ELLIPSE = "fillEllipse"
LINE = "line"
POLYLINE = "polyline"
DRAW_STRING = "drawString"
SET_COLOR = "setColor"
SET_FONT = "setFont"

GEOMETRIC = {FILL_RECT, FILL_ELLIPSE, LINE, POLYLINE, DRAW_STRING}
ATTRIBUTE = {SET_COLOR, SET_FONT}

DEFAULT_FILL = (0.5, 0.5, 0.5)  # opaque mid-gray when no paint was set
DEFAULT_FONT_SIZE = 12.0


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle; normalized rects live inside the unit square."""

    x: float
    y: float
    width: float
    height: float

    def compose(self, inner: "Rect") -> "Rect":
        """Interpret ``inner`` in this rect's local coordinate system."""
        return Rect(
            self.x + inner.x * self.width,
            self.y + inner.y * self.height,
            inner.width * self.width,
            inner.height * self.height,
        )

    def inset(self, fraction: float) -> "Rect":
        dx = self.width * fraction
        dy = self.height * fraction
        return Rect(self.x + dx, self.y + dy, self.width - 2 * dx, self.height - 2 * dy)


UNIT_RECT = Rect(0.0, 0.0, 1.0, 1.0)


class Representation:
    """Ordered sequence of graphic-language instructions plus device size.

    Instructions are plain tuples beginning with the instruction kind;
    backends never reorder them.
    """

    def __init__(self, device_width: int = 800, device_height: int = 600):
        self.device_width = device_width
        self.device_height = device_height
        self.instructions: list[tuple] = []
        self.diagnostics: list[Diagnostic] = []

    def geometric_count(self) -> int:
        return sum(1 for ins in self.instructions if ins[0] in GEOMETRIC)


def resolve_device(x: float, y: float, w: float, h: float,
                   viewport: Rect, device: tuple[float, float],
                   diagnostics: list | None = None) -> tuple[float, float, float, float]:
    """Compose a normalized rect into a viewport and map to device pixels.

    Normalized y grows upward; device y grows downward, so the rect's top
    edge lands at ``(1 - (y + h)) * H``. Negative sizes are clamped to zero.
    """
    if w < 0 or h < 0:
        if diagnostics is not None:
            diagnostics.append(Diagnostic(f"negative size ({w}, {h}) clamped to 0"))
        w = max(w, 0.0)
        h = max(h, 0.0)
    ax = viewport.x + x * viewport.width
    ay = viewport.y + y * viewport.height
    aw = w * viewport.width
    ah = h * viewport.height
    W, H = device
    return (ax * W, (1.0 - (ay + ah)) * H, aw * W, ah * H)


def resolve_point(x: float, y: float, viewport: Rect,
                  device: tuple[float, float]) -> tuple[float, float]:
    ax = viewport.x + x * viewport.width
    ay = viewport.y + y * viewport.height
    W, H = device
    return (ax * W, (1.0 - ay) * H)


def fmt_num(v: float) -> str:
    """Shortest decimal form: integral values print without a fraction."""
    if type(v) is float:
        if v.is_integer():
            return str(int(v)) if -1e16 < v < 1e16 else repr(v)
        if v != v:
            return "nan"
        return repr(v)
    return str(v)


def to_text(rep: Representation) -> str:
    """Canonical dump: one ``kind(arg, arg, ...);`` line per instruction."""
    lines = []
    for ins in rep.instructions:
        kind = ins[0]
        if kind == DRAW_STRING:
            text = ins[1].replace("\\", "\\\\").replace('"', '\\"')
            args = [f'"{text}"'] + [fmt_num(v) for v in ins[2:]]
        elif kind == POLYLINE:
            args = [fmt_num(c) for pt in ins[1] for c in pt]
        else:
            args = [fmt_num(v) for v in ins[1:]]
        lines.append(f"{kind}({', '.join(args)});")
    return "\n".join(lines) + ("\n" if lines else "")


def hsv_to_rgb(h: float, s: float, v: float,
               diagnostics: list | None = None) -> tuple[float, float, float]:
    """Standard HSV cone conversion; h is a fraction of 360 degrees.

    Inputs are clamped into [0,1] (NaN becomes 0) with a diagnostic.
    """
    def clamp01(x, label):
        if x != x:
            x = 0.0
        if x < 0.0 or x > 1.0:
            if diagnostics is not None:
                diagnostics.append(Diagnostic(f"paint {label}={fmt_num(x)} clamped to [0,1]"))
            return min(max(x, 0.0), 1.0)
        return x

    h = clamp01(h, "hue")
    s = clamp01(s, "saturation")
    v = clamp01(v, "value")
    if s == 0.0:
        return (v, v, v)
    h6 = h * 6.0
    i = int(math.floor(h6)) % 6
    f = h6 - math.floor(h6)
    p = v * (1.0 - s)
    q = v * (1.0 - f * s)
    t = v * (1.0 - (1.0 - f) * s)
    return [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i]


def _rgb_css(color: tuple[float, float, float]) -> str:
    r, g, b = (round(c * 255) for c in color)
    return f"rgb({r}, {g}, {b})"


def to_svg(rep: Representation) -> str:
    """Emit one SVG element per geometric instruction.

    A pending setColor becomes the next shape's fill (stroke for lines);
    a pending setFont becomes the next text's font-size.
    """
    W, H = rep.device_width, rep.device_height
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{fmt_num(W)}" '
        f'height="{fmt_num(H)}" viewBox="0 0 {fmt_num(W)} {fmt_num(H)}">'
    ]
    push = out.append
    color = DEFAULT_FILL
    font_size = DEFAULT_FONT_SIZE
    pending_color = None
    pending_font = None
    for ins in rep.instructions:
        kind = ins[0]
        if kind == SET_COLOR:
            pending_color = (ins[1], ins[2], ins[3])
            continue
        if kind == SET_FONT:
            pending_font = ins[1]
            continue
        fill = _rgb_css(pending_color if pending_color is not None else color)
        size = pending_font if pending_font is not None else font_size
        pending_color = None
        pending_font = None
        if kind == FILL_RECT:
            _, x, y, w, h = ins
            f = fmt_num
            push(f'<rect x="{f(x)}" y="{f(y)}" width="{f(w)}" '
                 f'height="{f(h)}" fill="{fill}"/>')
        elif kind == FILL_ELLIPSE:
            _, x, y, w, h = ins
            f = fmt_num
            rx = w / 2
            ry = h / 2
            push(f'<ellipse cx="{f(x + rx)}" cy="{f(y + ry)}" '
                 f'rx="{f(rx)}" ry="{f(ry)}" fill="{fill}"/>')
        elif kind == LINE:
            _, x1, y1, x2, y2 = ins
            push(f'<line x1="{fmt_num(x1)}" y1="{fmt_num(y1)}" x2="{fmt_num(x2)}" '
                 f'y2="{fmt_num(y2)}" stroke="{fill}"/>')
        elif kind == POLYLINE:
            pts = ins[1]
            coords = " ".join(f"{fmt_num(x)},{fmt_num(y)}" for x, y in pts)
            push(f'<polyline points="{coords}" fill="none" stroke="{fill}"/>')
        elif kind == DRAW_STRING:
            _, text, x, y = ins
            push(f'<text x="{fmt_num(x)}" y="{fmt_num(y)}" '
                 f'font-size="{fmt_num(size)}" fill="{fill}">{escape(text)}</text>')
    push("</svg>")
    return "\n".join(out) + "\n"
