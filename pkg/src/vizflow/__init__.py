"""vizflow: declarative dataflow visualization engine.

Programs written in a small block DSL are compiled onto a fixed dataflow
(partition, order, state, graphic primitives, graphic attributes) and
executed over tabular data, producing an ordered sequence of graphic
instructions. Every render is instrumented: the report certifies whether the
program read each input row at most a fixed number of times.
"""

from .errors import Diagnostic, EngineError, EvalError, IngestError, ParseError, VizError
from .table import AttrType, DataTable, DomainStats, InstrumentedCursor, Schema, domain_stats, load_csv
from .expr import Context, evaluate, free_refs, normalize, parse_expr, print_expr
from .scene import Rect, Representation, UNIT_RECT, hsv_to_rgb, resolve_device, to_svg, to_text
from .program import VizProgram, expand_macro, parse_program, print_program, validate
from .engine import RenderOptions, complexity_of, execute, order_rows
from .plan import PassPlan, compile_canonical, execute_plan
from .gallery import gallery_entry, list_gallery, synth_cities, synth_filetree

__version__ = "0.1.0"

__all__ = [
    "AttrType", "Context", "DataTable", "Diagnostic", "DomainStats",
    "EngineError", "EvalError", "IngestError", "InstrumentedCursor",
    "ParseError", "PassPlan", "Rect", "RenderOptions", "Representation",
    "Schema", "UNIT_RECT", "VizError", "VizProgram", "compile_canonical",
    "complexity_of", "domain_stats", "evaluate", "execute", "execute_plan",
    "expand_macro", "free_refs", "gallery_entry", "hsv_to_rgb",
    "list_gallery", "load_csv", "normalize", "order_rows", "parse_expr",
    "parse_program", "print_expr", "print_program", "resolve_device",
    "synth_cities", "synth_filetree", "to_svg", "to_text", "validate",
]
