"""Command-line surface: render, check, serve, and gallery subcommands."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .engine import RenderOptions, execute
from .errors import VizError
from .gallery import dataset_for, gallery_entry, list_gallery
from .plan import compile_canonical, execute_plan
from .program import parse_program, validate
from .scene import to_svg, to_text
from .table import load_csv

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vizflow",
                                 description="Declarative dataflow visualization engine")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("render", help="render a program over a CSV table")
    r.add_argument("--program", required=True, help="program file (.viz)")
    r.add_argument("--data", required=True, help="CSV data file")
    r.add_argument("--out", help="SVG output path")
    r.add_argument("--width", type=int, default=800)
    r.add_argument("--height", type=int, default=600)
    r.add_argument("--dump", help="write the canonical text dump here")
    r.add_argument("--stats", help="write the complexity stats JSON here")
    r.add_argument("--no-cache", action="store_true",
                   help="disable per-render expression caching")
    r.add_argument("--plan", action="store_true",
                   help="compile to the canonical pass plan and execute that")
    r.add_argument("--timeout", type=float, default=None,
                   help="render deadline in seconds")

    c = sub.add_parser("check", help="validate a program against a table's schema")
    c.add_argument("--program", required=True)
    c.add_argument("--schema-from", required=True, dest="schema_from",
                   help="CSV file supplying the schema (and domains)")

    s = sub.add_parser("serve", help="run the HTTP render service")
    s.add_argument("--port", type=int,
                   default=int(os.environ.get("VIZ_PORT", "8321")))
    s.add_argument("--host", default="127.0.0.1")

    g = sub.add_parser("gallery", help="list or export built-in gallery entries")
    gsub = g.add_subparsers(dest="gallery_command", required=True)
    gsub.add_parser("list", help="list entry names")
    ge = gsub.add_parser("export", help="write an entry's program and dataset")
    ge.add_argument("name")
    ge.add_argument("--out-dir", required=True)
    ge.add_argument("--rows", type=int, default=None)
    ge.add_argument("--seed", type=int, default=1)
    return ap


def _read_file(path: str, binary: bool = False):
    try:
        return Path(path).read_bytes() if binary else Path(path).read_text()
    except OSError as e:
        raise _IOFailure(f"cannot read {path}: {e}") from e


def _write_file(path: str, text: str):
    try:
        Path(path).write_text(text)
    except OSError as e:
        raise _IOFailure(f"cannot write {path}: {e}") from e


class _IOFailure(Exception):
    pass


def _load_and_validate(program_path: str, data_path: str):
    program = parse_program(_read_file(program_path))
    table = load_csv(_read_file(data_path, binary=True))
    diagnostics = validate(program, table.schema, table)
    return program, table, diagnostics


def cmd_render(args) -> int:
    try:
        program, table, diagnostics = _load_and_validate(args.program, args.data)
    except _IOFailure as e:
        print(str(e), file=sys.stderr)
        return EXIT_IO
    except VizError as e:
        print(str(e), file=sys.stderr)
        return EXIT_INVALID
    if diagnostics:
        for d in diagnostics:
            print(str(d), file=sys.stderr)
        return EXIT_INVALID
    options = RenderOptions(device_width=args.width, device_height=args.height,
                            cache=not args.no_cache, timeout=args.timeout)
    try:
        if args.plan:
            plan = compile_canonical(program, table, options)
            rep, report = execute_plan(plan, table, options)
        else:
            rep, report = execute(program, table, options)
    except VizError as e:
        print(f"render failed: {e}", file=sys.stderr)
        return EXIT_INVALID
    try:
        if args.out:
            _write_file(args.out, to_svg(rep))
        if args.dump:
            _write_file(args.dump, to_text(rep))
        if args.stats:
            _write_file(args.stats, json.dumps(report.as_dict(), indent=2) + "\n")
    except _IOFailure as e:
        print(str(e), file=sys.stderr)
        return EXIT_IO
    for d in rep.diagnostics:
        print(f"note: {d}", file=sys.stderr)
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        program, table, diagnostics = _load_and_validate(args.program, args.schema_from)
    except _IOFailure as e:
        print(str(e), file=sys.stderr)
        return EXIT_IO
    except VizError as e:
        print(str(e), file=sys.stderr)
        return EXIT_INVALID
    for d in diagnostics:
        print(str(d), file=sys.stderr)
    if diagnostics:
        return EXIT_INVALID
    print("ok")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def cmd_gallery(args) -> int:
    if args.gallery_command == "list":
        for e in list_gallery():
            print(f"{e.name}\t{e.title}")
        return EXIT_OK
    try:
        entry = gallery_entry(args.name)
    except VizError as e:
        print(str(e), file=sys.stderr)
        return EXIT_INVALID
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        table = dataset_for(entry, args.rows, args.seed)
        (out_dir / f"{entry.name}.viz").write_text(entry.program_text)
        (out_dir / f"{entry.name}.csv").write_text(table.to_csv())
    except OSError as e:
        print(f"cannot export: {e}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {out_dir / (entry.name + '.viz')} and {out_dir / (entry.name + '.csv')}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "render":
        return cmd_render(args)
    if args.command == "check":
        return cmd_check(args)
    if args.command == "serve":
        return cmd_serve(args)
    return cmd_gallery(args)


if __name__ == "__main__":
    sys.exit(main())
