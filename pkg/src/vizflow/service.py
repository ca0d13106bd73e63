"""Stateless HTTP surface over the engine.

Endpoints:
  POST /render    {program, data|dataset, width, height, outputs, useCache,
                   usePlan} -> {svg?, text?, stats?, diagnostics}
  POST /validate  {program, data|dataset} -> {diagnostics}
  GET  /gallery   -> entry names, titles, program texts
  GET  /gallery/{name}/data.csv

Every request is self-contained; nothing is cached across requests. Bad
programs answer 400 with diagnostics; oversized payloads answer 413.
"""

from __future__ import annotations

import os
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from .engine import RenderOptions, execute
from .errors import VizError
from .gallery import dataset_for, gallery_entry, list_gallery
from .plan import compile_canonical, execute_plan
from .program import parse_program, validate
from .scene import to_svg, to_text
from .table import load_csv

DEFAULT_PAYLOAD_LIMIT = 64 * 1024 * 1024  # bytes
DEFAULT_TIMEOUT = 30.0  # seconds


class RenderRequest(BaseModel):
    program: str
    data: str | None = None          # inline CSV
    dataset: str | None = None       # gallery dataset name
    rows: int | None = None          # synthetic dataset size override
    seed: int = 1
    width: int = Field(default=800, ge=1)
    height: int = Field(default=600, ge=1)
    outputs: list[str] = Field(default_factory=lambda: ["svg", "stats"])
    useCache: bool = True
    usePlan: bool = False


class ValidateRequest(BaseModel):
    program: str
    data: str | None = None
    dataset: str | None = None
    rows: int | None = None
    seed: int = 1


def _resolve_table(req) -> "DataTable":
    if req.data is not None:
        return load_csv(req.data)
    if req.dataset is not None:
        return dataset_for(gallery_entry(req.dataset), req.rows, req.seed)
    raise VizError("request needs either inline CSV data or a gallery dataset name")


def create_app(payload_limit: int | None = None,
               render_timeout: float | None = None) -> FastAPI:
    limit = payload_limit or int(os.environ.get("VIZ_PAYLOAD_LIMIT", DEFAULT_PAYLOAD_LIMIT))
    timeout = render_timeout or float(os.environ.get("VIZ_RENDER_TIMEOUT", DEFAULT_TIMEOUT))
    app = FastAPI(title="vizflow", version="0.1.0")

    @app.middleware("http")
    async def cap_payload(request: Request, call_next):
        length = request.headers.get("content-length")
        if length is not None and int(length) > limit:
            return JSONResponse({"detail": "payload too large"}, status_code=413)
        return await call_next(request)

    @app.exception_handler(Exception)
    async def internal_error(request: Request, exc: Exception):
        # never leak internals
        return JSONResponse({"detail": "internal error"}, status_code=500)

    @app.post("/render")
    def render(req: RenderRequest):
        try:
            table = _resolve_table(req)
            program = parse_program(req.program)
        except VizError as e:
            return JSONResponse({"diagnostics": [str(e)]}, status_code=400)
        diagnostics = validate(program, table.schema, table)
        if diagnostics:
            return JSONResponse(
                {"diagnostics": [str(d) for d in diagnostics]}, status_code=400)
        options = RenderOptions(device_width=req.width, device_height=req.height,
                                cache=req.useCache, timeout=timeout)
        try:
            if req.usePlan:
                plan = compile_canonical(program, table, options)
                rep, report = execute_plan(plan, table, options)
            else:
                rep, report = execute(program, table, options)
        except VizError as e:
            return JSONResponse({"diagnostics": [f"render failed: {e}"]},
                                status_code=400)
        body = {"diagnostics": [str(d) for d in rep.diagnostics]}
        if "svg" in req.outputs:
            body["svg"] = to_svg(rep)
        if "text" in req.outputs:
            body["text"] = to_text(rep)
        if "stats" in req.outputs:
            body["stats"] = report.as_dict()
        return body

    @app.post("/validate")
    def validate_endpoint(req: ValidateRequest):
        try:
            table = _resolve_table(req)
            program = parse_program(req.program)
        except VizError as e:
            return JSONResponse({"diagnostics": [str(e)]}, status_code=400)
        diagnostics = validate(program, table.schema, table)
        if diagnostics:
            return JSONResponse(
                {"diagnostics": [str(d) for d in diagnostics]}, status_code=400)
        return {
            "diagnostics": [],
            "schema": [
                {"name": n, "type": t.value}
                for n, t in table.schema.attributes
            ],
        }

    @app.get("/gallery")
    def gallery():
        return [
            {
                "name": e.name,
                "title": e.title,
                "program": e.program_text,
                "dataset": e.dataset,
                "defaultRows": e.default_rows,
            }
            for e in list_gallery()
        ]

    @app.get("/gallery/{name}/data.csv")
    def gallery_data(name: str, rows: int | None = None, seed: int = 1):
        try:
            entry = gallery_entry(name)
            table = dataset_for(entry, rows, seed)
        except VizError as e:
            return JSONResponse({"detail": str(e)}, status_code=404)
        return PlainTextResponse(table.to_csv(), media_type="text/csv")

    studio_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if studio_dir.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/studio", StaticFiles(directory=studio_dir, html=True),
                  name="studio")
    return app
