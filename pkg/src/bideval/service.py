"""Stateless HTTP facade over run/update for the playground UI."""

from __future__ import annotations

from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .bundled import EXAMPLES, example_source
from .core import Val, VConst, VList, VRecord
from .diffs import DiffError, decode_diff
from .interp import EvalError, UpdateConfig
from .program import run_source, update_source
from .syntax import ParseError, parse_value, print_value

MAX_BODY_BYTES = 1_000_000
STEP_BUDGET = 10_000_000
MAX_SOLUTIONS = 10


class RunRequest(BaseModel):
    code: str


class UpdateRequest(BaseModel):
    code: str
    newOutput: Optional[str] = None
    outputDiff: Optional[Any] = None
    merge: str = "three-way"


def html_tree(v: Val):
    """JSON rendering when `v` matches the HTML node encoding, else None."""
    if isinstance(v, VList) and len(v.items) == 2 \
            and isinstance(v.items[0], VConst) and v.items[0].value == "TEXT" \
            and isinstance(v.items[1], VConst) \
            and isinstance(v.items[1].value, str):
        return {"text": v.items[1].value}
    if isinstance(v, VList) and len(v.items) == 3:
        tag, attrs, children = v.items
        if not (isinstance(tag, VConst) and isinstance(tag.value, str)
                and tag.value != "TEXT"):
            return None
        if not isinstance(attrs, VList) or not isinstance(children, VList):
            return None
        attr_pairs = []
        for pair in attrs.items:
            if not (isinstance(pair, VList) and len(pair.items) == 2
                    and all(isinstance(x, VConst)
                            and isinstance(x.value, str)
                            for x in pair.items)):
                return None
            attr_pairs.append([pair.items[0].value, pair.items[1].value])
        kids = []
        for child in children.items:
            sub = html_tree(child)
            if sub is None:
                return None
            kids.append(sub)
        return {"tag": tag.value, "attrs": attr_pairs, "children": kids}
    return None


def json_to_value(x) -> Val:
    if isinstance(x, bool):
        return VConst(x)
    if isinstance(x, (int, float)):
        return VConst(float(x))
    if isinstance(x, str):
        return VConst(x)
    if isinstance(x, list):
        return VList(tuple(json_to_value(i) for i in x))
    if isinstance(x, dict):
        return VRecord({k: json_to_value(v) for k, v in x.items()})
    raise ValueError(f"unsupported JSON value {x!r}")


def create_app() -> FastAPI:
    from fastapi.exceptions import RequestValidationError

    app = FastAPI(title="bideval sync service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse({"ok": False, "error": "malformed request body"},
                            status_code=400)

    @app.middleware("http")
    async def limit_body(request: Request, call_next):
        size = request.headers.get("content-length")
        if size is not None and int(size) > MAX_BODY_BYTES:
            return JSONResponse({"ok": False, "error": "request too large"},
                                status_code=413)
        return await call_next(request)

    @app.post("/api/run")
    def api_run(req: RunRequest):
        try:
            value = run_source(req.code, step_budget=STEP_BUDGET)
        except ParseError as err:
            return {"ok": False, "error": str(err),
                    "line": err.line, "col": err.col}
        except EvalError as err:
            return {"ok": False, "error": str(err)}
        out = {"ok": True, "value": print_value(value)}
        tree = html_tree(value)
        if tree is not None:
            out["htmlTree"] = tree
        return out

    @app.post("/api/update")
    def api_update(req: UpdateRequest):
        try:
            cfg = UpdateConfig(merge_mode=req.merge,
                               max_solutions=MAX_SOLUTIONS,
                               step_budget=STEP_BUDGET)
        except ValueError as err:
            return JSONResponse({"ok": False, "error": str(err)},
                                status_code=400)
        try:
            current = run_source(req.code, step_budget=STEP_BUDGET)
        except ParseError as err:
            return {"ok": False, "error": str(err),
                    "line": err.line, "col": err.col}
        except EvalError as err:
            return {"ok": False, "error": str(err)}

        output_diff = None
        wanted = None
        try:
            if req.outputDiff is not None:
                output_diff = decode_diff(json_to_value(req.outputDiff))
            elif req.newOutput is not None:
                wanted = parse_value(req.newOutput)
            else:
                return JSONResponse(
                    {"ok": False,
                     "error": "newOutput or outputDiff required"},
                    status_code=400)
        except (ParseError, DiffError, ValueError) as err:
            return {"ok": False, "error": str(err)}

        from .core import val_equal
        if wanted is not None and val_equal(current, wanted):
            return {"ok": True, "inSync": True,
                    "solutions": [_solution_json(req.code, "", current)]}

        try:
            sols = []
            for ps in update_source(req.code, wanted, cfg,
                                    output_diff=output_diff):
                preview = ps.output(step_budget=STEP_BUDGET)
                sols.append(_solution_json(ps.code, ps.summary, preview))
        except EvalError as err:
            return {"ok": False, "error": str(err)}
        return {"ok": True, "inSync": False, "solutions": sols}

    @app.get("/api/examples")
    def api_examples():
        return [{"id": ex.id, "title": ex.title} for ex in EXAMPLES]

    @app.get("/api/examples/{example_id}")
    def api_example(example_id: str):
        src = example_source(example_id)
        if src is None:
            return JSONResponse({"error": "unknown example"}, status_code=404)
        return {"id": example_id, "code": src}

    return app


def _solution_json(code: str, summary: str, preview: Val) -> dict:
    out = {"code": code, "summary": summary,
           "outputPreview": print_value(preview)}
    tree = html_tree(preview)
    if tree is not None:
        out["previewTree"] = tree
    return out


app = create_app()


def main(argv=None):
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(prog="bideval-serve")
    parser.add_argument("--port", type=int, default=8787)
    parser.add_argument("--host", default="127.0.0.1")
    args = parser.parse_args(argv)
    uvicorn.run(app, host=args.host, port=args.port)


if __name__ == "__main__":
    main()
