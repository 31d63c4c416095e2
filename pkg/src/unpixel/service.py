"""HTTP facade over the library for interactive tuning.

A session holds one uploaded block image (a PNG interpreted as a grid of
block means at a given step, or a .lab file), an optional reference image,
and the pipeline text under edit. Every response is a pure function of the
session snapshot, so identical requests return identical bytes; the only
mutation is the atomic replace of a session's pipeline. Idle sessions expire
after a TTL.

Error taxonomy: 404 unknown session or run, 400 malformed input (bad stage
line, undecodable upload), 422 well-formed but out-of-range parameter with
the offending field named in the body, 413 oversized upload.

Grid searches run on a background thread; poll GET /runs/{id} for the trace
and the best pipeline found so far. Non-finite objective values (a constant
image has no contrast) are reported as nulls.
"""

from __future__ import annotations

import base64
import io
import json
import math
import secrets
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional

from fastapi import FastAPI, File, Form, HTTPException, Request, UploadFile
from fastapi.responses import PlainTextResponse, Response

from . import __version__
from .codec import MAGIC, SUPPORTED_STEPS, BlockAverageImage, LabFormatError, read_lab
from .deconv import DeconvSettings, L_MAX, sweep
from .image import RasterImage, load_png, png_bytes
from .pipeline import (
    PipelineError,
    PipelineRangeError,
    PipelineSpec,
    parse,
    preset_names,
    preset_text,
    run,
    serialize,
)
from .search import SearchConfig, optimize

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _fail(status: int, message: str, field_name: Optional[str] = None):
    detail = {"message": message}
    if field_name is not None:
        detail["field"] = field_name
    raise HTTPException(status_code=status, detail=detail)


def _finite(v):
    if v is None:
        return None
    return float(v) if math.isfinite(v) else None


def _int_range(text: str, step: int, field_name: str, lo: int, hi: int):
    """'first..last' (inclusive, stepped) or a single integer."""
    raw = text.strip()
    try:
        if ".." in raw:
            a, b = raw.split("..", 1)
            values = tuple(range(int(a), int(b) + 1, step))
        else:
            values = (int(raw),)
    except ValueError:
        _fail(400, f"{field_name} expects 'first..last' or an integer, got {text!r}", field_name)
    if not values:
        _fail(422, f"{field_name} range {text!r} is empty", field_name)
    for v in values:
        if not lo <= v <= hi:
            _fail(422, f"{field_name} must lie in {lo}..{hi}, got {v}", field_name)
    return values


# ---------------------------------------------------------------------------
# session and run state
# ---------------------------------------------------------------------------

@dataclass
class Session:
    id: str
    source: BlockAverageImage
    reference: Optional[RasterImage]
    pipeline_text: str
    spec: PipelineSpec
    created_at: float
    last_seen: float


class _SessionStore:
    """TTL-evicting session map; reads snapshot, writes replace atomically."""

    def __init__(self, ttl: float):
        self.ttl = ttl
        self._lock = threading.Lock()
        self._by_id = {}

    def _purge(self, now: float) -> None:
        dead = [sid for sid, s in self._by_id.items() if now - s.last_seen > self.ttl]
        for sid in dead:
            del self._by_id[sid]

    def _live(self, sid: str, now: float) -> Session:
        self._purge(now)
        s = self._by_id.get(sid)
        if s is None:
            _fail(404, "unknown session")
        s.last_seen = now
        return s

    def add(self, session: Session) -> None:
        with self._lock:
            self._purge(session.created_at)
            self._by_id[session.id] = session

    def get(self, sid: str) -> Session:
        with self._lock:
            return self._live(sid, time.time())

    def replace_pipeline(self, sid: str, text: str, spec: PipelineSpec) -> None:
        with self._lock:
            s = self._live(sid, time.time())
            s.pipeline_text, s.spec = text, spec

    def append_stage_line(self, sid: str, line: str):
        """Parse-and-swap under the lock so concurrent appends serialize."""
        with self._lock:
            s = self._live(sid, time.time())
            text = s.pipeline_text
            if text and not text.endswith("\n"):
                text += "\n"
            text += line + "\n"
            spec = parse(text)
            s.pipeline_text, s.spec = text, spec
            return text, spec


@dataclass
class _Run:
    status: str = "running"
    trace: list = field(default_factory=list)
    spec_text: str = ""
    error: Optional[str] = None


# ---------------------------------------------------------------------------
# request plumbing
# ---------------------------------------------------------------------------

def _stage_line(data) -> str:
    """Flatten a JSON stage description into one pipeline text line; the
    grammar then does all range checking, so JSON and text stay in step."""
    if not isinstance(data, dict):
        _fail(400, "body must be a JSON object")
    kind = data.get("kind")
    if kind not in ("interp1", "interp2", "magnify", "deconv"):
        _fail(400, "kind must be one of interp1|interp2|magnify|deconv", "kind")
    tokens = [kind]
    for key, value in data.items():
        if key == "kind":
            continue
        if not isinstance(key, str) or not key.isidentifier():
            _fail(400, f"bad field name {key!r}")
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            _fail(400, f"field {key!r} must be a number or a string", key)
        text = f"{value:g}" if isinstance(value, float) else str(value)
        if not text or "#" in text or any(ch.isspace() for ch in text):
            _fail(400, f"bad value for field {key!r}", key)
        tokens.append(f"{key}={text}")
    return " ".join(tokens)


def _trace_row_dict(row) -> dict:
    return {
        "iteration": row.iteration,
        "fidelity": _finite(row.fidelity),
        "regularizer": _finite(row.regularizer),
        "total": _finite(row.total),
    }


_SEARCH_KEYS = frozenset(
    ("lam", "threshold", "max_occurrences", "p_step", "rel_floor", "p_values",
     "L_values", "theta_values", "amount_values", "gamma_values",
     "source_values", "noise_values")
)


def _search_config(data) -> SearchConfig:
    if not isinstance(data, dict):
        _fail(400, "body must be a JSON object")
    unknown = sorted(set(data) - _SEARCH_KEYS)
    if unknown:
        _fail(400, f"unknown search option(s): {', '.join(unknown)}")
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    try:
        return SearchConfig(**kwargs)
    except (TypeError, ValueError) as e:
        msg = str(e)
        field_name = "lam" if msg.startswith("lambda") else msg.split()[0]
        _fail(422, msg, field_name)


# ---------------------------------------------------------------------------
# application
# ---------------------------------------------------------------------------

def create_app(ttl_seconds: float = 3600.0, max_upload: int = 1 << 20,
               ui_dir=None) -> FastAPI:
    app = FastAPI(title="unpixel tuner service", version=__version__)
    store = _SessionStore(ttl_seconds)
    runs = {}
    runs_lock = threading.Lock()

    @app.post("/sessions", status_code=201)
    async def create_session(
        file: UploadFile = File(...),
        step: int = Form(4),
        reference: Optional[UploadFile] = File(None),
    ):
        data = await file.read()
        if len(data) > max_upload:
            _fail(413, f"upload exceeds the {max_upload} byte limit")
        if data[:4] == MAGIC:
            try:
                source = read_lab(io.BytesIO(data))
            except LabFormatError as e:
                _fail(400, str(e))
        elif data[:8] == _PNG_MAGIC:
            if step not in SUPPORTED_STEPS:
                _fail(422, f"step must be one of {SUPPORTED_STEPS}, got {step}", "step")
            grid = load_png(io.BytesIO(data))
            source = BlockAverageImage(grid.width * step, grid.height * step,
                                       step, grid.planes)
        else:
            _fail(400, "file must be a PNG mean grid or a .lab block image")

        ref_img = None
        if reference is not None:
            rdata = await reference.read()
            if len(rdata) > max_upload:
                _fail(413, f"reference exceeds the {max_upload} byte limit")
            if rdata:
                if rdata[:8] != _PNG_MAGIC:
                    _fail(400, "reference must be a PNG", "reference")
                ref_img = load_png(io.BytesIO(rdata))

        now = time.time()
        sid = secrets.token_hex(8)
        store.add(Session(sid, source, ref_img, "", PipelineSpec(), now, now))
        return {
            "id": sid,
            "step": source.step,
            "width": source.orig_width,
            "height": source.orig_height,
            "channels": source.channels,
            "has_reference": ref_img is not None,
            "created_at": datetime.fromtimestamp(now, tz=timezone.utc).isoformat(),
        }

    @app.get("/sessions/{sid}/preview")
    def preview(sid: str):
        s = store.get(sid)
        try:
            img = run(s.spec, s.source)
        except (PipelineError, ValueError) as e:
            _fail(400, str(e))
        return Response(png_bytes(img), media_type="image/png")

    @app.get("/sessions/{sid}/sweep")
    def sweep_manifest(sid: str, L: str = "0..20", theta: str = "0..175",
                       gamma: float = 1.0, amount: int = 25,
                       source: str = "DVC", noise: str = "NO",
                       lam: float = 0.1):
        s = store.get(sid)
        Ls = _int_range(L, 1, "L", 0, L_MAX)
        thetas = _int_range(theta, 5, "theta", 0, 175)
        try:
            DeconvSettings(gamma=gamma, L=Ls[0], theta=thetas[0],
                           source=source, amount=amount, noise=noise)
        except ValueError as e:
            _fail(422, str(e), str(e).split()[0])
        if lam < 0:
            _fail(422, "lam must be >= 0", "lam")
        try:
            base = run(s.spec, s.source)
        except (PipelineError, ValueError) as e:
            _fail(400, str(e))
        grid = sweep(base, gamma, Ls, thetas, source=source, amount=amount,
                     noise=noise, reference=s.reference, lam=lam)
        cells = [
            {
                "L": c.L,
                "theta": c.theta,
                "png": base64.b64encode(png_bytes(c.image)).decode("ascii"),
                "objective": _finite(c.objective),
            }
            for c in grid.cells()
        ]
        first = grid.rows[0][0].image
        return {
            "L": list(Ls),
            "theta": list(thetas),
            "gamma": gamma,
            "amount": amount,
            "source": source,
            "noise": noise,
            "cell_width": first.width,
            "cell_height": first.height,
            "cells": cells,
        }

    @app.get("/sessions/{sid}/pipeline")
    def get_pipeline(sid: str):
        return PlainTextResponse(store.get(sid).pipeline_text)

    @app.put("/sessions/{sid}/pipeline")
    async def put_pipeline(sid: str, request: Request):
        raw = await request.body()
        if len(raw) > max_upload:
            _fail(413, f"pipeline text exceeds the {max_upload} byte limit")
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError:
            _fail(400, "pipeline text must be UTF-8")
        try:
            spec = parse(text)
        except PipelineRangeError as e:
            _fail(422, str(e), e.field)
        except PipelineError as e:
            _fail(400, str(e))
        store.replace_pipeline(sid, text, spec)
        return {"stages": len(spec.stages)}

    @app.post("/sessions/{sid}/pipeline/stages")
    async def append_stage(sid: str, request: Request):
        store.get(sid)
        try:
            data = await request.json()
        except (json.JSONDecodeError, UnicodeDecodeError):
            _fail(400, "body must be a JSON object")
        line = _stage_line(data)
        try:
            text, spec = store.append_stage_line(sid, line)
        except PipelineRangeError as e:
            _fail(422, str(e), e.field)
        except PipelineError as e:
            _fail(400, str(e))
        return {"stages": len(spec.stages), "text": text}

    @app.post("/sessions/{sid}/search", status_code=202)
    async def start_search(sid: str, request: Request):
        s = store.get(sid)
        if s.reference is None:
            _fail(400, "session has no reference image to search against")
        body = await request.body()
        try:
            data = json.loads(body) if body.strip() else {}
        except (json.JSONDecodeError, UnicodeDecodeError):
            _fail(400, "body must be a JSON object")
        cfg = _search_config(data)
        source_img, ref_img = s.source, s.reference

        rid = secrets.token_hex(8)
        rec = _Run()
        with runs_lock:
            runs[rid] = rec

        def progress(row, spec_so_far):
            with runs_lock:
                rec.trace.append(row)
                rec.spec_text = serialize(spec_so_far)

        def work():
            try:
                state = optimize(source_img, ref_img, cfg, on_progress=progress)
            except Exception as e:
                with runs_lock:
                    rec.status, rec.error = "error", str(e)
            else:
                with runs_lock:
                    rec.spec_text = serialize(state.spec)
                    rec.status = "done"

        threading.Thread(target=work, name=f"search-{rid}", daemon=True).start()
        return {"run_id": rid}

    @app.get("/runs/{rid}")
    def run_status(rid: str):
        with runs_lock:
            rec = runs.get(rid)
            if rec is None:
                _fail(404, "unknown run")
            out = {
                "status": rec.status,
                "trace": [_trace_row_dict(r) for r in rec.trace],
                "spec": rec.spec_text,
            }
            if rec.error is not None:
                out["error"] = rec.error
            return out

    @app.get("/presets")
    def list_presets():
        return {"presets": preset_names()}

    @app.get("/presets/{name}")
    def get_preset(name: str):
        try:
            text = preset_text(name)
        except KeyError:
            _fail(404, f"no preset named {name!r}")
        return {"name": name, "text": text, "stages": len(parse(text).stages)}

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
