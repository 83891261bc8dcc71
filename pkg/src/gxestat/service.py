"""JSON HTTP service: upload a trial CSV, run analyses, fetch biplot
geometry and the full bundle.

Sessions are in-memory with a TTL; every endpoint is a pure function of
(dataset, parameters), so responses are cached and idempotent.
"""
from __future__ import annotations

import json
import time
import uuid

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware

from .data import (
    ColumnSchema,
    DuplicateCellError,
    EmptyDatasetError,
    MalformedCsvError,
    NonNumericTraitError,
    parse_csv,
)
from .gge import MODES
from .mixed_model import ModelCase, significance_table
from .pipeline import ammi_payload, dataset_summary, gge_payload, run_all
from .stability import stability_report

MAX_BOOT = 10_000


class Session:
    def __init__(self, ds):
        self.ds = ds
        self.created = time.monotonic()
        self.cache: dict[str, str] = {}


def _json_response(payload: str) -> Response:
    return Response(content=payload, media_type="application/json")


def create_app(session_ttl: float = 3600.0) -> FastAPI:
    app = FastAPI(title="gxestat", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    sessions: dict[str, Session] = {}

    def evict():
        now = time.monotonic()
        for sid in [s for s, sess in sessions.items() if now - sess.created > session_ttl]:
            del sessions[sid]

    def get_session(sid):
        evict()
        return sessions.get(sid)

    def cached(sess: Session, key: str, supplier):
        if key not in sess.cache:
            sess.cache[key] = json.dumps(supplier(), sort_keys=True)
        return sess.cache[key]

    def error(status: int, name: str, detail: str):
        return Response(
            content=json.dumps({"error": name, "detail": detail}),
            status_code=status,
            media_type="application/json",
        )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/datasets")
    async def upload(request: Request):
        params = request.query_params
        schema = ColumnSchema(
            genotype=params.get("geno_col", "CLT"),
            location=params.get("loc_col", "LC"),
            trait=params.get("trait_col", "MY"),
            year=params.get("year_col") or None,
            rep=params.get("rep_col") or None,
        )
        body = await request.body()
        try:
            ds = parse_csv(body, schema)
        except (MalformedCsvError, NonNumericTraitError, DuplicateCellError, EmptyDatasetError, ValueError) as e:
            return error(400, type(e).__name__, str(e))
        sid = uuid.uuid4().hex
        sessions[sid] = Session(ds)
        return {"session_id": sid, "summary": dataset_summary(ds)}

    @app.post("/sessions/{sid}/significance")
    async def significance(sid: str, request: Request):
        sess = get_session(sid)
        if sess is None:
            return error(404, "UnknownSession", sid)
        body = await request.json() if await request.body() else {}
        case = int(body.get("case", 1))
        if not 1 <= case <= 5:
            return error(422, "InvalidCase", str(case))
        try:
            payload = cached(
                sess,
                f"sig:{case}",
                lambda: significance_table(sess.ds, ModelCase(case)).to_json_dict(),
            )
        except ValueError as e:
            return error(422, type(e).__name__, str(e))
        return _json_response(payload)

    @app.post("/sessions/{sid}/stability")
    async def stability(sid: str):
        sess = get_session(sid)
        if sess is None:
            return error(404, "UnknownSession", sid)
        try:
            payload = cached(sess, "stability", lambda: stability_report(sess.ds).to_json_dict())
        except ValueError as e:
            return error(422, type(e).__name__, str(e))
        return _json_response(payload)

    @app.post("/sessions/{sid}/ammi")
    async def ammi(sid: str, request: Request):
        sess = get_session(sid)
        if sess is None:
            return error(404, "UnknownSession", sid)
        body = await request.json() if await request.body() else {}
        n_boot = min(int(body.get("n_boot", 1000)), MAX_BOOT)
        try:
            seed = int(body.get("seed", 0))
            n_components = body.get("n_components")
            alpha = float(body.get("alpha", 0.05))
            key = f"ammi:{n_components}:{alpha}:{n_boot}:{seed}"
            payload = cached(
                sess,
                key,
                lambda: ammi_payload(
                    sess.ds, n_components=n_components, alpha=alpha, n_boot=n_boot, seed=seed
                ),
            )
        except ValueError as e:
            return error(422, type(e).__name__, str(e))
        return _json_response(payload)

    @app.post("/sessions/{sid}/gge")
    async def gge(sid: str, request: Request):
        sess = get_session(sid)
        if sess is None:
            return error(404, "UnknownSession", sid)
        body = await request.json() if await request.body() else {}
        centering = body.get("centering", "environment_centered")
        svp = body.get("svp")
        mode = body.get("mode")
        if mode is not None and mode not in MODES:
            return error(422, "UnknownMode", str(mode))
        try:
            key = f"gge:{centering}:{svp}:{mode}"
            payload = cached(
                sess,
                key,
                lambda: gge_payload(
                    sess.ds,
                    centering=centering,
                    svp=svp,
                    modes=[mode] if mode else None,
                )["modes"][mode or "pc_scatter"]
                if mode
                else gge_payload(sess.ds, centering=centering, svp=svp),
            )
        except ValueError as e:
            return error(422, type(e).__name__, str(e))
        return _json_response(payload)

    @app.get("/sessions/{sid}/bundle")
    def bundle(sid: str):
        sess = get_session(sid)
        if sess is None:
            return error(404, "UnknownSession", sid)
        try:
            payload = cached(sess, "bundle", lambda: run_all(sess.ds).to_json_dict())
        except ValueError as e:
            return error(422, type(e).__name__, str(e))
        return _json_response(payload)

    return app
