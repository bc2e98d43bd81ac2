"""HTTP/JSON control surface under /api/v1, the dashboard's per-bucket
server-push stream, and static /ui assets.

Every response body is a JSON document with an explicit schema_version;
every non-success response is exactly one error document with a
machine-readable code, a human message, and optional details. Handlers
are synchronous and serialize mutations through the platform lock, so
API calls, the paced traffic thread, and monitor ticks never interleave
mid-operation.
"""

from __future__ import annotations

import importlib.resources
import json
import time
from pathlib import Path
from typing import Iterator, Optional

from fastapi import Body, FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, RedirectResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from starlette.exceptions import HTTPException as StarletteHTTPException

from .orchestrator import (
    CONCLUDING,
    DRAFT,
    RUNNING,
    VALIDATED,
    Experiment,
    SpecParseError,
    parse_experiment_spec,
)
from .runtime import Platform
from .telemetry import MetricId, REQUEST_OUTCOMES

SCHEMA_VERSION = 1

# outcomes plotted per command: the three-count view
PLOT_OUTCOMES = ("success", "fallback_success", "fallback_failure")

# wall-clock pause between stream polls; buckets are emitted as they close
STREAM_POLL_S = 0.2


def api_error(status: int, code: str, message: str,
              details: Optional[dict] = None) -> JSONResponse:
    body = {"schema_version": SCHEMA_VERSION, "code": code, "message": message}
    if details is not None:
        body["details"] = details
    return JSONResponse(status_code=status, content=body)


def _experiment_doc(exp: Experiment) -> dict:
    doc = {"schema_version": SCHEMA_VERSION, "id": exp.spec.id}
    doc.update(exp.state_doc())
    doc["timeline"] = [
        {"from": f, "to": t, "at_ms": int(round(at))} for f, t, at in exp.transitions
    ]
    doc["spec"] = exp.spec.to_doc()
    return doc


def _rule_doc(rule) -> dict:
    treatment = {"kind": rule.treatment.kind}
    if rule.treatment.involves_latency():
        treatment["added_latency_ms"] = rule.treatment.added_latency_ms
    return {
        "experiment_id": rule.experiment_id,
        "scope_group": rule.scope_group,
        "points": [
            {"caller": p.caller, "command": p.command, "target": p.target}
            for p in rule.points
        ],
        "treatment": treatment,
        "fraction": rule.fraction,
    }


def _bucket_doc(platform: Platform, exp: Experiment, bucket: int) -> dict:
    """One stream document: the three counts per tracked command and the
    SPS numerator/denominator for both groups, over a single closed bucket.
    """
    tel = platform.telemetry
    width = tel.bucket_ms
    since, until = bucket * width, (bucket + 1) * width
    spec = exp.spec
    groups = {"control": spec.control_group, "experiment": spec.experiment_group}

    commands = {}
    for cmd in spec.tracked_commands:
        per_group = {}
        for label, group in groups.items():
            per_group[label] = {
                outcome: tel.query_window(MetricId(group, cmd, outcome), since, until).total
                for outcome in PLOT_OUTCOMES
            }
        commands[cmd] = per_group

    sps = {}
    for label, group in groups.items():
        starts = tel.query_window(MetricId(group, "sps", None), since, until).total
        requests = sum(
            tel.query_window(MetricId(group, "requests", o), since, until).total
            for o in REQUEST_OUTCOMES
        )
        sps[label] = {"starts": starts, "requests": requests}

    remaining = None
    if exp.ends_at is not None and not exp.is_terminal():
        remaining = int(round(max(0.0, exp.ends_at - until)))
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "bucket",
        "at_ms": int(since),
        "bucket_ms": int(width),
        "phase": exp.phase,
        "remaining_ms": remaining,
        "groups": groups,
        "commands": commands,
        "sps": sps,
    }


def ui_directory() -> Optional[Path]:
    """Built dashboard assets shipped inside the package, if any."""
    root = Path(str(importlib.resources.files("chaoslab"))) / "ui"
    if root.is_dir() and (root / "index.html").is_file():
        return root
    return None


def build_app(platform: Platform) -> FastAPI:
    app = FastAPI(title="chaoslab", openapi_url=None, docs_url=None, redoc_url=None)
    orch = platform.orchestrator

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(request, exc):
        code = {404: "not_found", 405: "method_not_allowed"}.get(exc.status_code, "http_error")
        return api_error(exc.status_code, code, str(exc.detail))

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request, exc):
        return api_error(400, "bad_request", "malformed request body or parameters")

    @app.exception_handler(Exception)
    async def _internal(request, exc):
        return api_error(500, "internal_error", f"{type(exc).__name__}: {exc}")

    def _lookup(exp_id: str) -> Optional[Experiment]:
        return orch.experiments.get(exp_id)

    # -- topology -------------------------------------------------------------

    @app.get("/api/v1/clusters")
    def clusters() -> dict:
        topo = platform.topology
        with platform.lock:
            docs = []
            for name in topo.cluster_order():
                svc = topo.service(name)
                clone_kinds = platform.mesh.clone_groups.get(name, {})
                docs.append({
                    "name": name,
                    "entry": name == topo.entry,
                    "capacity": svc.capacity,
                    "dependencies": [
                        {"command": e.command_name, "target": e.target}
                        for e in svc.dependencies
                    ],
                    "groups": [name] + sorted(clone_kinds),
                })
        return {"schema_version": SCHEMA_VERSION, "scenario": topo.name,
                "clock_mode": platform.mode, "max_divert": orch.max_divert,
                "clusters": docs}

    @app.get("/api/v1/clusters/{name}/routing")
    def routing(name: str):
        topo = platform.topology
        if name not in topo.services:
            return api_error(404, "unknown_cluster", f"no cluster named {name!r}")
        with platform.lock:
            table = platform.router.table_for(name)
        if table is None:
            return {"schema_version": SCHEMA_VERSION, "cluster": name,
                    "experiment_id": None, "salt": None,
                    "entries": [{"group": name, "kind": "baseline", "weight": 1.0}]}
        return {"schema_version": SCHEMA_VERSION, "cluster": table.cluster,
                "experiment_id": table.experiment_id, "salt": table.salt,
                "entries": [
                    {"group": e.group, "kind": e.kind, "weight": e.weight}
                    for e in table.entries
                ]}

    # -- experiment lifecycle ---------------------------------------------------

    @app.post("/api/v1/experiments", status_code=201)
    def create_experiment(doc: dict = Body(...)):
        try:
            spec = parse_experiment_spec(doc)
        except SpecParseError as exc:
            return api_error(400, "invalid_spec", "experiment spec rejected",
                             {"issues": [i.to_doc() for i in exc.issues]})
        with platform.lock:
            if spec.id in orch.experiments:
                return api_error(409, "duplicate_experiment",
                                 f"experiment {spec.id!r} already exists")
            orch.create(spec)
        return {"schema_version": SCHEMA_VERSION, "id": spec.id}

    @app.get("/api/v1/experiments")
    def list_experiments() -> dict:
        with platform.lock:
            docs = [_experiment_doc(e)
                    for _, e in sorted(orch.experiments.items())]
        return {"schema_version": SCHEMA_VERSION, "experiments": docs}

    @app.get("/api/v1/experiments/{exp_id}")
    def get_experiment(exp_id: str):
        with platform.lock:
            exp = _lookup(exp_id)
            if exp is None:
                return api_error(404, "unknown_experiment", f"no experiment {exp_id!r}")
            return _experiment_doc(exp)

    @app.post("/api/v1/experiments/{exp_id}/start")
    def start_experiment(exp_id: str):
        with platform.lock:
            exp = _lookup(exp_id)
            if exp is None:
                return api_error(404, "unknown_experiment", f"no experiment {exp_id!r}")
            if exp.phase == DRAFT:
                issues = orch.validate(exp_id)
                if issues:
                    return api_error(400, "validation_failed", "experiment spec invalid "
                                     "against the live topology",
                                     {"issues": [i.to_doc() for i in issues]})
            if exp.phase != VALIDATED:
                return api_error(409, "invalid_phase",
                                 f"cannot start from phase {exp.phase}")
            orch.start(exp_id)
            if platform.mode == "simulated" and exp.phase == RUNNING:
                # no wall clock to wait on: play the scenario out right here
                platform.drive_started(exp_id)
            return _experiment_doc(exp)

    @app.post("/api/v1/experiments/{exp_id}/abort")
    def abort_experiment(exp_id: str, body: Optional[dict] = Body(None)):
        reason = "operator requested abort"
        if body and isinstance(body.get("reason"), str) and body["reason"].strip():
            reason = body["reason"].strip()
        with platform.lock:
            exp = _lookup(exp_id)
            if exp is None:
                return api_error(404, "unknown_experiment", f"no experiment {exp_id!r}")
            if exp.is_terminal():
                return _experiment_doc(exp)
            if exp.phase not in (RUNNING, CONCLUDING):
                return api_error(409, "invalid_phase",
                                 f"cannot abort from phase {exp.phase}")
            orch.abort(exp_id, f"manual_abort: {reason}")
            return _experiment_doc(exp)

    # -- observation ------------------------------------------------------------

    @app.get("/api/v1/experiments/{exp_id}/metrics")
    def metrics(exp_id: str, command: Optional[str] = None,
                group: Optional[str] = None, outcome: Optional[str] = None,
                since_ms: Optional[float] = None, until_ms: Optional[float] = None):
        with platform.lock:
            exp = _lookup(exp_id)
            if exp is None:
                return api_error(404, "unknown_experiment", f"no experiment {exp_id!r}")
            spec = exp.spec
            groups = [group] if group else [spec.control_group, spec.experiment_group]
            commands = [command] if command else list(spec.tracked_commands)
            since = since_ms if since_ms is not None else (exp.started_at or 0.0)
            until = until_ms if until_ms is not None else (
                exp.ended_at if exp.ended_at is not None else platform.engine.now_ms)
            if since > until:
                return api_error(400, "bad_window", "since_ms must be <= until_ms")

            series = []
            for g in groups:
                for cmd in commands:
                    if cmd == "sps":
                        triples = [(g, "sps", None)]
                    elif cmd == "requests":
                        triples = [(g, "requests", o) for o in REQUEST_OUTCOMES]
                    else:
                        wanted = [outcome] if outcome else list(PLOT_OUTCOMES)
                        triples = [(g, cmd, o) for o in wanted]
                    for mg, mc, mo in triples:
                        win = platform.telemetry.query_window(
                            MetricId(mg, mc, mo), since, until)
                        series.append({
                            "group": mg, "command": mc, "outcome": mo,
                            "points": [[int(t), n] for t, n in win.points],
                            "total": win.total, "exists": win.exists,
                        })
        return {"schema_version": SCHEMA_VERSION,
                "bucket_ms": int(platform.telemetry.bucket_ms),
                "since_ms": int(round(since)), "until_ms": int(round(until)),
                "series": series}

    @app.get("/api/v1/experiments/{exp_id}/report")
    def report(exp_id: str):
        with platform.lock:
            exp = _lookup(exp_id)
            if exp is None:
                return api_error(404, "unknown_experiment", f"no experiment {exp_id!r}")
            if exp.report is None:
                return api_error(404, "no_report",
                                 f"experiment {exp_id!r} has not finished (phase {exp.phase})")
            return exp.report

    @app.get("/api/v1/experiments/{exp_id}/rules")
    def rules(exp_id: str):
        with platform.lock:
            exp = _lookup(exp_id)
            if exp is None:
                return api_error(404, "unknown_experiment", f"no experiment {exp_id!r}")
            docs = [_rule_doc(r) for r in platform.injector.active_rules()
                    if r.experiment_id == exp_id]
        return {"schema_version": SCHEMA_VERSION, "rules": docs}

    @app.get("/api/v1/experiments/{exp_id}/stream")
    def stream(exp_id: str):
        with platform.lock:
            exp = _lookup(exp_id)
        if exp is None:
            return api_error(404, "unknown_experiment", f"no experiment {exp_id!r}")

        def event(name: str, doc: dict) -> str:
            return f"event: {name}\ndata: {json.dumps(doc, sort_keys=True)}\n\n"

        def feed() -> Iterator[str]:
            width = platform.telemetry.bucket_ms
            next_bucket = None
            while True:
                docs = []
                with platform.lock:
                    terminal = exp.is_terminal()
                    if exp.started_at is None:
                        if terminal:  # aborted before running: nothing to plot
                            yield event("end", _experiment_doc(exp))
                            return
                    else:
                        if next_bucket is None:
                            next_bucket = int(exp.started_at // width)
                        if terminal:
                            # flush through the final (possibly partial) bucket
                            end = exp.ended_at if exp.ended_at is not None \
                                else platform.engine.now_ms
                            closed = int(end // width) + 1
                        else:
                            closed = int(platform.engine.now_ms // width)
                        while next_bucket < closed:
                            docs.append(_bucket_doc(platform, exp, next_bucket))
                            next_bucket += 1
                    if terminal:
                        docs.append(None)  # sentinel: emit end after buckets
                for doc in docs:
                    if doc is None:
                        yield event("end", _experiment_doc(exp))
                        return
                    yield event("bucket", doc)
                time.sleep(STREAM_POLL_S)

        return StreamingResponse(feed(), media_type="text/event-stream",
                                 headers={"Cache-Control": "no-cache",
                                          "X-Accel-Buffering": "no"})

    # -- dashboard assets ---------------------------------------------------------

    ui_dir = ui_directory()
    if ui_dir is not None:
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    @app.get("/")
    def index():
        if ui_dir is not None:
            return RedirectResponse(url="/ui/")
        return {"schema_version": SCHEMA_VERSION, "service": "chaoslab",
                "api": "/api/v1", "ui": None}

    return app


def serve(platform: Platform, port: int, host: str = "127.0.0.1",
          timescale: float = 1.0) -> None:
    """Run the control plane until interrupted. In real-time mode the
    scenario's traffic plan loops continuously in the background so the
    dashboard always has live data.
    """
    import uvicorn

    if platform.mode == "real-time":
        platform.start_paced(timescale=timescale, continuous=True)
    app = build_app(platform)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        if platform.mode == "real-time":
            platform.stop_paced()
