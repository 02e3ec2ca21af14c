"""HTTP wire interface.

Every engine operation is reachable through exactly one route. Responses
use a uniform envelope: {"data": ..., "log_head": n} on success and
{"error": {code, message, details}, "log_head": n} on failure, so clients
can always watch the log head move. Identity is a static bearer-token map
from the deployment config; the token names the acting agent.
"""

from __future__ import annotations

import json
import queue
from typing import Optional

from fastapi import Body, Depends, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from .deployment import Deployment
from .errors import MiddlewareError, Unauthorized
from .util import b64decode_content, b64encode_content

ENDPOINT_TABLE = [
    {"method": "GET", "path": "/health", "operation": "health"},
    {"method": "GET", "path": "/endpoints", "operation": "endpoint_table"},
    {"method": "POST", "path": "/sites", "operation": "add_site"},
    {"method": "GET", "path": "/sites", "operation": "list_sites"},
    {"method": "POST", "path": "/agents", "operation": "register_agent"},
    {"method": "GET", "path": "/agents", "operation": "list_agents"},
    {"method": "POST", "path": "/teams", "operation": "register_team"},
    {"method": "GET", "path": "/teams", "operation": "list_teams"},
    {"method": "POST", "path": "/teams/{team_id}/leader", "operation": "appoint_leader"},
    {"method": "POST", "path": "/projects", "operation": "register_project"},
    {"method": "GET", "path": "/projects", "operation": "list_projects"},
    {"method": "POST", "path": "/projects/{project_id}/phase", "operation": "advance_phase"},
    {"method": "POST", "path": "/projects/{project_id}/threshold",
     "operation": "set_priority_threshold"},
    {"method": "POST", "path": "/requirements", "operation": "register_requirement"},
    {"method": "GET", "path": "/requirements", "operation": "list_requirements"},
    {"method": "POST", "path": "/requirements/{requirement_id}/classify",
     "operation": "classify_requirement"},
    {"method": "POST", "path": "/privileges", "operation": "assign_privilege"},
    {"method": "GET", "path": "/privileges", "operation": "list_grants"},
    {"method": "POST", "path": "/artifacts", "operation": "create_artifact"},
    {"method": "GET", "path": "/artifacts", "operation": "list_artifacts"},
    {"method": "GET", "path": "/artifacts/{artifact_id}", "operation": "read_artifact"},
    {"method": "GET", "path": "/artifacts/{artifact_id}/content", "operation": "read_content"},
    {"method": "POST", "path": "/artifacts/{artifact_id}/commit", "operation": "commit_version"},
    {"method": "DELETE", "path": "/artifacts/{artifact_id}", "operation": "delete_artifact"},
    {"method": "POST", "path": "/artifacts/{artifact_id}/recall", "operation": "recall_artifact"},
    {"method": "GET", "path": "/artifacts/{artifact_id}/impact", "operation": "impact"},
    {"method": "GET", "path": "/artifacts/{artifact_id}/provenance", "operation": "provenance"},
    {"method": "GET", "path": "/artifacts/{artifact_id}/priority", "operation": "artifact_priority"},
    {"method": "POST", "path": "/links", "operation": "link"},
    {"method": "GET", "path": "/links", "operation": "list_links"},
    {"method": "DELETE", "path": "/links/{link_id}", "operation": "unlink"},
    {"method": "POST", "path": "/subscriptions", "operation": "subscribe"},
    {"method": "GET", "path": "/subscriptions", "operation": "list_subscriptions"},
    {"method": "DELETE", "path": "/subscriptions/{subscription_id}", "operation": "unsubscribe"},
    {"method": "GET", "path": "/notifications/pending", "operation": "pending"},
    {"method": "POST", "path": "/notifications/{event_id}/ack", "operation": "ack"},
    {"method": "POST", "path": "/crs", "operation": "submit_cr"},
    {"method": "GET", "path": "/crs", "operation": "list_crs"},
    {"method": "GET", "path": "/crs/{cr_id}", "operation": "get_cr"},
    {"method": "POST", "path": "/crs/{cr_id}/route", "operation": "route_cr"},
    {"method": "POST", "path": "/crs/{cr_id}/vote", "operation": "cast_vote"},
    {"method": "POST", "path": "/crs/{cr_id}/close", "operation": "close_review"},
    {"method": "POST", "path": "/crs/{cr_id}/apply", "operation": "apply_cr"},
    {"method": "POST", "path": "/crs/{cr_id}/reactivate", "operation": "reactivate_cr"},
    {"method": "POST", "path": "/watches", "operation": "watch"},
    {"method": "GET", "path": "/watches", "operation": "list_watches"},
    {"method": "DELETE", "path": "/watches/{artifact_id}", "operation": "unwatch"},
    {"method": "POST", "path": "/ams/poll", "operation": "poll_ams"},
    {"method": "POST", "path": "/ams/scan", "operation": "scan_external"},
    {"method": "GET", "path": "/log", "operation": "log_entries"},
    {"method": "GET", "path": "/log/verify", "operation": "verify_log"},
    {"method": "GET", "path": "/log/export", "operation": "export_log"},
    {"method": "GET", "path": "/config", "operation": "export_config"},
    {"method": "GET", "path": "/stream", "operation": "notification_stream"},
    {"method": "POST", "path": "/admin/advance-clock", "operation": "advance_clock"},
]


def _content_from(body: dict) -> bytes:
    if "content_b64" in body:
        return b64decode_content(body["content_b64"])
    return body["content"].encode("utf-8")


def _impact_payload(pairs) -> list[dict]:
    return [{"artifact_id": aid, "distance": dist} for aid, dist in pairs]


def create_app(dep: Deployment) -> FastAPI:
    app = FastAPI(title="reactive-middleware", docs_url=None, redoc_url=None,
                  openapi_url=None)

    def _ok(data) -> dict:
        return {"data": data, "log_head": dep.log.head_seq}

    def _error_response(status: int, code: str, message: str, details: dict) -> JSONResponse:
        return JSONResponse(status_code=status, content={
            "error": {"code": code, "message": message, "details": details},
            "log_head": dep.log.head_seq,
        })

    def auth(request: Request) -> str:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise Unauthorized("missing bearer token")
        agent_id = dep.resolve_token(header[7:].strip())
        if agent_id is None:
            raise Unauthorized("unknown or expired token")
        return agent_id

    @app.exception_handler(MiddlewareError)
    def _middleware_error(_request, exc: MiddlewareError):
        return _error_response(exc.http_status, exc.code, exc.message, exc.details)

    @app.exception_handler(StarletteHTTPException)
    def _http_error(_request, exc: StarletteHTTPException):
        code = "NOT_FOUND" if exc.status_code == 404 else "HTTP_ERROR"
        return _error_response(exc.status_code, code, str(exc.detail), {})

    @app.exception_handler(RequestValidationError)
    def _validation_error(_request, exc: RequestValidationError):
        return _error_response(400, "VALIDATION", "request body invalid",
                               {"errors": [str(e) for e in exc.errors()]})

    @app.exception_handler(KeyError)
    def _missing_field(_request, exc: KeyError):
        return _error_response(400, "VALIDATION", f"missing field: {exc}", {})

    @app.exception_handler(ValueError)
    def _bad_value(_request, exc: ValueError):
        return _error_response(400, "VALIDATION", str(exc), {})

    # -- service ------------------------------------------------------------

    @app.get("/health")
    def health():
        return _ok({"status": "ok"})

    @app.get("/endpoints")
    def endpoint_table():
        return _ok(ENDPOINT_TABLE)

    # -- registry -------------------------------------------------------------

    @app.post("/sites")
    def add_site(body: dict = Body(...), actor: str = Depends(auth)):
        site = dep.add_site(body["name"], body.get("timezone_offset_minutes", 0),
                            site_id=body.get("site_id"), actor_id=actor)
        return _ok(site.to_dict())

    @app.get("/sites")
    def list_sites(_actor: str = Depends(auth)):
        return _ok([s.to_dict() for s in dep.directory.sites.values()])

    @app.post("/agents")
    def register_agent(body: dict = Body(...), actor: str = Depends(auth)):
        agent = dep.register_agent(body["display_name"], body.get("kind", "HUMAN"),
                                   team_id=body.get("team_id"),
                                   agent_id=body.get("agent_id"), actor_id=actor)
        return _ok(agent.to_dict())

    @app.get("/agents")
    def list_agents(_actor: str = Depends(auth)):
        return _ok([a.to_dict() for a in dep.directory.agents.values()])

    @app.post("/teams")
    def register_team(body: dict = Body(...), actor: str = Depends(auth)):
        team = dep.register_team(body["site_id"], body["leader_id"],
                                 body.get("member_ids", []),
                                 team_id=body.get("team_id"), actor_id=actor)
        return _ok(team.to_dict())

    @app.get("/teams")
    def list_teams(_actor: str = Depends(auth)):
        return _ok([t.to_dict() for t in dep.directory.teams.values()])

    @app.post("/teams/{team_id}/leader")
    def appoint_leader(team_id: str, body: dict = Body(...), actor: str = Depends(auth)):
        team = dep.appoint_leader(team_id, body["agent_id"], actor_id=actor)
        return _ok(team.to_dict())

    @app.post("/projects")
    def register_project(body: dict = Body(...), actor: str = Depends(auth)):
        project = dep.register_project(body.get("sdlc_tag", ""), body.get("team_ids", []),
                                       phase=body.get("phase", "INITIATING"),
                                       priority_threshold=body.get("priority_threshold"),
                                       project_id=body.get("project_id"), actor_id=actor)
        return _ok(project.to_dict())

    @app.get("/projects")
    def list_projects(_actor: str = Depends(auth)):
        return _ok([p.to_dict() for p in dep.directory.projects.values()])

    @app.post("/projects/{project_id}/phase")
    def advance_phase(project_id: str, body: dict = Body(...), actor: str = Depends(auth)):
        project = dep.advance_phase(project_id, body["phase"], actor_id=actor)
        return _ok(project.to_dict())

    @app.post("/projects/{project_id}/threshold")
    def set_priority_threshold(project_id: str, body: dict = Body(...),
                               actor: str = Depends(auth)):
        changed = dep.set_priority_threshold(project_id, body["threshold"],
                                             actor_id=actor)
        return _ok({"reclassified": changed})

    @app.post("/requirements")
    def register_requirement(body: dict = Body(...), actor: str = Depends(auth)):
        req = dep.register_requirement(body["artifact_id"],
                                       requirement_id=body.get("requirement_id"),
                                       actor_id=actor)
        return _ok(req.to_dict())

    @app.get("/requirements")
    def list_requirements(_actor: str = Depends(auth)):
        return _ok([r.to_dict() for r in dep.directory.requirements.values()])

    @app.post("/requirements/{requirement_id}/classify")
    def classify_requirement(requirement_id: str, body: dict = Body(...),
                             actor: str = Depends(auth)):
        req = dep.classify_requirement(requirement_id, body["attributes"],
                                       actor_id=actor)
        return _ok(req.to_dict())

    # -- access control -----------------------------------------------------------

    @app.post("/privileges")
    def assign_privilege(body: dict = Body(...), actor: str = Depends(auth)):
        grant = dep.assign_privilege(actor, body["agent_id"], body["scope"],
                                     body["privilege"])
        return _ok(grant.to_dict())

    @app.get("/privileges")
    def list_grants(_actor: str = Depends(auth)):
        return _ok([g.to_dict() for g in dep.access.grants()])

    # -- artifacts --------------------------------------------------------------

    @app.post("/artifacts")
    def create_artifact(body: dict = Body(...), actor: str = Depends(auth)):
        artifact = dep.create_artifact(actor, body["kind"], body["owner_team_id"],
                                       _content_from(body),
                                       media_type=body.get("media_type", "text/plain"),
                                       artifact_id=body.get("artifact_id"))
        return _ok(artifact.to_dict())

    @app.get("/artifacts")
    def list_artifacts(_actor: str = Depends(auth)):
        return _ok([a.to_dict() for a in dep.artifacts()])

    @app.get("/artifacts/{artifact_id}")
    def read_artifact(artifact_id: str, version: Optional[int] = None,
                      actor: str = Depends(auth)):
        record = dep.read_artifact(actor, artifact_id, version)
        artifact = dep.get_artifact(artifact_id)
        return _ok({"artifact": artifact.to_dict(), "version": record.to_dict()})

    @app.get("/artifacts/{artifact_id}/content")
    def read_content(artifact_id: str, version: Optional[int] = None,
                     actor: str = Depends(auth)):
        record = dep.read_artifact(actor, artifact_id, version)
        content = dep.store.get(record.content_hash)
        return _ok({
            "artifact_id": artifact_id,
            "version": record.version,
            "content_hash": record.content_hash,
            "content_b64": b64encode_content(content),
        })

    @app.post("/artifacts/{artifact_id}/commit")
    def commit_version(artifact_id: str, body: dict = Body(...), actor: str = Depends(auth)):
        record = dep.commit_version(actor, artifact_id, _content_from(body),
                                    change_request_id=body.get("change_request_id"),
                                    expected_parent_version=body.get("expected_parent_version"))
        return _ok(record.to_dict())

    @app.delete("/artifacts/{artifact_id}")
    def delete_artifact(artifact_id: str, actor: str = Depends(auth)):
        return _ok(dep.delete_artifact(actor, artifact_id).to_dict())

    @app.post("/artifacts/{artifact_id}/recall")
    def recall_artifact(artifact_id: str, actor: str = Depends(auth)):
        return _ok(dep.recall_artifact(actor, artifact_id).to_dict())

    @app.get("/artifacts/{artifact_id}/impact")
    def impact(artifact_id: str, depth: Optional[int] = None, _actor: str = Depends(auth)):
        return _ok(_impact_payload(dep.impact(artifact_id, depth)))

    @app.get("/artifacts/{artifact_id}/provenance")
    def provenance(artifact_id: str, version: Optional[int] = None,
                   _actor: str = Depends(auth)):
        return _ok(dep.provenance(artifact_id, version))

    @app.get("/artifacts/{artifact_id}/priority")
    def artifact_priority(artifact_id: str, _actor: str = Depends(auth)):
        return _ok({"artifact_id": artifact_id,
                    "priority_class": dep.artifact_priority(artifact_id)})

    # -- trace graph ------------------------------------------------------------

    @app.post("/links")
    def link(body: dict = Body(...), actor: str = Depends(auth)):
        created = dep.link(actor, body["from_artifact"], body["to_artifact"],
                           body["link_type"], link_id=body.get("link_id"))
        return _ok(created.to_dict())

    @app.get("/links")
    def list_links(_actor: str = Depends(auth)):
        return _ok([l.to_dict() for l in dep.graph.links()])

    @app.delete("/links/{link_id}")
    def unlink(link_id: str, actor: str = Depends(auth)):
        return _ok(dep.unlink(actor, link_id).to_dict())

    # -- notifications ------------------------------------------------------------

    @app.post("/subscriptions")
    def subscribe(body: dict = Body(...), actor: str = Depends(auth)):
        sub = dep.subscribe(actor, body["artifact_id"],
                            include_link_closure=body.get("include_link_closure", False))
        return _ok(sub.to_dict())

    @app.get("/subscriptions")
    def list_subscriptions(_actor: str = Depends(auth)):
        return _ok([s.to_dict() for s in dep.subscriptions()])

    @app.delete("/subscriptions/{subscription_id}")
    def unsubscribe(subscription_id: str, _actor: str = Depends(auth)):
        return _ok(dep.unsubscribe(subscription_id).to_dict())

    @app.get("/notifications/pending")
    def pending(actor: str = Depends(auth)):
        return _ok([e.to_dict() for e in dep.pending(actor)])

    @app.post("/notifications/{event_id}/ack")
    def ack(event_id: str, _actor: str = Depends(auth)):
        return _ok(dep.ack(event_id).to_dict())

    # -- change requests -----------------------------------------------------------

    @app.post("/crs")
    def submit_cr(body: dict = Body(...), actor: str = Depends(auth)):
        cr = dep.submit_cr(actor, body["artifact_id"], _content_from(body),
                           body.get("rationale", ""))
        return _ok(cr.to_dict())

    @app.get("/crs")
    def list_crs(state: Optional[str] = None, voter: Optional[str] = None,
                 _actor: str = Depends(auth)):
        return _ok([c.to_dict() for c in dep.change_requests(state, voter)])

    @app.get("/crs/{cr_id}")
    def get_cr(cr_id: str, _actor: str = Depends(auth)):
        return _ok(dep.change_request(cr_id).to_dict())

    @app.post("/crs/{cr_id}/route")
    def route_cr(cr_id: str, _actor: str = Depends(auth)):
        return _ok(dep.route_cr(cr_id).to_dict())

    @app.post("/crs/{cr_id}/vote")
    def cast_vote(cr_id: str, body: dict = Body(...), actor: str = Depends(auth)):
        return _ok(dep.cast_vote(actor, cr_id, body["vote"]).to_dict())

    @app.post("/crs/{cr_id}/close")
    def close_review(cr_id: str, _actor: str = Depends(auth)):
        return _ok(dep.close_review(cr_id).to_dict())

    @app.post("/crs/{cr_id}/apply")
    def apply_cr(cr_id: str, _actor: str = Depends(auth)):
        return _ok(dep.apply_cr(cr_id).to_dict())

    @app.post("/crs/{cr_id}/reactivate")
    def reactivate_cr(cr_id: str, actor: str = Depends(auth)):
        return _ok(dep.reactivate_cr(actor, cr_id).to_dict())

    # -- monitoring --------------------------------------------------------------

    @app.post("/watches")
    def watch(body: dict = Body(...), actor: str = Depends(auth)):
        entry = dep.watch(body["artifact_id"], external_path=body.get("external_path"),
                          tool_agent_id=body.get("tool_agent_id"), actor_id=actor)
        return _ok(entry.to_dict())

    @app.get("/watches")
    def list_watches(_actor: str = Depends(auth)):
        return _ok([dep.ams.watches[k].to_dict() for k in sorted(dep.ams.watches)])

    @app.delete("/watches/{artifact_id}")
    def unwatch(artifact_id: str, actor: str = Depends(auth)):
        dep.unwatch(artifact_id, actor_id=actor)
        return _ok({"artifact_id": artifact_id, "watched": False})

    @app.post("/ams/poll")
    def poll_ams(_actor: str = Depends(auth)):
        return _ok(dep.poll_ams())

    @app.post("/ams/scan")
    def scan_external(_actor: str = Depends(auth)):
        return _ok(dep.scan_external())

    # -- log ----------------------------------------------------------------

    @app.get("/log")
    def log_entries(since: int = 0, _actor: str = Depends(auth)):
        return _ok([e.to_dict() for e in dep.log_entries(since)])

    @app.get("/log/verify")
    def verify_log(_actor: str = Depends(auth)):
        return _ok(dep.verify_log())

    @app.get("/log/export")
    def export_log(_actor: str = Depends(auth)):
        return PlainTextResponse(dep.log.export_ndjson(),
                                 media_type="application/x-ndjson",
                                 headers={"X-Log-Head": str(dep.log.head_seq)})

    @app.get("/config")
    def export_config(_actor: str = Depends(auth)):
        config = dep.export_config()
        config.pop("tokens", None)  # bearer secrets never leave the server
        return _ok(config)

    @app.post("/admin/advance-clock")
    def advance_clock(body: dict = Body(...), _actor: str = Depends(auth)):
        return _ok({"now": dep.advance_clock(int(body["seconds"]))})

    # -- stream ------------------------------------------------------------------

    @app.get("/stream")
    def notification_stream(actor: str = Depends(auth), heartbeat: float = 2.0,
                            limit: Optional[int] = None):
        inbox: queue.Queue = queue.Queue()

        def listener(event):
            if event.subscriber_id == actor:
                inbox.put(event)

        def line(kind: str, event=None) -> str:
            record = {"type": kind, "log_head": dep.log.head_seq}
            if event is not None:
                record["event"] = event.to_dict()
            return json.dumps(record) + "\n"

        def generate():
            dep.pss.add_listener(listener)
            seen: set[str] = set()
            sent = 0
            try:
                yield line("head")
                # backlog first: unacked events predating this connection
                for event in dep.pending(actor):
                    seen.add(event.event_id)
                    yield line("event", event)
                    sent += 1
                    if limit is not None and sent >= limit:
                        return
                while True:
                    try:
                        event = inbox.get(timeout=heartbeat)
                    except queue.Empty:
                        yield line("head")
                        continue
                    if event.event_id in seen:
                        continue
                    seen.add(event.event_id)
                    yield line("event", event)
                    sent += 1
                    if limit is not None and sent >= limit:
                        return
            finally:
                dep.pss.remove_listener(listener)

        return StreamingResponse(generate(), media_type="application/x-ndjson",
                                 headers={"X-Log-Head": str(dep.log.head_seq)})

    return app
