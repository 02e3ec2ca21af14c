"""`rmctl`: command-line client for the HTTP service.

Address and token come from flags or the environment (RM_ADDR, RM_TOKEN,
RM_TOKEN_FILE). Every response envelope is printed as JSON so output can
be piped into jq or scripts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

import httpx

from .util import b64decode_content, b64encode_content

DEFAULT_ADDR = "http://127.0.0.1:8787"


class ApiClient:
    def __init__(self, addr: str, token: Optional[str]):
        self.addr = addr.rstrip("/")
        headers = {"Authorization": f"Bearer {token}"} if token else {}
        self._client = httpx.Client(base_url=self.addr, headers=headers, timeout=30.0)

    def request(self, method: str, path: str, body: Optional[dict] = None,
                params: Optional[dict] = None) -> tuple[int, dict]:
        params = {k: v for k, v in (params or {}).items() if v is not None}
        response = self._client.request(method, path, json=body, params=params)
        return response.status_code, response.json()

    def text(self, path: str) -> str:
        return self._client.get(path).text

    def stream_lines(self, path: str, params: dict):
        params = {k: v for k, v in params.items() if v is not None}
        with self._client.stream("GET", path, params=params, timeout=None) as response:
            for line in response.iter_lines():
                if line:
                    yield line


def _read_content(args) -> dict:
    """Content from --content (text) or --file (raw bytes, base64 on the wire)."""
    if getattr(args, "file", None):
        with open(args.file, "rb") as fh:
            return {"content_b64": b64encode_content(fh.read())}
    if getattr(args, "content", None) is not None:
        return {"content": args.content}
    raise SystemExit("one of --content or --file is required")


def _csv(value: Optional[str]) -> list[str]:
    return [v for v in (value or "").split(",") if v]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rmctl",
                                     description="Client for the change-management middleware.")
    parser.add_argument("--addr", default=os.environ.get("RM_ADDR", DEFAULT_ADDR))
    parser.add_argument("--token", default=None, help="bearer token (default: RM_TOKEN / RM_TOKEN_FILE)")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("health")
    sub.add_parser("endpoints")

    p = sub.add_parser("site", help="site registry")
    ps = p.add_subparsers(dest="action", required=True)
    c = ps.add_parser("add")
    c.add_argument("--name", required=True)
    c.add_argument("--tz", type=int, default=0, help="timezone offset in minutes")
    c.add_argument("--id", dest="site_id")
    ps.add_parser("list")

    p = sub.add_parser("agent", help="agent registry")
    ps = p.add_subparsers(dest="action", required=True)
    c = ps.add_parser("add")
    c.add_argument("--name", required=True)
    c.add_argument("--kind", default="HUMAN", choices=["HUMAN", "TOOL"])
    c.add_argument("--team")
    c.add_argument("--id", dest="agent_id")
    ps.add_parser("list")

    p = sub.add_parser("team", help="team registry")
    ps = p.add_subparsers(dest="action", required=True)
    c = ps.add_parser("add")
    c.add_argument("--site", required=True)
    c.add_argument("--leader", required=True)
    c.add_argument("--members", default="", help="comma-separated agent ids")
    c.add_argument("--id", dest="team_id")
    ps.add_parser("list")
    c = ps.add_parser("set-leader")
    c.add_argument("team_id")
    c.add_argument("agent_id")

    p = sub.add_parser("project", help="project registry")
    ps = p.add_subparsers(dest="action", required=True)
    c = ps.add_parser("add")
    c.add_argument("--sdlc", default="")
    c.add_argument("--teams", default="", help="comma-separated team ids")
    c.add_argument("--phase", default="INITIATING")
    c.add_argument("--threshold", type=float)
    c.add_argument("--id", dest="project_id")
    ps.add_parser("list")
    c = ps.add_parser("phase")
    c.add_argument("project_id")
    c.add_argument("phase")
    c = ps.add_parser("threshold")
    c.add_argument("project_id")
    c.add_argument("value", type=float)

    p = sub.add_parser("req", help="requirements")
    ps = p.add_subparsers(dest="action", required=True)
    c = ps.add_parser("add")
    c.add_argument("--artifact", required=True)
    c.add_argument("--id", dest="requirement_id")
    ps.add_parser("list")
    c = ps.add_parser("classify")
    c.add_argument("requirement_id")
    c.add_argument("attributes", help="comma-separated dependability attributes")

    c = sub.add_parser("grant", help="assign a privilege (actor = token bearer)")
    c.add_argument("--agent", required=True)
    c.add_argument("--scope", required=True, help="artifact id or team:<team_id>")
    c.add_argument("--privilege", required=True)
    sub.add_parser("grants")

    p = sub.add_parser("artifact", help="artifact repository")
    ps = p.add_subparsers(dest="action", required=True)
    c = ps.add_parser("create")
    c.add_argument("--kind", required=True)
    c.add_argument("--team", required=True)
    c.add_argument("--content")
    c.add_argument("--file")
    c.add_argument("--media", default="text/plain")
    c.add_argument("--id", dest="artifact_id")
    ps.add_parser("list")
    for name in ("show", "content", "provenance", "priority"):
        c = ps.add_parser(name)
        c.add_argument("artifact_id")
        if name in ("show", "content", "provenance"):
            c.add_argument("--version", type=int)
        if name == "content":
            c.add_argument("--raw", action="store_true", help="write bytes to stdout")
    c = ps.add_parser("commit")
    c.add_argument("artifact_id")
    c.add_argument("--content")
    c.add_argument("--file")
    c.add_argument("--cr", dest="change_request_id")
    c.add_argument("--parent", type=int, dest="expected_parent_version")
    c = ps.add_parser("delete")
    c.add_argument("artifact_id")
    c = ps.add_parser("recall")
    c.add_argument("artifact_id")
    c = ps.add_parser("impact")
    c.add_argument("artifact_id")
    c.add_argument("--depth", type=int)

    p = sub.add_parser("link", help="trace links")
    ps = p.add_subparsers(dest="action", required=True)
    c = ps.add_parser("add")
    c.add_argument("from_artifact")
    c.add_argument("to_artifact")
    c.add_argument("link_type")
    c.add_argument("--id", dest="link_id")
    ps.add_parser("list")
    c = ps.add_parser("rm")
    c.add_argument("link_id")

    p = sub.add_parser("sub", help="subscriptions (agent = token bearer)")
    ps = p.add_subparsers(dest="action", required=True)
    c = ps.add_parser("add")
    c.add_argument("artifact_id")
    c.add_argument("--closure", action="store_true")
    ps.add_parser("list")
    c = ps.add_parser("rm")
    c.add_argument("subscription_id")

    sub.add_parser("pending", help="unacknowledged notifications for the token bearer")
    c = sub.add_parser("ack")
    c.add_argument("event_id")

    p = sub.add_parser("cr", help="change requests")
    ps = p.add_subparsers(dest="action", required=True)
    c = ps.add_parser("submit")
    c.add_argument("artifact_id")
    c.add_argument("--content")
    c.add_argument("--file")
    c.add_argument("--rationale", default="")
    c = ps.add_parser("list")
    c.add_argument("--state")
    c.add_argument("--voter")
    for name in ("show", "route", "close", "apply", "reactivate"):
        c = ps.add_parser(name)
        c.add_argument("cr_id")
    c = ps.add_parser("vote")
    c.add_argument("cr_id")
    c.add_argument("vote", choices=["APPROVE", "NOTE", "DISAPPROVE"])

    p = sub.add_parser("watch", help="monitoring table")
    ps = p.add_subparsers(dest="action", required=True)
    c = ps.add_parser("add")
    c.add_argument("artifact_id")
    c.add_argument("--path", dest="external_path")
    c.add_argument("--tool", dest="tool_agent_id")
    ps.add_parser("list")
    c = ps.add_parser("rm")
    c.add_argument("artifact_id")

    p = sub.add_parser("ams", help="monitor sweeps")
    ps = p.add_subparsers(dest="action", required=True)
    ps.add_parser("poll")
    ps.add_parser("scan")

    c = sub.add_parser("log")
    c.add_argument("--since", type=int, default=0)
    sub.add_parser("log-verify")
    sub.add_parser("log-export")
    sub.add_parser("config")

    c = sub.add_parser("stream", help="follow the notification stream (NDJSON)")
    c.add_argument("--limit", type=int)
    c.add_argument("--heartbeat", type=float, default=2.0)

    c = sub.add_parser("clock-advance")
    c.add_argument("seconds", type=int)

    return parser


def _dispatch(client: ApiClient, args) -> tuple[int, object]:
    cmd, action = args.command, getattr(args, "action", None)
    if cmd == "health":
        return client.request("GET", "/health")
    if cmd == "endpoints":
        return client.request("GET", "/endpoints")
    if cmd == "site":
        if action == "add":
            return client.request("POST", "/sites", {
                "name": args.name, "timezone_offset_minutes": args.tz,
                "site_id": args.site_id})
        return client.request("GET", "/sites")
    if cmd == "agent":
        if action == "add":
            return client.request("POST", "/agents", {
                "display_name": args.name, "kind": args.kind,
                "team_id": args.team, "agent_id": args.agent_id})
        return client.request("GET", "/agents")
    if cmd == "team":
        if action == "add":
            return client.request("POST", "/teams", {
                "site_id": args.site, "leader_id": args.leader,
                "member_ids": _csv(args.members), "team_id": args.team_id})
        if action == "set-leader":
            return client.request("POST", f"/teams/{args.team_id}/leader",
                                  {"agent_id": args.agent_id})
        return client.request("GET", "/teams")
    if cmd == "project":
        if action == "add":
            return client.request("POST", "/projects", {
                "sdlc_tag": args.sdlc, "team_ids": _csv(args.teams),
                "phase": args.phase, "priority_threshold": args.threshold,
                "project_id": args.project_id})
        if action == "phase":
            return client.request("POST", f"/projects/{args.project_id}/phase",
                                  {"phase": args.phase})
        if action == "threshold":
            return client.request("POST", f"/projects/{args.project_id}/threshold",
                                  {"threshold": args.value})
        return client.request("GET", "/projects")
    if cmd == "req":
        if action == "add":
            return client.request("POST", "/requirements", {
                "artifact_id": args.artifact, "requirement_id": args.requirement_id})
        if action == "classify":
            return client.request("POST", f"/requirements/{args.requirement_id}/classify",
                                  {"attributes": _csv(args.attributes)})
        return client.request("GET", "/requirements")
    if cmd == "grant":
        return client.request("POST", "/privileges", {
            "agent_id": args.agent, "scope": args.scope, "privilege": args.privilege})
    if cmd == "grants":
        return client.request("GET", "/privileges")
    if cmd == "artifact":
        if action == "create":
            body = {"kind": args.kind, "owner_team_id": args.team,
                    "media_type": args.media, "artifact_id": args.artifact_id}
            body.update(_read_content(args))
            return client.request("POST", "/artifacts", body)
        if action == "show":
            return client.request("GET", f"/artifacts/{args.artifact_id}",
                                  params={"version": args.version})
        if action == "content":
            status, envelope = client.request(
                "GET", f"/artifacts/{args.artifact_id}/content",
                params={"version": args.version})
            if args.raw and status == 200:
                sys.stdout.buffer.write(b64decode_content(envelope["data"]["content_b64"]))
                return status, None
            return status, envelope
        if action == "commit":
            body = {"change_request_id": args.change_request_id,
                    "expected_parent_version": args.expected_parent_version}
            body.update(_read_content(args))
            return client.request("POST", f"/artifacts/{args.artifact_id}/commit", body)
        if action == "delete":
            return client.request("DELETE", f"/artifacts/{args.artifact_id}")
        if action == "recall":
            return client.request("POST", f"/artifacts/{args.artifact_id}/recall")
        if action == "impact":
            return client.request("GET", f"/artifacts/{args.artifact_id}/impact",
                                  params={"depth": args.depth})
        if action == "provenance":
            return client.request("GET", f"/artifacts/{args.artifact_id}/provenance",
                                  params={"version": args.version})
        if action == "priority":
            return client.request("GET", f"/artifacts/{args.artifact_id}/priority")
        return client.request("GET", "/artifacts")
    if cmd == "link":
        if action == "add":
            return client.request("POST", "/links", {
                "from_artifact": args.from_artifact, "to_artifact": args.to_artifact,
                "link_type": args.link_type, "link_id": args.link_id})
        if action == "rm":
            return client.request("DELETE", f"/links/{args.link_id}")
        return client.request("GET", "/links")
    if cmd == "sub":
        if action == "add":
            return client.request("POST", "/subscriptions", {
                "artifact_id": args.artifact_id, "include_link_closure": args.closure})
        if action == "rm":
            return client.request("DELETE", f"/subscriptions/{args.subscription_id}")
        return client.request("GET", "/subscriptions")
    if cmd == "pending":
        return client.request("GET", "/notifications/pending")
    if cmd == "ack":
        return client.request("POST", f"/notifications/{args.event_id}/ack")
    if cmd == "cr":
        if action == "submit":
            body = {"artifact_id": args.artifact_id, "rationale": args.rationale}
            body.update(_read_content(args))
            return client.request("POST", "/crs", body)
        if action == "list":
            return client.request("GET", "/crs",
                                  params={"state": args.state, "voter": args.voter})
        if action == "vote":
            return client.request("POST", f"/crs/{args.cr_id}/vote", {"vote": args.vote})
        if action in ("route", "close", "apply", "reactivate"):
            return client.request("POST", f"/crs/{args.cr_id}/{action}")
        return client.request("GET", f"/crs/{args.cr_id}")
    if cmd == "watch":
        if action == "add":
            return client.request("POST", "/watches", {
                "artifact_id": args.artifact_id, "external_path": args.external_path,
                "tool_agent_id": args.tool_agent_id})
        if action == "rm":
            return client.request("DELETE", f"/watches/{args.artifact_id}")
        return client.request("GET", "/watches")
    if cmd == "ams":
        return client.request("POST", f"/ams/{action}")
    if cmd == "log":
        return client.request("GET", "/log", params={"since": args.since})
    if cmd == "log-verify":
        return client.request("GET", "/log/verify")
    if cmd == "log-export":
        sys.stdout.write(client.text("/log/export"))
        return 200, None
    if cmd == "config":
        return client.request("GET", "/config")
    if cmd == "stream":
        for line in client.stream_lines("/stream", {"limit": args.limit,
                                                    "heartbeat": args.heartbeat}):
            print(line, flush=True)
        return 200, None
    if cmd == "clock-advance":
        return client.request("POST", "/admin/advance-clock", {"seconds": args.seconds})
    raise SystemExit(f"unhandled command: {cmd}")


def resolve_token(args) -> Optional[str]:
    if args.token:
        return args.token
    if os.environ.get("RM_TOKEN"):
        return os.environ["RM_TOKEN"]
    path = os.environ.get("RM_TOKEN_FILE")
    if path and os.path.exists(path):
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read().strip()
    return None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    client = ApiClient(args.addr, resolve_token(args))
    try:
        status, payload = _dispatch(client, args)
    except httpx.HTTPError as exc:
        print(f"request failed: {exc}", file=sys.stderr)
        return 4
    if payload is not None:
        print(json.dumps(payload, indent=2, sort_keys=True))
    return 0 if status < 400 else 1


if __name__ == "__main__":
    sys.exit(main())
