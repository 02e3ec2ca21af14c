"""Deployment facade: one serialized entry point over all subsystems.

Wires the directory, repository, access control, trace graph, pub/sub,
monitoring and review workflow together, enforces the capability checks
that individual modules delegate upward, and owns persistence: an NDJSON
log sink, a content-addressed object directory and a config snapshot,
from which `restore` rebuilds the full state (event sourcing).
"""

from __future__ import annotations

import base64
import json
import os
import threading
from typing import Optional

from .access_control import AccessControl, Capability, Grant, Privilege, team_scope
from .ams import ArtifactMonitor
from .clock import SystemClock, VirtualClock
from .cmt_workflow import ChangeRequest, ChangeWorkflow, CrState, Vote
from .core_model import Directory, PriorityClass, ProjectPhase, Requirement
from .errors import (
    ApprovalRequired,
    ArtifactDeleted,
    ConfigInvalid,
    DuplicateId,
    PrivilegeDenied,
    UnknownChangeRequest,
    UnknownTeam,
    WrongState,
)
from .pss import NotificationEvent, PublishSubscribe, Subscription
from .repository import (
    Artifact,
    ArtifactKind,
    ArtifactRepository,
    ArtifactState,
    ArtifactVersion,
    ChangeLog,
    ContentStore,
    EventType,
    LogEntry,
    parse_ndjson_log,
    replay_log,
)
from .trace_graph import LinkType, TraceGraph, TraceLink, provenance_chain
from .util import SYSTEM_AGENT_ID, IdGenerator

DEFAULT_REVIEW_DEADLINE_HOURS = 72

_CONFIG_KEYS = {
    "attribute_weights",
    "priority_threshold",
    "review_deadline_hours",
    "auto_subscribe_leaders",
    "sites",
    "agents",
    "teams",
    "projects",
    "requirements",
    "grants",
    "watches",
    "tokens",
}

SNAPSHOT_FORMAT = "rm-snapshot-v1"


class Deployment:
    """A running middleware instance.

    All public methods serialize on one reentrant lock: the engine's unit
    of concurrency is the whole deployment, which keeps the log append,
    the state mutation and the notification fan-out atomic per operation.
    """

    def __init__(self, config: Optional[dict] = None, data_dir: Optional[str] = None,
                 clock=None, ams_autoforward: bool = True):
        self._lock = threading.RLock()
        self.clock = clock if clock is not None else SystemClock()
        self.ids = IdGenerator()
        self.ams_autoforward = ams_autoforward
        self.auto_subscribe_leaders = True
        self.tokens: dict[str, str] = {}
        self.data_dir = None

        sink_path = None
        objects_root = None
        if data_dir:
            sink_path = os.path.join(data_dir, "log.ndjson")
            if os.path.exists(sink_path) and os.path.getsize(sink_path) > 0:
                raise ConfigInvalid(
                    "data_dir already holds a log; use Deployment.restore",
                    key="data_dir",
                )
            objects_root = os.path.join(data_dir, "objects")
            os.makedirs(objects_root, exist_ok=True)
            self.data_dir = data_dir

        config = dict(config or {})
        for key in config:
            if key not in _CONFIG_KEYS:
                raise ConfigInvalid(f"unknown configuration key: {key}", key=key)

        deadline_hours = config.get("review_deadline_hours", DEFAULT_REVIEW_DEADLINE_HOURS)
        if not isinstance(deadline_hours, (int, float)) or deadline_hours <= 0:
            raise ConfigInvalid("review_deadline_hours must be positive",
                                key="review_deadline_hours")

        self.directory = Directory(
            weights=config.get("attribute_weights"),
            priority_threshold=config.get("priority_threshold", 0.7),
        )
        self.log = ChangeLog(sink_path=sink_path)
        self.store = ContentStore(root=objects_root)
        self.repo = ArtifactRepository(self.log, self.store)
        self.access = AccessControl(
            agent_kind=self.directory.agent_kind,
            is_leader_of=self.directory.is_leader_of,
            is_any_leader=self.directory.is_any_leader,
            artifact_team=self.repo.team_of,
        )
        self.graph = TraceGraph(self.log, artifact_exists=lambda a: a in self.repo.artifacts)
        self.pss = PublishSubscribe(
            self.log,
            impact_fn=lambda a: self.graph.impact_set(a),
            agent_exists=lambda a: a in self.directory.agents,
        )
        self.workflow = ChangeWorkflow(self.log, review_deadline_seconds=int(deadline_hours * 3600))
        self.ams = ArtifactMonitor(
            self.log,
            artifact_exists=lambda a: a in self.repo.artifacts,
            fan_out=self.pss.fan_out,
            submit_tool_cr=self._tool_change_request,
            agent_is_tool=lambda a: self.directory.agent_kind(a) == "TOOL",
        )

        self._load_config(config)
        if self.data_dir:
            self._persist_config()

    # ------------------------------------------------------------------
    # configuration
    # ------------------------------------------------------------------

    def _load_config(self, config: dict) -> None:
        self.auto_subscribe_leaders = bool(config.get("auto_subscribe_leaders", True))
        tokens = config.get("tokens", {})
        if not isinstance(tokens, dict):
            raise ConfigInvalid("tokens must map token strings to agent ids", key="tokens")
        for token, value in tokens.items():
            ok = isinstance(token, str) and (
                isinstance(value, str)
                or (isinstance(value, dict) and isinstance(value.get("agent_id"), str))
            )
            if not ok:
                raise ConfigInvalid(
                    "token values must be an agent id or {agent_id, expires_at}",
                    key="tokens",
                )
        self.tokens = dict(tokens)

        for site in config.get("sites", []):
            self.directory.add_site(site["site_id"], site.get("name", site["site_id"]),
                                    site.get("timezone_offset_minutes", 0))
            self.ids.observe(site["site_id"])
        for agent in config.get("agents", []):
            # team membership is wired from the teams section below
            self.directory.add_agent(agent["agent_id"], agent.get("kind", "HUMAN"),
                                     agent.get("display_name", agent["agent_id"]))
            self.ids.observe(agent["agent_id"])
        for team in config.get("teams", []):
            self.directory.add_team(team["team_id"], team["site_id"], team["leader_id"],
                                    set(team.get("member_ids", [])))
            self.ids.observe(team["team_id"])
        for project in config.get("projects", []):
            threshold = project.get("priority_threshold")
            if threshold is not None and not 0.0 <= threshold <= 1.0:
                raise ConfigInvalid(
                    f"priority_threshold out of range for {project['project_id']}",
                    key=f"projects.{project['project_id']}.priority_threshold",
                )
            self.directory.add_project(project["project_id"], project.get("sdlc_tag", ""),
                                       set(project.get("team_ids", [])),
                                       phase=project.get("phase", "INITIATING"),
                                       priority_threshold=threshold)
            self.ids.observe(project["project_id"])
        for req in config.get("requirements", []):
            # housing artifact may not exist yet on a fresh load; replay or
            # later API calls bring it in
            self.directory.add_requirement(req["requirement_id"], req["artifact_id"])
            self.ids.observe(req["requirement_id"])
            if req.get("attributes"):
                self.directory.classify_requirement(req["requirement_id"], req["attributes"],
                                                    team_of_artifact=self.repo.team_of)
        for record in config.get("grants", []):
            self.access.apply_grant(Grant(
                agent_id=record["agent_id"],
                scope=record["scope"],
                privilege=Privilege(record["privilege"]),
                granted_by=record.get("granted_by", SYSTEM_AGENT_ID),
                granted_at=record.get("granted_at", 0),
            ))
        for record in config.get("watches", []):
            self.ams.apply_watch(record)

    def export_config(self) -> dict:
        with self._lock:
            return {
                "attribute_weights": dict(self.directory.weights),
                "priority_threshold": self.directory.priority_threshold,
                "review_deadline_hours": self.workflow.review_deadline_seconds / 3600,
                "auto_subscribe_leaders": self.auto_subscribe_leaders,
                "sites": [s.to_dict() for s in self._sorted(self.directory.sites)],
                "agents": [a.to_dict() for a in self._sorted(self.directory.agents)],
                "teams": [t.to_dict() for t in self._sorted(self.directory.teams)],
                "projects": [p.to_dict() for p in self._sorted(self.directory.projects)],
                "requirements": [
                    {
                        "requirement_id": r.requirement_id,
                        "artifact_id": r.artifact_id,
                        "attributes": [a.name.value for a in r.attributes],
                    }
                    for r in self._sorted(self.directory.requirements)
                ],
                "grants": [g.to_dict() for g in self.access.grants()],
                "watches": [w.to_dict() for w in
                            (self.ams.watches[k] for k in sorted(self.ams.watches))],
                "tokens": dict(self.tokens),
            }

    @staticmethod
    def _sorted(table: dict):
        return (table[k] for k in sorted(table))

    def _persist_config(self) -> None:
        if not self.data_dir:
            return
        path = os.path.join(self.data_dir, "config.json")
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(self.export_config(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)

    # ------------------------------------------------------------------
    # registry
    # ------------------------------------------------------------------

    def _log_registry(self, actor_id: Optional[str], subject_id: str,
                      phase: str, **fields) -> None:
        # Registry mutations are logged so every accepted write leaves an
        # audit trace; replay treats these as upserts over the config state.
        payload = {"phase": phase}
        payload.update(fields)
        self.log.append(EventType.REGISTRY, actor_id or SYSTEM_AGENT_ID,
                        subject_id, payload, self.clock.now())

    def add_site(self, name: str, timezone_offset_minutes: int,
                 site_id: Optional[str] = None, actor_id: Optional[str] = None):
        with self._lock:
            site_id = site_id or self.ids.next("site")
            self.ids.observe(site_id)
            site = self.directory.add_site(site_id, name, timezone_offset_minutes)
            self._log_registry(actor_id, site_id, "add_site", name=name,
                               timezone_offset_minutes=timezone_offset_minutes)
            self._persist_config()
            return site

    def register_agent(self, display_name: str, kind: str = "HUMAN",
                       team_id: Optional[str] = None, agent_id: Optional[str] = None,
                       actor_id: Optional[str] = None):
        with self._lock:
            agent_id = agent_id or self.ids.next("agent")
            self.ids.observe(agent_id)
            agent = self.directory.add_agent(agent_id, kind, display_name, team_id)
            self._log_registry(actor_id, agent_id, "register_agent",
                               display_name=display_name, kind=agent.kind.value,
                               team_id=team_id)
            self._persist_config()
            return agent

    def register_team(self, site_id: str, leader_id: str, member_ids,
                      team_id: Optional[str] = None, actor_id: Optional[str] = None):
        with self._lock:
            team_id = team_id or self.ids.next("team")
            self.ids.observe(team_id)
            team = self.directory.add_team(team_id, site_id, leader_id, set(member_ids))
            self._log_registry(actor_id, team_id, "register_team", site_id=site_id,
                               leader_id=leader_id, member_ids=sorted(team.member_ids))
            self._persist_config()
            return team

    def register_project(self, sdlc_tag: str, team_ids, phase: str = "INITIATING",
                         priority_threshold: Optional[float] = None,
                         project_id: Optional[str] = None,
                         actor_id: Optional[str] = None):
        with self._lock:
            project_id = project_id or self.ids.next("proj")
            self.ids.observe(project_id)
            project = self.directory.add_project(project_id, sdlc_tag, set(team_ids),
                                                 phase=phase,
                                                 priority_threshold=priority_threshold)
            self._log_registry(actor_id, project_id, "register_project",
                               sdlc_tag=sdlc_tag, team_ids=sorted(project.team_ids),
                               project_phase=project.phase.value,
                               priority_threshold=priority_threshold)
            self._persist_config()
            return project

    def register_requirement(self, artifact_id: str, requirement_id: Optional[str] = None,
                             actor_id: Optional[str] = None):
        with self._lock:
            self.repo.get(artifact_id)  # housing artifact must exist
            requirement_id = requirement_id or self.ids.next("req")
            self.ids.observe(requirement_id)
            req = self.directory.add_requirement(requirement_id, artifact_id)
            self._log_registry(actor_id, requirement_id, "register_requirement",
                               artifact_id=artifact_id)
            self._persist_config()
            return req

    def appoint_leader(self, team_id: str, agent_id: str,
                       actor_id: Optional[str] = None):
        with self._lock:
            team = self.directory.teams.get(team_id)
            previous = team.leader_id if team else None
            team = self.directory.appoint_leader(team_id, agent_id)
            self.log.append(EventType.ROLE_CHANGE, actor_id or SYSTEM_AGENT_ID, team_id, {
                "phase": "appoint_leader",
                "team_id": team_id,
                "agent_id": agent_id,
                "previous_leader": previous,
            }, self.clock.now())
            self._reconcile_auto_subscriptions()
            self._persist_config()
            return team

    def classify_requirement(self, requirement_id: str, attribute_names,
                             actor_id: Optional[str] = None) -> Requirement:
        with self._lock:
            req = self.directory.classify_requirement(requirement_id, list(attribute_names),
                                                      team_of_artifact=self.repo.team_of)
            self._log_registry(actor_id, requirement_id, "classify_requirement",
                               attribute_names=[a.name.value for a in req.attributes],
                               priority_class=req.priority_class.value)
            self._reconcile_auto_subscriptions()
            self._persist_config()
            return req

    def set_priority_threshold(self, project_id: str, threshold: float,
                               actor_id: Optional[str] = None) -> list[str]:
        with self._lock:
            changed = self.directory.set_priority_threshold(project_id, threshold,
                                                            team_of_artifact=self.repo.team_of)
            self._log_registry(actor_id, project_id, "set_priority_threshold",
                               threshold=threshold, reclassified=changed)
            self._reconcile_auto_subscriptions()
            self._persist_config()
            return changed

    def advance_phase(self, project_id: str, target_phase: str,
                      actor_id: Optional[str] = None):
        with self._lock:
            project = self.directory.projects.get(project_id)
            previous = project.phase.value if project else None
            project = self.directory.advance_phase(project_id, target_phase)
            self.log.append(EventType.PHASE_CHANGE, actor_id or SYSTEM_AGENT_ID, project_id, {
                "phase": project.phase.value,
                "previous": previous,
            }, self.clock.now())
            self._persist_config()
            return project

    # ------------------------------------------------------------------
    # access control
    # ------------------------------------------------------------------

    def assign_privilege(self, leader_id: str, agent_id: str, scope: str,
                         privilege: str) -> Grant:
        with self._lock:
            grant = self.access.assign(leader_id, agent_id, scope,
                                       Privilege(privilege), self.clock.now())
            self.log.append(EventType.ROLE_CHANGE, leader_id, agent_id, {
                "phase": "grant",
                "agent_id": agent_id,
                "scope": scope,
                "privilege": grant.privilege.value,
            }, self.clock.now())
            self._persist_config()
            return grant

    def resolve_token(self, token: str) -> Optional[str]:
        """Map a bearer token to its agent id; expired or unknown gives None."""
        with self._lock:
            value = self.tokens.get(token)
            if value is None:
                return None
            if isinstance(value, str):
                return value
            expires_at = value.get("expires_at")
            if expires_at is not None and self.clock.now() >= expires_at:
                return None
            return value["agent_id"]

    def authorize(self, agent_id: str, artifact_id: str, capability: str) -> bool:
        with self._lock:
            return self.access.authorize(agent_id, artifact_id, Capability(capability))

    def effective_privilege(self, agent_id: str, artifact_id: str) -> str:
        with self._lock:
            return self.access.effective_privilege(agent_id, artifact_id).value

    def _require(self, allowed: bool, actor_id: str, capability: str, subject: str) -> None:
        if not allowed:
            raise PrivilegeDenied(f"{actor_id} lacks {capability} on {subject}",
                                  agent_id=actor_id, capability=capability)

    # ------------------------------------------------------------------
    # artifacts
    # ------------------------------------------------------------------

    def create_artifact(self, actor_id: str, kind: str, owner_team_id: str,
                        content: bytes, media_type: str = "text/plain",
                        artifact_id: Optional[str] = None) -> Artifact:
        with self._lock:
            if owner_team_id not in self.directory.teams:
                raise UnknownTeam(f"no such team: {owner_team_id}")
            self._require(
                self.access.authorize_team(actor_id, owner_team_id, Capability.CREATE),
                actor_id, "CREATE", team_scope(owner_team_id),
            )
            artifact_id = artifact_id or self.ids.next("art")
            if artifact_id in self.repo.artifacts:
                raise DuplicateId(f"artifact exists: {artifact_id}")
            self.ids.observe(artifact_id)
            artifact = self.repo.create(artifact_id, actor_id, kind, owner_team_id,
                                        content, self.clock.now(), media_type)
            self._after_change(artifact.versions[0].log_seq)
            return artifact

    def get_artifact(self, artifact_id: str) -> Artifact:
        with self._lock:
            return self.repo.get(artifact_id)

    def read_artifact(self, actor_id: str, artifact_id: str,
                      version: Optional[int] = None) -> ArtifactVersion:
        with self._lock:
            self.repo.get(artifact_id)
            self._require(self.access.authorize(actor_id, artifact_id, Capability.VIEW),
                          actor_id, "VIEW", artifact_id)
            return self.repo.read(artifact_id, version)

    def read_content(self, actor_id: str, artifact_id: str,
                     version: Optional[int] = None) -> bytes:
        with self._lock:
            record = self.read_artifact(actor_id, artifact_id, version)
            return self.store.get(record.content_hash)

    def commit_version(self, actor_id: str, artifact_id: str, content: bytes,
                       change_request_id: Optional[str] = None,
                       expected_parent_version: Optional[int] = None) -> ArtifactVersion:
        with self._lock:
            artifact = self.repo.get(artifact_id)
            if actor_id != SYSTEM_AGENT_ID:
                if self.directory.agent_kind(actor_id) == "TOOL":
                    # GS5: tool changes go through review, never straight to the store
                    raise PrivilegeDenied(
                        f"tool agent {actor_id} must submit a change request",
                        agent_id=actor_id, capability="MODIFY",
                    )
                self._require(self.access.authorize(actor_id, artifact_id, Capability.MODIFY),
                              actor_id, "MODIFY", artifact_id)
            if artifact.state is ArtifactState.DELETED:
                raise ArtifactDeleted(f"{artifact_id} is deleted")
            cr = None
            if change_request_id is not None:
                cr = self._cr(change_request_id)
                if cr.artifact_id != artifact_id:
                    raise WrongState(
                        f"{change_request_id} targets {cr.artifact_id}, not {artifact_id}")
                if cr.state is not CrState.APPROVED:
                    raise WrongState(f"{change_request_id} is {cr.state.value}, not APPROVED")
            elif self.artifact_priority(artifact_id) == PriorityClass.HIGH.value:
                raise ApprovalRequired(
                    f"{artifact_id} is tied to a high-priority requirement; "
                    "commits need an approved change request",
                    artifact_id=artifact_id,
                )
            version = self.repo.commit(artifact_id, actor_id, content, self.clock.now(),
                                       change_request_id=change_request_id,
                                       expected_parent_version=expected_parent_version)
            if cr is not None:
                self.workflow.mark_applied(change_request_id, version.version)
            self._after_change(version.log_seq)
            return version

    def delete_artifact(self, actor_id: str, artifact_id: str) -> Artifact:
        with self._lock:
            self.repo.get(artifact_id)
            self._require(self.access.authorize(actor_id, artifact_id, Capability.DELETE),
                          actor_id, "DELETE", artifact_id)
            artifact = self.repo.delete(artifact_id, actor_id, self.clock.now())
            self._after_change(self.log.head_seq)
            return artifact

    def recall_artifact(self, actor_id: str, artifact_id: str) -> Artifact:
        with self._lock:
            self.repo.get(artifact_id)
            self._require(self.access.authorize(actor_id, artifact_id, Capability.RECALL),
                          actor_id, "RECALL", artifact_id)
            artifact = self.repo.recall(artifact_id, actor_id, self.clock.now())
            self._after_change(self.log.head_seq)
            self._reconcile_auto_subscriptions()
            return artifact

    def artifacts(self) -> list[Artifact]:
        with self._lock:
            return [self.repo.artifacts[k] for k in sorted(self.repo.artifacts)]

    def _after_change(self, seq: int) -> None:
        if self.ams_autoforward:
            self.ams.observe(self.log.get(seq))

    # ------------------------------------------------------------------
    # trace graph
    # ------------------------------------------------------------------

    def link(self, actor_id: str, from_artifact: str, to_artifact: str,
             link_type: str, link_id: Optional[str] = None) -> TraceLink:
        with self._lock:
            self.repo.get(from_artifact)
            self.repo.get(to_artifact)
            self._require(self.access.authorize(actor_id, from_artifact, Capability.MODIFY),
                          actor_id, "MODIFY", from_artifact)
            link_id = link_id or self.ids.next("lnk")
            self.ids.observe(link_id)
            link = self.graph.add(link_id, actor_id, from_artifact, to_artifact,
                                  link_type, self.clock.now())
            self._reconcile_auto_subscriptions()
            return link

    def unlink(self, actor_id: str, link_id: str) -> TraceLink:
        with self._lock:
            link = self.graph.get(link_id)
            self._require(self.access.authorize(actor_id, link.from_artifact, Capability.MODIFY),
                          actor_id, "MODIFY", link.from_artifact)
            return self.graph.remove(link_id, actor_id, self.clock.now())

    def impact(self, artifact_id: str, depth: Optional[int] = None) -> list[tuple[str, int]]:
        with self._lock:
            self.repo.get(artifact_id)
            return self.graph.impact_set(artifact_id, depth)

    def provenance(self, artifact_id: str, version: Optional[int] = None) -> list[dict]:
        with self._lock:
            return provenance_chain(self.repo.get(artifact_id), version)

    def artifact_priority(self, artifact_id: str) -> str:
        with self._lock:
            self.repo.get(artifact_id)
            if artifact_id in self.high_artifact_ids():
                return PriorityClass.HIGH.value
            return PriorityClass.LOW.value

    def high_artifact_ids(self) -> set[str]:
        """Artifacts downstream of (or housing) a HIGH-priority requirement."""
        with self._lock:
            sources = {
                r.artifact_id
                for r in self.directory.high_requirements()
                if r.artifact_id in self.repo.artifacts
            }
            closure = set(sources)
            for source in sources:
                closure.update(aid for aid, _ in self.graph.impact_set(source))
            return closure

    # ------------------------------------------------------------------
    # publish/subscribe
    # ------------------------------------------------------------------

    def subscribe(self, agent_id: str, artifact_id: str,
                  include_link_closure: bool = False) -> Subscription:
        with self._lock:
            self.repo.get(artifact_id)
            self._require(self.access.authorize(agent_id, artifact_id, Capability.VIEW),
                          agent_id, "VIEW", artifact_id)
            return self.pss.subscribe(self.ids.next("sub"), agent_id, artifact_id,
                                      include_link_closure, self.clock.now())

    def unsubscribe(self, subscription_id: str) -> Subscription:
        with self._lock:
            return self.pss.unsubscribe(subscription_id, self.clock.now())

    def ack(self, event_id: str) -> NotificationEvent:
        with self._lock:
            return self.pss.ack(event_id, now=self.clock.now())

    def pending(self, agent_id: str) -> list[NotificationEvent]:
        with self._lock:
            return self.pss.pending(agent_id)

    def subscriptions(self) -> list[Subscription]:
        with self._lock:
            return self.pss.subscriptions()

    def _reconcile_auto_subscriptions(self) -> None:
        """Keep every team leader subscribed to the HIGH artifacts their team
        owns. Additive only; deterministic order so replays agree.
        """
        if not self.auto_subscribe_leaders:
            return
        high = self.high_artifact_ids()
        for team_id in sorted(self.directory.teams):
            leader = self.directory.teams[team_id].leader_id
            for artifact_id in sorted(high):
                artifact = self.repo.artifacts.get(artifact_id)
                if artifact is None or artifact.owner_team_id != team_id:
                    continue
                if self.pss.subscription_for(leader, artifact_id) is None:
                    self.pss.subscribe(self.ids.next("sub"), leader, artifact_id,
                                       include_link_closure=False,
                                       now=self.clock.now(), auto=True)

    # ------------------------------------------------------------------
    # monitoring
    # ------------------------------------------------------------------

    def watch(self, artifact_id: str, external_path: Optional[str] = None,
              tool_agent_id: Optional[str] = None, actor_id: Optional[str] = None):
        with self._lock:
            entry = self.ams.watch(artifact_id, external_path, tool_agent_id)
            self._log_registry(actor_id, artifact_id, "watch",
                               external_path=external_path,
                               tool_agent_id=tool_agent_id)
            self._persist_config()
            return entry

    def unwatch(self, artifact_id: str, actor_id: Optional[str] = None) -> None:
        with self._lock:
            self.ams.unwatch(artifact_id)
            self._log_registry(actor_id, artifact_id, "unwatch")
            self._persist_config()

    def poll_ams(self) -> list[dict]:
        with self._lock:
            return self.ams.poll_internal()

    def scan_external(self) -> dict:
        with self._lock:
            report = self.ams.scan_external()
            return {
                "change_requests": [cr.to_dict() for cr in report["change_requests"]],
                "unreadable": report["unreadable"],
            }

    def _tool_change_request(self, tool_agent_id: str, artifact_id: str,
                             content: bytes, rationale: str) -> ChangeRequest:
        cr = self.submit_cr(tool_agent_id, artifact_id, content, rationale)
        return self.route_cr(cr.cr_id)

    # ------------------------------------------------------------------
    # change requests
    # ------------------------------------------------------------------

    def submit_cr(self, proposer_id: str, artifact_id: str, content: bytes,
                  rationale: str) -> ChangeRequest:
        with self._lock:
            artifact = self.repo.get(artifact_id)
            if artifact.state is ArtifactState.DELETED:
                raise ArtifactDeleted(f"{artifact_id} is deleted")
            allowed = (
                self.access.authorize(proposer_id, artifact_id, Capability.REVIEW_PENDING)
                or self.access.authorize(proposer_id, artifact_id, Capability.MODIFY)
            )
            self._require(allowed, proposer_id, "REVIEW_PENDING", artifact_id)
            cr_id = self.ids.next("cr")
            content_hash = self.store.put(content)
            return self.workflow.submit(cr_id, proposer_id, artifact_id, content_hash,
                                        rationale, self.artifact_priority(artifact_id),
                                        self.clock.now())

    def route_cr(self, cr_id: str) -> ChangeRequest:
        with self._lock:
            cr = self._cr(cr_id)
            chair = self._chair_for(cr.artifact_id)
            voters = sorted(self.directory.change_managers())
            return self.workflow.route(cr_id, chair, voters, self.clock.now())

    def cast_vote(self, agent_id: str, cr_id: str, vote: str) -> ChangeRequest:
        with self._lock:
            cr = self._cr(cr_id)
            self._require(
                self.access.authorize(agent_id, cr.artifact_id, Capability.REVIEW_PENDING),
                agent_id, "REVIEW_PENDING", cr.artifact_id,
            )
            return self.workflow.cast_vote(agent_id, cr_id, Vote(vote), self.clock.now())

    def close_review(self, cr_id: str) -> ChangeRequest:
        with self._lock:
            return self.workflow.close_review(cr_id, self.clock.now())

    def apply_cr(self, cr_id: str) -> ArtifactVersion:
        with self._lock:
            cr = self._cr(cr_id)
            if cr.state is not CrState.APPROVED:
                raise WrongState(f"{cr_id} is {cr.state.value}, not APPROVED")
            content = self.store.get(cr.proposed_content_hash)
            return self.commit_version(SYSTEM_AGENT_ID, cr.artifact_id, content,
                                       change_request_id=cr_id)

    def reactivate_cr(self, leader_id: str, cr_id: str) -> ChangeRequest:
        with self._lock:
            cr = self._cr(cr_id)
            priority = self.artifact_priority(cr.artifact_id)
            chair = self._chair_for(cr.artifact_id)
            voters = sorted(self.directory.change_managers())
            return self.workflow.reactivate(
                leader_id, cr_id,
                is_leader=self.directory.is_any_leader(leader_id),
                priority_class=priority, chair_id=chair, leader_ids=voters,
                now=self.clock.now(),
            )

    def change_request(self, cr_id: str) -> ChangeRequest:
        with self._lock:
            return self._cr(cr_id)

    def change_requests(self, state: Optional[str] = None,
                        voter: Optional[str] = None) -> list[ChangeRequest]:
        with self._lock:
            crs = self.workflow.list(CrState(state) if state else None)
            if voter is not None:
                crs = [c for c in crs if voter in c.voter_ids]
            return crs

    def _cr(self, cr_id: str) -> ChangeRequest:
        cr = self.workflow.get(cr_id)
        if cr is None:
            raise UnknownChangeRequest(f"no such change request: {cr_id}")
        return cr

    def _chair_for(self, artifact_id: str) -> str:
        artifact = self.repo.get(artifact_id)
        team = self.directory.teams.get(artifact.owner_team_id)
        if team is None:
            raise UnknownTeam(f"no such team: {artifact.owner_team_id}")
        return team.leader_id

    # ------------------------------------------------------------------
    # log access and verification
    # ------------------------------------------------------------------

    def log_entries(self, since: int = 0) -> list[LogEntry]:
        with self._lock:
            return self.log.entries(since)

    def verify_log(self) -> dict:
        with self._lock:
            self.log.verify()
            return {"ok": True, "head_seq": self.log.head_seq,
                    "head_hash": self.log.head_hash}

    def advance_clock(self, seconds: int) -> int:
        with self._lock:
            if not isinstance(self.clock, VirtualClock):
                raise WrongState("deployment runs on the system clock")
            return self.clock.advance(seconds)

    # ------------------------------------------------------------------
    # snapshot / restore
    # ------------------------------------------------------------------

    def export_snapshot(self) -> dict:
        with self._lock:
            objects = {}
            for digest in self.store.digests():
                objects[digest] = base64.b64encode(self.store.get(digest)).decode("ascii")
            return {
                "format": SNAPSHOT_FORMAT,
                "config": self.export_config(),
                "log": [e.to_dict() for e in self.log.entries()],
                "objects": objects,
            }

    @classmethod
    def restore_snapshot(cls, snapshot: dict, clock=None, ams_autoforward: bool = True):
        if snapshot.get("format") != SNAPSHOT_FORMAT:
            raise ConfigInvalid(f"unknown snapshot format: {snapshot.get('format')}",
                                key="format")
        entries = [LogEntry.from_dict(r) for r in snapshot.get("log", [])]
        blobs = {d: base64.b64decode(s) for d, s in snapshot.get("objects", {}).items()}
        return cls._from_parts(snapshot.get("config", {}), entries, clock,
                               ams_autoforward, blobs=blobs)

    @classmethod
    def restore(cls, data_dir: str, clock=None, ams_autoforward: bool = True):
        config_path = os.path.join(data_dir, "config.json")
        with open(config_path, "r", encoding="utf-8") as fh:
            config = json.load(fh)
        log_path = os.path.join(data_dir, "log.ndjson")
        entries = []
        if os.path.exists(log_path):
            with open(log_path, "r", encoding="utf-8") as fh:
                entries = parse_ndjson_log(fh.read())
        dep = cls._from_parts(config, entries, clock, ams_autoforward,
                              objects_root=os.path.join(data_dir, "objects"))
        dep.log.attach_sink(log_path)
        dep.data_dir = data_dir
        dep._persist_config()
        return dep

    @classmethod
    def _from_parts(cls, config: dict, entries: list[LogEntry], clock,
                    ams_autoforward: bool, objects_root: Optional[str] = None,
                    blobs: Optional[dict[str, bytes]] = None):
        config = dict(config)
        watches = config.pop("watches", [])
        dep = cls(config=config, clock=clock, ams_autoforward=ams_autoforward)
        if objects_root:
            dep.store.attach_root(objects_root)
        for data in (blobs or {}).values():
            dep.store.put(data)
        for entry in entries:
            dep.log.import_entry(entry)
        dep._rebuild_from_log()
        # project-threshold overrides resolve through owning teams, which
        # only exist after artifacts are replayed
        dep.directory.rederive_priorities(dep.repo.team_of)
        for record in watches:
            dep.ams.apply_watch(record)
        return dep

    def _rebuild_from_log(self) -> None:
        replayed = replay_log(self.log.entries(), verify=False)  # import verified already
        for artifact_id in replayed.artifacts:
            rep = replayed.artifacts[artifact_id]
            artifact = Artifact(
                artifact_id=artifact_id,
                kind=ArtifactKind(rep.kind),
                owner_team_id=rep.owner_team_id,
                state=ArtifactState(rep.state),
                media_type=rep.media_type,
            )
            for v in rep.versions:
                artifact.versions.append(ArtifactVersion(
                    artifact_id=artifact_id,
                    version=v["version"],
                    content_hash=v["content_hash"],
                    author_id=v["author_id"],
                    change_request_id=v["change_request_id"],
                    created_at=v["created_at"],
                    log_seq=v["log_seq"],
                ))
            self.repo.artifacts[artifact_id] = artifact
            self.ids.observe(artifact_id)
        for entry in self.log.entries():
            payload = entry.payload
            if entry.event_type is EventType.LINK:
                self.graph.apply_link(TraceLink(
                    link_id=payload["link_id"],
                    from_artifact=payload["from_artifact"],
                    to_artifact=payload["to_artifact"],
                    link_type=LinkType(payload["link_type"]),
                    created_by=entry.actor_id,
                    created_at=entry.timestamp,
                ))
                self.ids.observe(payload["link_id"])
            elif entry.event_type is EventType.UNLINK:
                self.graph.apply_unlink(payload["link_id"])
            elif entry.event_type is EventType.SUBSCRIBE:
                self.pss.apply_subscription(Subscription(
                    subscription_id=payload["subscription_id"],
                    agent_id=entry.actor_id,
                    artifact_id=entry.subject_id,
                    include_link_closure=payload.get("include_link_closure", False),
                    created_at=entry.timestamp,
                ))
                self.ids.observe(payload["subscription_id"])
            elif entry.event_type is EventType.UNSUBSCRIBE:
                self.pss.apply_unsubscription(payload["subscription_id"])
            elif entry.event_type is EventType.NOTIFY:
                # acks are delivery bookkeeping, not history; they reset on
                # restart (at-least-once contract)
                self.pss.apply_notification(NotificationEvent(
                    event_id=payload["event_id"],
                    subscriber_id=payload["subscriber_id"],
                    artifact_id=entry.subject_id,
                    event_type=payload["change_type"],
                    log_seq=payload["change_seq"],
                    impact=payload.get("impact"),
                ))
            elif entry.event_type is EventType.ACK:
                self.pss.apply_ack(payload["event_id"])
            elif entry.event_type is EventType.ROLE_CHANGE:
                if payload.get("phase") == "grant":
                    self.access.apply_grant(Grant(
                        agent_id=payload["agent_id"],
                        scope=payload["scope"],
                        privilege=Privilege(payload["privilege"]),
                        granted_by=entry.actor_id,
                        granted_at=entry.timestamp,
                    ))
                elif payload.get("phase") == "appoint_leader":
                    # normally a no-op over the config snapshot; covers the
                    # window where the log flushed but the snapshot did not
                    team = self.directory.teams.get(payload["team_id"])
                    if team is not None and team.leader_id != payload["agent_id"]:
                        self.directory.appoint_leader(payload["team_id"], payload["agent_id"])
            elif entry.event_type is EventType.PHASE_CHANGE:
                project = self.directory.projects.get(entry.subject_id)
                if project is not None:
                    # direct set: replaying an old transition against the
                    # already-current phase must not trip the transition check
                    project.phase = ProjectPhase(payload["phase"])
            elif entry.event_type is EventType.REGISTRY:
                self._replay_registry(entry)
            elif entry.event_type is EventType.CR_SUBMIT:
                cr_id = payload["cr_id"]
                if payload.get("phase") == "reactivate" and cr_id in self.workflow.requests:
                    cr = self.workflow.requests[cr_id]
                    cr.state = CrState.SUBMITTED
                    cr.priority_class = payload["priority_class"]
                    cr.votes = {}
                    cr.voter_ids = []
                    cr.decided_at = None
                    cr.no_votes_cast = False
                else:
                    self.workflow.requests[cr_id] = ChangeRequest(
                        cr_id=cr_id,
                        artifact_id=entry.subject_id,
                        proposer_id=entry.actor_id,
                        proposed_content_hash=payload["proposed_content_hash"],
                        rationale=payload["rationale"],
                        priority_class=payload["priority_class"],
                        submitted_at=entry.timestamp,
                    )
                    self.ids.observe(cr_id)
            elif entry.event_type is EventType.CR_DECIDE:
                cr = self.workflow.requests.get(payload["cr_id"])
                if cr is None:
                    continue
                phase = payload.get("phase")
                if phase == "route":
                    cr.state = CrState(payload["state"])
                    cr.chair_id = payload["chair_id"]
                    cr.voter_ids = list(payload["voter_ids"])
                    cr.review_deadline = payload["review_deadline"]
                elif phase == "ballot":
                    cr.votes[entry.actor_id] = Vote(payload["vote"])
                elif phase == "decision":
                    cr.state = CrState(payload["state"])
                    cr.decided_at = entry.timestamp
                    cr.no_votes_cast = payload.get("no_votes_cast", False)
            elif entry.event_type is EventType.MODIFY:
                cr_id = payload.get("change_request_id")
                if cr_id and cr_id in self.workflow.requests:
                    cr = self.workflow.requests[cr_id]
                    cr.state = CrState.APPLIED
                    cr.applied_version = payload["version"]

    def _replay_registry(self, entry: LogEntry) -> None:
        """Upsert registry state from a logged mutation. The config snapshot
        normally already carries the result; these matter when the log
        outlived the snapshot by a write."""
        payload = entry.payload
        phase = payload.get("phase")
        subject = entry.subject_id
        directory = self.directory
        self.ids.observe(subject)
        if phase == "add_site" and subject not in directory.sites:
            directory.add_site(subject, payload["name"],
                               payload["timezone_offset_minutes"])
        elif phase == "register_agent" and subject not in directory.agents:
            directory.add_agent(subject, payload["kind"], payload["display_name"],
                                payload.get("team_id"))
        elif phase == "register_team" and subject not in directory.teams:
            directory.add_team(subject, payload["site_id"], payload["leader_id"],
                               set(payload["member_ids"]))
        elif phase == "register_project" and subject not in directory.projects:
            directory.add_project(subject, payload["sdlc_tag"],
                                  set(payload["team_ids"]),
                                  phase=payload["project_phase"],
                                  priority_threshold=payload.get("priority_threshold"))
        elif phase == "register_requirement" and subject not in directory.requirements:
            directory.add_requirement(subject, payload["artifact_id"])
        elif phase == "classify_requirement" and subject in directory.requirements:
            directory.classify_requirement(subject, list(payload["attribute_names"]),
                                           team_of_artifact=self.repo.team_of)
        elif phase == "set_priority_threshold" and subject in directory.projects:
            directory.set_priority_threshold(subject, payload["threshold"],
                                             team_of_artifact=self.repo.team_of)
        elif phase == "watch":
            if subject in self.repo.artifacts and subject not in self.ams.watches:
                self.ams.apply_watch({
                    "artifact_id": subject,
                    "external_path": payload.get("external_path"),
                    "tool_agent_id": payload.get("tool_agent_id"),
                })
        elif phase == "unwatch":
            self.ams.watches.pop(subject, None)


def open_deployment(data_dir: Optional[str], config: Optional[dict] = None,
                    clock=None, ams_autoforward: bool = True) -> Deployment:
    """Restore from data_dir when a previous run left state there, else start
    fresh (writing through to data_dir when given)."""
    if data_dir and os.path.exists(os.path.join(data_dir, "config.json")):
        return Deployment.restore(data_dir, clock=clock, ams_autoforward=ams_autoforward)
    return Deployment(config=config, data_dir=data_dir, clock=clock,
                      ams_autoforward=ams_autoforward)
