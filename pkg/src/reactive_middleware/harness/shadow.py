"""A second, minimal bookkeeping model of deployment state.

The runner feeds it the same steps it feeds the engine and then uses
its subscription table and leader roster as the reference points the
H1 and routing verdicts compare against. It shares no code with the
engine's graph, pub/sub or priority modules; overlaps are re-derived
from the rules themselves (via checks.impact_oracle for closures).
"""

from __future__ import annotations

from typing import Optional

from .checks import impact_oracle

DEFAULT_WEIGHTS = {
    "SAFETY": 1.0,
    "RELIABILITY": 0.9,
    "SECURITY": 0.8,
    "ROBUSTNESS": 0.7,
    "AVAILABILITY": 0.6,
    "MAINTAINABILITY": 0.3,
}

# plain-step outcome tables, mirrored from the review rules
VOTE_TO_STATE = {"APPROVE": "APPROVED", "NOTE": "NOTED", "DISAPPROVE": "DISAPPROVED"}


def decide(votes: dict, chair_id: str) -> tuple[str, bool]:
    """Plurality with chair tie-break; (state, no_votes_cast)."""
    if not votes:
        return "DISAPPROVED", True
    tally: dict[str, int] = {}
    for vote in votes.values():
        tally[vote] = tally.get(vote, 0) + 1
    top = max(tally.values())
    tied = sorted(v for v, n in tally.items() if n == top)
    if len(tied) == 1:
        return VOTE_TO_STATE[tied[0]], False
    chair_vote = votes.get(chair_id)
    if chair_vote in tied:
        return VOTE_TO_STATE[chair_vote], False
    return "DISAPPROVED", False


class ShadowModel:
    def __init__(self, config: Optional[dict] = None):
        config = config or {}
        self.weights = dict(DEFAULT_WEIGHTS)
        self.weights.update(config.get("attribute_weights", {}))
        self.default_threshold = config.get("priority_threshold", 0.7)
        self.auto_subscribe = bool(config.get("auto_subscribe_leaders", True))
        self.sites: set[str] = set()
        self.agents: dict[str, str] = {}  # agent -> kind
        self.teams: dict[str, dict] = {}  # team -> {leader, members}
        self.projects: dict[str, dict] = {}  # project -> {teams, threshold}
        self.requirements: dict[str, dict] = {}  # req -> {artifact, score, classified}
        self.artifacts: dict[str, dict] = {}  # artifact -> {team, state, versions}
        self.edges: dict[str, tuple] = {}  # link id or alias -> (from, to, type)
        self.subs: dict[tuple, bool] = {}  # (agent, artifact) -> closure flag
        self.sub_alias: dict[str, tuple] = {}  # caller's handle -> pair
        self.grants: dict[tuple, str] = {}  # (agent, scope) -> privilege
        self.crs: dict[str, dict] = {}

        for site in config.get("sites", []):
            self.sites.add(site["site_id"])
        for agent in config.get("agents", []):
            self.agents[agent["agent_id"]] = agent.get("kind", "HUMAN")
        for team in config.get("teams", []):
            members = set(team.get("member_ids", []))
            members.add(team["leader_id"])
            self.teams[team["team_id"]] = {"leader": team["leader_id"], "members": members}
        for project in config.get("projects", []):
            self.projects[project["project_id"]] = {
                "teams": set(project.get("team_ids", [])),
                "threshold": project.get("priority_threshold"),
            }
        for req in config.get("requirements", []):
            entry = {"artifact": req["artifact_id"], "score": None, "classified": False}
            self.requirements[req["requirement_id"]] = entry
            if req.get("attributes"):
                entry["score"] = max(self.weights[a] for a in req["attributes"])
                entry["classified"] = True
        for record in config.get("grants", []):
            self.grants[(record["agent_id"], record["scope"])] = record["privilege"]

    # -- queries --------------------------------------------------------------

    def pairs(self) -> dict:
        return dict(self.subs)

    def leaders_sorted(self) -> list[str]:
        return sorted({t["leader"] for t in self.teams.values()})

    def leader_of(self, team_id: str) -> Optional[str]:
        team = self.teams.get(team_id)
        return team["leader"] if team else None

    def team_of(self, artifact_id: str) -> Optional[str]:
        art = self.artifacts.get(artifact_id)
        return art["team"] if art else None

    def effective_threshold(self, artifact_id: str) -> float:
        team = self.team_of(artifact_id)
        if team is not None:
            for project in self.projects.values():
                if team in project["teams"] and project["threshold"] is not None:
                    return project["threshold"]
        return self.default_threshold

    def requirement_class(self, requirement_id: str) -> str:
        req = self.requirements[requirement_id]
        if not req["classified"]:
            return "LOW"
        threshold = self.effective_threshold(req["artifact"])
        return "HIGH" if req["score"] >= threshold else "LOW"

    def high_artifacts(self) -> set[str]:
        sources = {
            req["artifact"]
            for rid, req in self.requirements.items()
            if req["artifact"] in self.artifacts and self.requirement_class(rid) == "HIGH"
        }
        closure = set(sources)
        triples = list(self.edges.values())
        for source in sources:
            closure.update(a for a, _ in impact_oracle(triples, source))
        return closure

    def artifact_priority(self, artifact_id: str) -> str:
        return "HIGH" if artifact_id in self.high_artifacts() else "LOW"

    def impact(self, artifact_id: str) -> list[tuple[str, int]]:
        return impact_oracle(list(self.edges.values()), artifact_id)

    def reconcile_auto_subs(self) -> None:
        if not self.auto_subscribe:
            return
        high = self.high_artifacts()
        for team_id in sorted(self.teams):
            leader = self.teams[team_id]["leader"]
            for artifact_id in sorted(high):
                if self.artifacts[artifact_id]["team"] != team_id:
                    continue
                if (leader, artifact_id) not in self.subs:
                    self.subs[(leader, artifact_id)] = False

    # -- step application -----------------------------------------------------

    def apply_step(self, step: dict, result: Optional[dict] = None) -> None:
        """Mirror the state effect of an already-accepted step. `result`
        carries engine-assigned ids where the step did not fix them."""
        op = step["op"]
        result = result or {}

        def rid(key, fallback_key=None):
            if key in result:
                return result[key]
            if fallback_key and step.get(fallback_key):
                return step[fallback_key]
            return step.get("bind")

        if op == "add_site":
            self.sites.add(rid("site_id", "site_id"))
        elif op == "register_agent":
            agent_id = rid("agent_id", "agent_id")
            self.agents[agent_id] = step.get("kind", "HUMAN")
            team = step.get("team")
            if team and team in self.teams:
                self.teams[team]["members"].add(agent_id)
        elif op == "register_team":
            team_id = rid("team_id", "team_id")
            members = set(step.get("members", []))
            members.add(step["leader"])
            self.teams[team_id] = {"leader": step["leader"], "members": members}
        elif op == "register_project":
            self.projects[rid("project_id", "project_id")] = {
                "teams": set(step.get("teams", [])),
                "threshold": step.get("priority_threshold"),
            }
        elif op == "register_requirement":
            self.requirements[rid("requirement_id", "requirement_id")] = {
                "artifact": step["artifact"], "score": None, "classified": False,
            }
        elif op == "classify_requirement":
            req = self.requirements[step["requirement"]]
            req["score"] = max(self.weights[a] for a in step["attributes"])
            req["classified"] = True
            self.reconcile_auto_subs()
        elif op == "set_priority_threshold":
            self.projects[step["project"]]["threshold"] = step["threshold"]
            self.reconcile_auto_subs()
        elif op == "appoint_leader":
            team = self.teams[step["team"]]
            team["leader"] = step["agent"]
            team["members"].add(step["agent"])
            self.reconcile_auto_subs()
        elif op == "advance_phase":
            pass
        elif op == "assign_privilege":
            self.grants[(step["agent"], step["scope"])] = step["privilege"]
        elif op == "create_artifact":
            artifact_id = rid("artifact_id", "artifact_id")
            self.artifacts[artifact_id] = {
                "team": step["team"], "state": "ACTIVE", "versions": 1,
            }
        elif op == "commit_version":
            self.artifacts[step["artifact"]]["versions"] += 1
        elif op == "delete_artifact":
            self.artifacts[step["artifact"]]["state"] = "DELETED"
        elif op == "recall_artifact":
            self.artifacts[step["artifact"]]["state"] = "ACTIVE"
            self.reconcile_auto_subs()
        elif op == "link":
            alias = rid("link_id")
            self.edges[alias] = (step["from"], step["to"], step["type"])
            self.reconcile_auto_subs()
        elif op == "unlink":
            self.edges.pop(step["link"], None)
        elif op == "subscribe":
            pair = (step["agent"], step["artifact"])
            self.subs[pair] = bool(step.get("closure", False))
            alias = rid("subscription_id")
            if alias:
                self.sub_alias[alias] = pair
        elif op == "unsubscribe":
            pair = self.sub_alias.pop(step["subscription"], None)
            if pair is not None:
                self.subs.pop(pair, None)
        elif op == "submit_cr":
            cr_id = rid("cr_id")
            self.crs[cr_id] = {
                "artifact": step["artifact"],
                "state": "SUBMITTED",
                "priority": self.artifact_priority(step["artifact"]),
                "votes": {},
                "chair": None,
            }
        elif op == "route_cr":
            cr = self.crs[step["cr"]]
            cr["chair"] = self.leader_of(self.team_of(cr["artifact"]))
            if cr["priority"] == "HIGH":
                cr["state"] = "GLOBAL_REVIEW"
                cr["voters"] = self.leaders_sorted()
            else:
                cr["state"] = "LOCAL_REVIEW"
                cr["voters"] = [cr["chair"]]
        elif op == "cast_vote":
            cr = self.crs[step["cr"]]
            cr["votes"][step["actor"]] = step["vote"]
            if cr["state"] == "LOCAL_REVIEW":
                # sole decider: the chair's vote is the decision
                cr["state"] = VOTE_TO_STATE[step["vote"]]
        elif op == "close_review":
            cr = self.crs[step["cr"]]
            if cr["state"] == "GLOBAL_REVIEW":
                cr["state"], _ = decide(cr["votes"], cr["chair"])
        elif op == "apply_cr":
            cr = self.crs[step["cr"]]
            cr["state"] = "APPLIED"
            self.artifacts[cr["artifact"]]["versions"] += 1
        elif op == "reactivate_cr":
            cr = self.crs[step["cr"]]
            cr["votes"] = {}
            cr["priority"] = self.artifact_priority(cr["artifact"])
            cr["chair"] = self.leader_of(self.team_of(cr["artifact"]))
            if cr["priority"] == "HIGH":
                cr["state"] = "GLOBAL_REVIEW"
                cr["voters"] = self.leaders_sorted()
            else:
                cr["state"] = "LOCAL_REVIEW"
                cr["voters"] = [cr["chair"]]
        elif op in ("watch", "unwatch", "poll_ams", "scan_external",
                    "ack_all", "advance_clock"):
            pass
        else:
            raise KeyError(f"shadow cannot mirror op: {op}")
