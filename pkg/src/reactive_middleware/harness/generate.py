"""Seeded scenario generation.

Same seed, same script: everything is drawn from one `random.Random`.
The generator keeps its own ShadowModel in step with the script it is
writing so that every emitted step is legal by construction (or is an
intentional `expect_error` probe), and so CR ballots can be scheduled
with their outcome known ahead of time.
"""

from __future__ import annotations

import random

from .shadow import ShadowModel

ATTRS = ["SAFETY", "RELIABILITY", "SECURITY", "ROBUSTNESS", "AVAILABILITY",
         "MAINTAINABILITY"]
LINK_TYPES = ["DERIVES_FROM", "SATISFIES", "DEPENDS_ON", "VERIFIES", "REFINES"]
KINDS = ["REQUIREMENT", "DESIGN", "CODE", "TEST", "DOCUMENT"]
VOTES = ["APPROVE", "APPROVE", "NOTE", "DISAPPROVE"]

# capability sets per privilege, for picking authorized actors
CAPS = {
    "NONE": set(),
    "VIEW": {"VIEW"},
    "MODIFY": {"VIEW", "MODIFY"},
    "REVIEW": {"VIEW", "REVIEW_PENDING"},
    "CREATE": {"VIEW", "MODIFY", "CREATE"},
    "OWN": {"VIEW", "MODIFY", "REVIEW_PENDING", "CREATE", "DELETE", "RECALL"},
}

DEADLINE_SECONDS = 72 * 3600


def _can(shadow: ShadowModel, agent: str, artifact: str, cap: str) -> bool:
    team = shadow.team_of(artifact)
    grant = shadow.grants.get((agent, f"team:{team}"))
    if grant is not None:
        return cap in CAPS[grant]
    if shadow.leader_of(team) == agent:
        return cap in CAPS["OWN"]
    if agent in set(shadow.leaders_sorted()):
        return cap in CAPS["REVIEW"]
    return False


class _Generator:
    def __init__(self, seed: int, max_steps: int):
        self.rng = random.Random(seed)
        self.seed = seed
        self.max_steps = max_steps
        self.steps: list[dict] = []
        self.counters: dict[str, int] = {}
        self.artifact_syms: list[str] = []
        self.link_syms: list[str] = []
        self.sub_syms: list[str] = []
        self.req_syms: list[str] = []
        self.artifacts_with_req: set[str] = set()
        self.fresh_agents = 0
        self.config = self._make_config()
        self.shadow = ShadowModel(self.config)

    def _sym(self, prefix: str) -> str:
        self.counters[prefix] = self.counters.get(prefix, 0) + 1
        return f"${prefix}{self.counters[prefix]}"

    def _make_config(self) -> dict:
        rng = self.rng
        n_teams = rng.choice([2, 3, 3, 4])
        sites = [
            {"site_id": "site-01", "name": "north", "timezone_offset_minutes": 0},
            {"site_id": "site-02", "name": "south", "timezone_offset_minutes": 300},
        ]
        agents, teams = [], []
        for i in range(1, n_teams + 1):
            leader = f"lead-{i:02d}"
            members = [f"dev-{i:02d}a", f"dev-{i:02d}b"]
            agents.append({"agent_id": leader, "kind": "HUMAN"})
            agents.extend({"agent_id": m, "kind": "HUMAN"} for m in members)
            teams.append({
                "team_id": f"team-{i:02d}",
                "site_id": sites[i % 2]["site_id"],
                "leader_id": leader,
                "member_ids": members,
            })
        split = rng.randrange(1, n_teams + 1)
        projects = [{
            "project_id": "proj-01",
            "sdlc_tag": "mainline",
            "team_ids": [t["team_id"] for t in teams[:split]],
        }]
        if split < n_teams:
            projects.append({
                "project_id": "proj-02",
                "sdlc_tag": "support",
                "team_ids": [t["team_id"] for t in teams[split:]],
            })
        if rng.random() < 0.35:
            rng.choice(projects)["priority_threshold"] = rng.choice([0.5, 0.75, 0.95])
        return {"sites": sites, "agents": agents, "teams": teams, "projects": projects}

    def emit(self, step: dict) -> None:
        self.steps.append(step)
        if "expect_error" not in step:
            self.shadow.apply_step(step)

    # -- choosers ------------------------------------------------------------

    def _teams(self) -> list[str]:
        return sorted(self.shadow.teams)

    def _active(self) -> list[str]:
        return [a for a in self.artifact_syms
                if self.shadow.artifacts[a]["state"] == "ACTIVE"]

    def _deleted(self) -> list[str]:
        return [a for a in self.artifact_syms
                if self.shadow.artifacts[a]["state"] == "DELETED"]

    def _actors_with(self, artifact: str, cap: str) -> list[str]:
        return sorted(a for a in self.shadow.agents if _can(self.shadow, a, artifact, cap))

    def _creators(self, team: str) -> list[str]:
        out = []
        for agent in sorted(self.shadow.agents):
            grant = self.shadow.grants.get((agent, f"team:{team}"))
            if grant is not None:
                if "CREATE" in CAPS[grant]:
                    out.append(agent)
            elif self.shadow.leader_of(team) == agent:
                out.append(agent)
        return out

    # -- step makers; each returns True if it emitted anything ----------------

    def op_create(self) -> bool:
        team = self.rng.choice(self._teams())
        creators = self._creators(team)
        if not creators:
            return False
        sym = self._sym("a")
        self.emit({
            "op": "create_artifact",
            "actor": self.rng.choice(creators),
            "kind": self.rng.choice(KINDS),
            "team": team,
            "content": f"content {self.seed}.{len(self.steps)}",
            "bind": sym,
        })
        self.artifact_syms.append(sym)
        return True

    def op_commit_low(self) -> bool:
        pool = [a for a in self._active()
                if self.shadow.artifact_priority(a) == "LOW"]
        if not pool:
            return False
        artifact = self.rng.choice(pool)
        actors = self._actors_with(artifact, "MODIFY")
        if not actors:
            return False
        self.emit({
            "op": "commit_version",
            "actor": self.rng.choice(actors),
            "artifact": artifact,
            "content": f"rev {self.seed}.{len(self.steps)}",
        })
        return True

    def op_link(self) -> bool:
        active = self._active()
        if len(active) < 2:
            return False
        for _ in range(6):
            src, dst = self.rng.sample(active, 2)
            link_type = self.rng.choice(LINK_TYPES)
            if (src, dst, link_type) in set(self.shadow.edges.values()):
                continue
            actors = self._actors_with(src, "MODIFY")
            if not actors:
                continue
            sym = self._sym("l")
            self.emit({
                "op": "link", "actor": self.rng.choice(actors),
                "from": src, "to": dst, "type": link_type, "bind": sym,
            })
            self.link_syms.append(sym)
            return True
        return False

    def op_unlink(self) -> bool:
        if not self.link_syms:
            return False
        sym = self.rng.choice(self.link_syms)
        src = self.shadow.edges[sym][0]
        actors = self._actors_with(src, "MODIFY")
        if not actors:
            return False
        self.link_syms.remove(sym)
        self.emit({"op": "unlink", "actor": self.rng.choice(actors), "link": sym})
        return True

    def op_requirement(self) -> bool:
        pool = [a for a in self._active() if a not in self.artifacts_with_req]
        if not pool:
            return False
        artifact = self.rng.choice(pool)
        sym = self._sym("r")
        leader = self.shadow.leader_of(self.shadow.team_of(artifact))
        self.emit({"op": "register_requirement", "artifact": artifact,
                   "actor": leader, "bind": sym})
        self.req_syms.append(sym)
        self.artifacts_with_req.add(artifact)
        return True

    def op_classify(self) -> bool:
        if not self.req_syms:
            return False
        sym = self.rng.choice(self.req_syms)
        attrs = self.rng.sample(ATTRS, self.rng.randrange(1, 4))
        if self.rng.random() < 0.5 and "SAFETY" not in attrs:
            attrs.append("SAFETY")
        artifact = self.shadow.requirements[sym]["artifact"]
        leader = self.shadow.leader_of(self.shadow.team_of(artifact))
        self.emit({"op": "classify_requirement", "requirement": sym,
                   "attributes": sorted(attrs), "actor": leader})
        return True

    def op_threshold(self) -> bool:
        project = self.rng.choice(sorted(self.shadow.projects))
        self.emit({
            "op": "set_priority_threshold", "project": project,
            "threshold": self.rng.choice([0.2, 0.65, 0.7, 0.95]),
            "actor": self.shadow.leaders_sorted()[0],
        })
        return True

    def op_subscribe(self) -> bool:
        active = self._active()
        if not active:
            return False
        for _ in range(6):
            artifact = self.rng.choice(active)
            viewers = self._actors_with(artifact, "VIEW")
            if not viewers:
                continue
            agent = self.rng.choice(viewers)
            if (agent, artifact) in self.shadow.subs:
                continue
            sym = self._sym("s")
            self.emit({
                "op": "subscribe", "agent": agent, "artifact": artifact,
                "closure": self.rng.random() < 0.3, "bind": sym,
            })
            self.sub_syms.append(sym)
            return True
        return False

    def op_unsubscribe(self) -> bool:
        if not self.sub_syms:
            return False
        sym = self.rng.choice(self.sub_syms)
        self.sub_syms.remove(sym)
        self.emit({"op": "unsubscribe", "subscription": sym})
        return True

    def op_delete(self) -> bool:
        active = self._active()
        if len(active) < 3:  # keep some room to work in
            return False
        artifact = self.rng.choice(active)
        leader = self.shadow.leader_of(self.shadow.team_of(artifact))
        self.emit({"op": "delete_artifact", "actor": leader, "artifact": artifact})
        return True

    def op_recall(self) -> bool:
        deleted = self._deleted()
        if not deleted:
            return False
        artifact = self.rng.choice(deleted)
        leader = self.shadow.leader_of(self.shadow.team_of(artifact))
        self.emit({"op": "recall_artifact", "actor": leader, "artifact": artifact})
        return True

    def op_ack_all(self) -> bool:
        self.emit({"op": "ack_all", "agent": self.rng.choice(sorted(self.shadow.agents))})
        return True

    def op_clock(self) -> bool:
        self.emit({"op": "advance_clock",
                   "seconds": self.rng.choice([1800, 3600, 86400])})
        return True

    def op_appoint(self) -> bool:
        # promote a fresh agent: members hold team grants, and a grant
        # would override the new leader's implicit OWN
        team = self.rng.choice(self._teams())
        self.fresh_agents += 1
        agent_id = f"lead-new-{self.fresh_agents:02d}"
        self.emit({"op": "register_agent", "display_name": agent_id,
                   "agent_id": agent_id, "team": team})
        self.emit({"op": "appoint_leader", "team": team, "agent": agent_id})
        return True

    def op_probe(self) -> bool:
        """One intentional rejection; the engine must refuse and append
        nothing."""
        rng = self.rng
        choices = rng.sample(range(4), 4)
        for which in choices:
            if which == 0:
                pool = [a for a in self._active()
                        if self.shadow.artifact_priority(a) == "HIGH"]
                if not pool:
                    continue
                artifact = rng.choice(pool)
                actors = self._actors_with(artifact, "MODIFY")
                if not actors:
                    continue
                self.emit({
                    "op": "commit_version", "actor": rng.choice(actors),
                    "artifact": artifact, "content": "straight to main",
                    "expect_error": "APPROVAL_REQUIRED",
                })
                return True
            if which == 1:
                active = self._active()
                if not active:
                    continue
                artifact = rng.choice(active)
                outsiders = [
                    a for a in sorted(self.shadow.agents)
                    if not _can(self.shadow, a, artifact, "VIEW")
                ]
                if not outsiders:
                    continue
                self.emit({
                    "op": "commit_version", "actor": rng.choice(outsiders),
                    "artifact": artifact, "content": "not mine",
                    "expect_error": "PRIVILEGE_DENIED",
                })
                return True
            if which == 2:
                pairs = [
                    (agent, art) for (agent, art) in sorted(self.shadow.subs)
                    if _can(self.shadow, agent, art, "VIEW")
                ]
                if not pairs:
                    continue
                agent, artifact = rng.choice(pairs)
                self.emit({
                    "op": "subscribe", "agent": agent, "artifact": artifact,
                    "expect_error": "DUPLICATE_SUBSCRIPTION",
                })
                return True
            if which == 3:
                deleted = self._deleted()
                if not deleted:
                    continue
                artifact = rng.choice(deleted)
                leader = self.shadow.leader_of(self.shadow.team_of(artifact))
                self.emit({
                    "op": "commit_version", "actor": leader,
                    "artifact": artifact, "content": "zombie write",
                    "expect_error": "ARTIFACT_DELETED",
                })
                return True
        return False

    def op_cr_block(self) -> bool:
        rng = self.rng
        active = self._active()
        if not active:
            return False
        high = [a for a in active if self.shadow.artifact_priority(a) == "HIGH"]
        pool = high if (high and rng.random() < 0.6) else active
        artifact = rng.choice(pool)
        proposers = [
            a for a in sorted(self.shadow.agents)
            if _can(self.shadow, a, artifact, "MODIFY")
            or _can(self.shadow, a, artifact, "REVIEW_PENDING")
        ]
        if not proposers:
            return False
        sym = self._sym("c")
        self.emit({
            "op": "submit_cr", "actor": rng.choice(proposers), "artifact": artifact,
            "content": f"proposed {self.seed}.{len(self.steps)}",
            "rationale": f"change {sym[1:]}", "bind": sym,
        })
        self.emit({"op": "route_cr", "cr": sym})
        self._run_ballot(sym)
        outcome = self.shadow.crs[sym]["state"]
        if outcome == "APPROVED":
            self.emit({"op": "apply_cr", "cr": sym})
        elif outcome == "NOTED" and rng.random() < 0.5:
            self.emit({"op": "reactivate_cr",
                       "actor": rng.choice(self.shadow.leaders_sorted()), "cr": sym})
            self._run_ballot(sym)
            if self.shadow.crs[sym]["state"] == "APPROVED":
                self.emit({"op": "apply_cr", "cr": sym})
        return True

    def _run_ballot(self, sym: str) -> None:
        rng = self.rng
        cr = self.shadow.crs[sym]
        if cr["state"] == "LOCAL_REVIEW":
            if rng.random() < 0.15:
                # a leader from another team clears the capability check
                # (any-leader review rights) but is not on a local ballot
                outsider = [a for a in self.shadow.leaders_sorted()
                            if a != cr["chair"]]
                if outsider:
                    self.emit({
                        "op": "cast_vote", "actor": rng.choice(outsider), "cr": sym,
                        "vote": "APPROVE", "expect_error": "NOT_A_VOTER",
                    })
            self.emit({"op": "cast_vote", "actor": cr["chair"], "cr": sym,
                       "vote": rng.choice(VOTES)})
            return
        voters = list(cr["voters"])
        if rng.random() < 0.35 and len(voters) > 1:
            participating = rng.sample(voters, rng.randrange(0, len(voters)))
            for voter in participating:
                self.emit({"op": "cast_vote", "actor": voter, "cr": sym,
                           "vote": rng.choice(VOTES)})
            self.emit({"op": "advance_clock", "seconds": DEADLINE_SECONDS + 300})
            self.emit({"op": "close_review", "cr": sym})
        else:
            for voter in voters:
                self.emit({"op": "cast_vote", "actor": voter, "cr": sym,
                           "vote": rng.choice(VOTES)})
            self.emit({"op": "close_review", "cr": sym})

    # -- assembly --------------------------------------------------------------

    def build(self) -> dict:
        rng = self.rng
        for team in self._teams():
            leader = self.shadow.leader_of(team)
            for member in sorted(self.shadow.teams[team]["members"]):
                if member == leader:
                    continue
                self.emit({"op": "assign_privilege", "leader": leader,
                           "agent": member, "scope": f"team:{team}",
                           "privilege": "CREATE"})
        for _ in range(rng.randrange(3, 6)):
            self.op_create()
        self.op_link()
        if rng.random() < 0.9:
            self.op_requirement()
            self.op_classify()

        weighted = (
            [self.op_create] * 3 + [self.op_commit_low] * 5 + [self.op_link] * 3
            + [self.op_unlink] * 1 + [self.op_subscribe] * 3
            + [self.op_unsubscribe] * 1 + [self.op_requirement] * 2
            + [self.op_classify] * 2 + [self.op_threshold] * 1
            + [self.op_ack_all] * 2 + [self.op_clock] * 2 + [self.op_delete] * 1
            + [self.op_recall] * 1 + [self.op_probe] * 2 + [self.op_appoint] * 1
        )
        stall = 0
        while len(self.steps) < self.max_steps and stall < 50:
            budget = self.max_steps - len(self.steps)
            if budget >= 16 and rng.random() < 0.22:
                maker = self.op_cr_block
            else:
                maker = rng.choice(weighted)
            if maker == self.op_appoint and budget < 2:
                maker = self.op_clock
            stall = 0 if maker() else stall + 1

        return {
            "name": f"gen-{self.seed:04d}",
            "seed": self.seed,
            "config": self.config,
            "steps": self.steps,
            "expectations": ["h1", "h2", "routing", "chain"],
        }


def generate_script(seed: int, max_steps: int = 90) -> dict:
    if max_steps < 20:
        raise ValueError("max_steps too small to build a meaningful scenario")
    return _Generator(seed, max_steps).build()
