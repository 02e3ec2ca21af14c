"""Drive a scenario script against a fresh deployment and judge the log.

The runner keeps a shadow model in lockstep with the engine. Whenever a
step lands a change entry, the shadow's subscription table from just
before the step is filed away; the H1 verdict later insists the engine
notified exactly those subscribers. Route entries get the same
treatment with the shadow's leader roster.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass, field
from typing import Optional

from ..clock import VirtualClock
from ..deployment import Deployment
from ..errors import MiddlewareError
from .checks import (
    CHANGE_TYPES,
    check_h1,
    check_h2,
    check_routing,
    log_signature,
)
from .script import load_script, normalize_expectations, resolve

STRESS_THREADS = 4
STRESS_COMMITS_PER_THREAD = 25


@dataclass
class ScenarioReport:
    name: str
    seed: int
    passed: bool = True
    aborted: bool = False
    log_head: int = 0
    steps_executed: int = 0
    stress_ops: int = 0
    failures: list = field(default_factory=list)
    expectations: list = field(default_factory=list)
    deployment: Optional[Deployment] = None  # not serialized

    def fail(self, message: str) -> None:
        self.passed = False
        self.failures.append(message)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "passed": self.passed,
            "aborted": self.aborted,
            "log_head": self.log_head,
            "steps_executed": self.steps_executed,
            "stress_ops": self.stress_ops,
            "failures": list(self.failures),
            "expectations": list(self.expectations),
        }

    def summary_lines(self) -> list[str]:
        status = "PASS" if self.passed else "FAIL"
        lines = [f"{status} {self.name} (seed={self.seed}, steps={self.steps_executed}, "
                 f"log={self.log_head}" + (f", stress={self.stress_ops}" if self.stress_ops else "") + ")"]
        for exp in self.expectations:
            mark = "ok" if exp["passed"] else "FAIL"
            lines.append(f"  [{mark}] {exp['check']}: {exp['detail']}")
        for failure in self.failures:
            lines.append(f"  !! {failure}")
        return lines


def _execute(dep: Deployment, step: dict) -> dict:
    """Run one resolved step; returns the ids the engine assigned."""
    op = step["op"]
    if op == "add_site":
        site = dep.add_site(step["name"], step.get("timezone_offset_minutes", 0),
                            site_id=step.get("site_id"), actor_id=step.get("actor"))
        return {"site_id": site.site_id}
    if op == "register_agent":
        agent = dep.register_agent(step["display_name"], step.get("kind", "HUMAN"),
                                   team_id=step.get("team"),
                                   agent_id=step.get("agent_id"),
                                   actor_id=step.get("actor"))
        return {"agent_id": agent.agent_id}
    if op == "register_team":
        team = dep.register_team(step["site"], step["leader"], step.get("members", []),
                                 team_id=step.get("team_id"), actor_id=step.get("actor"))
        return {"team_id": team.team_id}
    if op == "register_project":
        project = dep.register_project(step.get("sdlc_tag", ""), step["teams"],
                                       phase=step.get("phase", "INITIATING"),
                                       priority_threshold=step.get("priority_threshold"),
                                       project_id=step.get("project_id"),
                                       actor_id=step.get("actor"))
        return {"project_id": project.project_id}
    if op == "register_requirement":
        req = dep.register_requirement(step["artifact"],
                                       requirement_id=step.get("requirement_id"),
                                       actor_id=step.get("actor"))
        return {"requirement_id": req.requirement_id}
    if op == "classify_requirement":
        dep.classify_requirement(step["requirement"], step["attributes"],
                                 actor_id=step.get("actor"))
        return {}
    if op == "set_priority_threshold":
        dep.set_priority_threshold(step["project"], step["threshold"],
                                   actor_id=step.get("actor"))
        return {}
    if op == "appoint_leader":
        dep.appoint_leader(step["team"], step["agent"], actor_id=step.get("actor"))
        return {}
    if op == "advance_phase":
        dep.advance_phase(step["project"], step["phase"], actor_id=step.get("actor"))
        return {}
    if op == "assign_privilege":
        dep.assign_privilege(step["leader"], step["agent"], step["scope"],
                             step["privilege"])
        return {}
    if op == "create_artifact":
        artifact = dep.create_artifact(step["actor"], step["kind"], step["team"],
                                       step["content"].encode("utf-8"),
                                       media_type=step.get("media_type", "text/plain"),
                                       artifact_id=step.get("artifact_id"))
        return {"artifact_id": artifact.artifact_id}
    if op == "commit_version":
        version = dep.commit_version(step["actor"], step["artifact"],
                                     step["content"].encode("utf-8"))
        return {"version": version.version}
    if op == "delete_artifact":
        dep.delete_artifact(step["actor"], step["artifact"])
        return {}
    if op == "recall_artifact":
        dep.recall_artifact(step["actor"], step["artifact"])
        return {}
    if op == "link":
        link = dep.link(step["actor"], step["from"], step["to"], step["type"])
        return {"link_id": link.link_id}
    if op == "unlink":
        dep.unlink(step["actor"], step["link"])
        return {}
    if op == "subscribe":
        sub = dep.subscribe(step["agent"], step["artifact"],
                            include_link_closure=step.get("closure", False))
        return {"subscription_id": sub.subscription_id}
    if op == "unsubscribe":
        dep.unsubscribe(step["subscription"])
        return {}
    if op == "ack_all":
        for event in dep.pending(step["agent"]):
            dep.ack(event.event_id)
        return {}
    if op == "submit_cr":
        cr = dep.submit_cr(step["actor"], step["artifact"],
                           step["content"].encode("utf-8"),
                           step.get("rationale", ""))
        return {"cr_id": cr.cr_id, "priority_class": cr.priority_class}
    if op == "route_cr":
        dep.route_cr(step["cr"])
        return {}
    if op == "cast_vote":
        dep.cast_vote(step["actor"], step["cr"], step["vote"])
        return {}
    if op == "close_review":
        dep.close_review(step["cr"])
        return {}
    if op == "apply_cr":
        dep.apply_cr(step["cr"])
        return {}
    if op == "reactivate_cr":
        cr = dep.reactivate_cr(step["actor"], step["cr"])
        return {"priority_class": cr.priority_class}
    if op == "watch":
        dep.watch(step["artifact"], external_path=step.get("external_path"),
                  tool_agent_id=step.get("tool"), actor_id=step.get("actor"))
        return {}
    if op == "unwatch":
        dep.unwatch(step["artifact"], actor_id=step.get("actor"))
        return {}
    if op == "poll_ams":
        dep.poll_ams()
        return {}
    if op == "scan_external":
        dep.scan_external()
        return {}
    if op == "advance_clock":
        dep.advance_clock(step["seconds"])
        return {}
    raise AssertionError(f"unhandled op: {op}")  # validate_script bars this

BIND_KEYS = ("artifact_id", "cr_id", "link_id", "subscription_id", "requirement_id",
             "team_id", "agent_id", "site_id", "project_id")


def run_scenario(source, stress: bool = False, seed: Optional[int] = None) -> ScenarioReport:
    """Execute a script against a fresh in-memory deployment. Raises
    ScriptParseError for a malformed script and UnresolvedSymbol when a
    step references a symbol nothing bound."""
    from .shadow import ShadowModel

    script = load_script(source)
    report = ScenarioReport(name=script.get("name", "scenario"),
                            seed=seed if seed is not None else script.get("seed", 0))
    rng = random.Random(report.seed)

    config = script.get("config", {})
    dep = Deployment(config=config, clock=VirtualClock())
    shadow = ShadowModel(config)
    symbols: dict[str, str] = {}
    h1_snapshots: dict[int, dict] = {}
    routing_snapshots: dict[int, dict] = {}

    def record_snapshots(pre_head: int, pre_pairs: dict) -> None:
        for entry in dep.log_entries(pre_head):
            etype = entry.event_type.value
            if etype in CHANGE_TYPES:
                h1_snapshots[entry.seq] = pre_pairs
            elif etype == "CR_DECIDE" and entry.payload.get("phase") == "route":
                routing_snapshots[entry.seq] = {
                    "leaders": shadow.leaders_sorted(),
                    "chair": shadow.leader_of(shadow.team_of(entry.subject_id)),
                }
            elif etype == "CR_SUBMIT":
                engine_cls = entry.payload["priority_class"]
                shadow_cls = shadow.artifact_priority(entry.subject_id)
                if engine_cls != shadow_cls:
                    report.fail(
                        f"seq {entry.seq}: engine classed {entry.subject_id} as "
                        f"{engine_cls}, shadow says {shadow_cls}"
                    )

    for index, raw_step in enumerate(script["steps"]):
        resolved = resolve({k: v for k, v in raw_step.items() if k != "bind"}, symbols)
        pre_head = dep.log.head_seq
        pre_pairs = shadow.pairs()
        expect = raw_step.get("expect_error")
        try:
            result = _execute(dep, resolved)
        except MiddlewareError as err:
            if expect is None:
                report.fail(f"step {index} ({raw_step['op']}): unexpected {err.code}: {err}")
                report.aborted = True
                break
            if err.code != expect:
                report.fail(f"step {index} ({raw_step['op']}): expected {expect}, "
                            f"got {err.code}")
                report.aborted = True
                break
            if dep.log.head_seq != pre_head:
                report.fail(f"step {index} ({raw_step['op']}): rejected request "
                            "appended log entries")
            report.steps_executed += 1
            continue
        if expect is not None:
            report.fail(f"step {index} ({raw_step['op']}): expected {expect}, "
                        "but the step succeeded")
            report.aborted = True
            break
        # shadow uses symbol names where the script used them, engine ids
        # elsewhere; the runner's symbol table keeps the two aligned
        bind = raw_step.get("bind")
        if bind is not None:
            for key in BIND_KEYS:
                if key in result:
                    symbols[bind] = result[key]
                    break
            else:
                report.fail(f"step {index}: bind on an op that returns no id")
                report.aborted = True
                break
        shadow.apply_step(resolved, result)
        record_snapshots(pre_head, pre_pairs)
        report.steps_executed += 1

    if stress and not report.aborted:
        report.stress_ops = _stress_phase(dep, shadow, rng, report,
                                          h1_snapshots)

    report.log_head = dep.log.head_seq
    if not report.aborted:
        _evaluate_expectations(script, dep, shadow, symbols, report,
                               h1_snapshots, routing_snapshots)
    report.passed = report.passed and not report.failures
    report.deployment = dep
    return report


def _stress_phase(dep, shadow, rng, report, h1_snapshots) -> int:
    """Hammer the facade from several threads, then extend the H1
    snapshot table: stress only commits (no subscription or link edits),
    so one table is valid for every change it produces."""
    candidates = sorted(
        artifact_id for artifact_id, art in shadow.artifacts.items()
        if art["state"] == "ACTIVE" and shadow.artifact_priority(artifact_id) == "LOW"
    )
    candidates = [a for a in candidates if shadow.leader_of(shadow.team_of(a))]
    if not candidates:
        return 0
    stress_pairs = shadow.pairs()
    pre_head = dep.log.head_seq
    errors: list = []

    def worker(worker_id: int) -> None:
        for k in range(STRESS_COMMITS_PER_THREAD):
            artifact = candidates[(worker_id + k) % len(candidates)]
            actor = shadow.leader_of(shadow.team_of(artifact))
            try:
                dep.commit_version(actor, artifact,
                                   f"stress {worker_id}.{k}".encode("utf-8"))
            except Exception as err:  # collected, not raised across threads
                errors.append(f"stress worker {worker_id}: {err}")

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(STRESS_THREADS)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    for message in errors:
        report.fail(message)
    ops = 0
    for entry in dep.log_entries(pre_head):
        if entry.event_type.value in CHANGE_TYPES:
            h1_snapshots[entry.seq] = stress_pairs
            ops += 1
    expected = STRESS_THREADS * STRESS_COMMITS_PER_THREAD
    if not errors and ops != expected:
        report.fail(f"stress made {ops} commits, expected {expected}")
    return ops


def _evaluate_expectations(script, dep, shadow, symbols, report,
                           h1_snapshots, routing_snapshots) -> None:
    entries = dep.log_entries()

    def add(check: str, passed: bool, detail: str) -> None:
        report.expectations.append({"check": check, "passed": passed, "detail": detail})
        if not passed:
            report.passed = False

    for exp in normalize_expectations(script):
        exp = resolve(exp, symbols)
        check = exp["check"]
        if check == "h1":
            verdict = check_h1(entries, h1_snapshots)
            add(check, verdict.passed,
                f"{verdict.details['changes_checked']} changes checked"
                + ("" if verdict.passed else "; " + "; ".join(verdict.failures[:3])))
        elif check == "h2":
            verdict = check_h2(entries, dep)
            add(check, verdict.passed,
                f"{verdict.details['versions_checked']} versions checked"
                + ("" if verdict.passed else "; " + "; ".join(verdict.failures[:3])))
        elif check == "routing":
            verdict = check_routing(entries, routing_snapshots)
            add(check, verdict.passed,
                f"{verdict.details['high']} high / {verdict.details['low']} low routes"
                + ("" if verdict.passed else "; " + "; ".join(verdict.failures[:3])))
        elif check == "chain":
            try:
                dep.verify_log()
                add(check, True, f"hash chain intact through seq {dep.log.head_seq}")
            except MiddlewareError as err:
                add(check, False, str(err))
        elif check == "log_head":
            add(check, dep.log.head_seq == exp["value"],
                f"head {dep.log.head_seq}, expected {exp['value']}")
        elif check == "cr_state":
            state = dep.change_request(exp["cr"]).state.value
            add(check, state == exp["state"],
                f"{exp['cr']}: {state}, expected {exp['state']}")
        elif check == "artifact_head":
            artifact = dep.get_artifact(exp["artifact"])
            add(check, artifact.head_version == exp["version"],
                f"{exp['artifact']}: v{artifact.head_version}, expected v{exp['version']}")
        elif check == "artifact_state":
            artifact = dep.get_artifact(exp["artifact"])
            add(check, artifact.state.value == exp["state"],
                f"{exp['artifact']}: {artifact.state.value}, expected {exp['state']}")
        elif check == "priority":
            actual = dep.artifact_priority(exp["artifact"])
            add(check, actual == exp["value"],
                f"{exp['artifact']}: {actual}, expected {exp['value']}")
        elif check == "impact":
            actual = [[a, d] for a, d in dep.impact(exp["artifact"])]
            add(check, actual == exp["value"],
                f"{exp['artifact']}: {actual}, expected {exp['value']}")
        elif check == "provenance_length":
            chain = dep.provenance(exp["artifact"])
            add(check, len(chain) == exp["value"],
                f"{exp['artifact']}: {len(chain)} versions, expected {exp['value']}")
        elif check == "pending_count":
            count = len(dep.pending(exp["agent"]))
            add(check, count == exp["value"],
                f"{exp['agent']}: {count} pending, expected {exp['value']}")
        elif check == "notified":
            # the NOTIFY entries for the given artifact version name these agents
            target = None
            for entry in entries:
                if (entry.event_type.value in ("CREATE", "MODIFY")
                        and entry.subject_id == exp["artifact"]
                        and entry.payload.get("version") == exp["version"]):
                    target = entry.seq
            agents = sorted(
                entry.payload["subscriber_id"] for entry in entries
                if entry.event_type.value == "NOTIFY"
                and entry.payload["change_seq"] == target
            )
            add(check, agents == sorted(exp["agents"]),
                f"{exp['artifact']} v{exp['version']}: notified {agents}, "
                f"expected {sorted(exp['agents'])}")
        else:
            add(check, False, "unknown check")


def determinism_signature(source, stress: bool = False) -> list:
    """The comparable signature of one run, for same-seed comparisons."""
    report = run_scenario(source, stress=stress)
    return log_signature(report.deployment.log_entries())
