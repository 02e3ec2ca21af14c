"""Independent verdicts over a finished log.

Everything here re-derives its answers from the raw entries (plus, for
H2, the live store being audited). None of it calls into the engine's
graph or pub/sub code, so a bug there cannot vouch for itself.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

# Which way a link type carries impact. DEPENDS_ON points from the
# dependent to the dependency, so impact travels against the arrow.
IMPACT_FOLLOWS_EDGE = {
    "DERIVES_FROM": True,
    "SATISFIES": True,
    "DEPENDS_ON": False,
    "VERIFIES": True,
    "REFINES": True,
}

CHANGE_TYPES = {"CREATE", "MODIFY", "DELETE", "RECALL"}


@dataclass
class Verdict:
    passed: bool
    failures: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "failures": list(self.failures),
                "details": dict(self.details)}


def _as_dict(entry) -> dict:
    if isinstance(entry, dict):
        return entry
    return entry.to_dict()


def impact_oracle(edges: Iterable[tuple], start: str,
                  depth: Optional[int] = None) -> list[tuple[str, int]]:
    """BFS over (from, to, type) triples; returns [(artifact, distance)]
    sorted by (distance, artifact), start excluded."""
    forward: dict[str, set] = {}
    for src, dst, link_type in edges:
        if IMPACT_FOLLOWS_EDGE[link_type]:
            forward.setdefault(src, set()).add(dst)
        else:
            forward.setdefault(dst, set()).add(src)
    dist = {start: 0}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if depth is not None and dist[node] >= depth:
            continue
        for nxt in forward.get(node, ()):
            if nxt not in dist:
                dist[nxt] = dist[node] + 1
                queue.append(nxt)
    del dist[start]
    return sorted(dist.items(), key=lambda kv: (kv[1], kv[0]))


def check_h1(entries, shadow_snapshots: Optional[dict] = None) -> Verdict:
    """Every change entry must be followed by NOTIFY entries for exactly
    the subscribers on record at that point, author excepted.

    `shadow_snapshots` optionally maps change seq to the independently
    tracked {(agent, artifact): closure_flag} table just before the
    change; when present the folded table is cross-checked against it,
    which catches subscription bookkeeping drifting from the model.
    """
    records = [_as_dict(e) for e in entries]
    notified: dict[int, set] = {}
    notify_seqs = []
    for rec in records:
        if rec["event_type"] == "NOTIFY":
            change_seq = rec["payload"]["change_seq"]
            notified.setdefault(change_seq, set()).add(rec["payload"]["subscriber_id"])
            notify_seqs.append(change_seq)

    failures = []
    subs: dict[str, tuple] = {}  # subscription_id -> (agent, artifact, closure)
    edges: dict[str, tuple] = {}  # link_id -> (from, to, type)
    change_seqs = set()
    checked = 0

    for rec in records:
        etype = rec["event_type"]
        seq = rec["seq"]
        payload = rec["payload"]
        if etype in CHANGE_TYPES:
            change_seqs.add(seq)
            artifact = rec["subject_id"]
            author = rec["actor_id"]
            table = {}
            for agent, art, closure in subs.values():
                table[(agent, art)] = closure
            if shadow_snapshots is not None and seq in shadow_snapshots:
                if shadow_snapshots[seq] != table:
                    failures.append(
                        f"seq {seq}: folded subscription table diverges from shadow"
                    )
            expected = {agent for (agent, art) in table if art == artifact}
            # closure subscribers on B hear about A when B lies in A's impact set
            impacted = {art for art, _ in impact_oracle(edges.values(), artifact)}
            for (agent, art), closure in table.items():
                if closure and art in impacted:
                    expected.add(agent)
            expected.discard(author)
            actual = notified.get(seq, set())
            if expected != actual:
                missing = sorted(expected - actual)
                extra = sorted(actual - expected)
                failures.append(
                    f"seq {seq} ({etype} {artifact}): expected {sorted(expected)}, "
                    f"got {sorted(actual)}"
                    + (f"; missing {missing}" if missing else "")
                    + (f"; unexpected {extra}" if extra else "")
                )
            checked += 1
        elif etype == "SUBSCRIBE":
            subs[payload["subscription_id"]] = (
                rec["actor_id"], rec["subject_id"],
                bool(payload.get("include_link_closure", False)),
            )
        elif etype == "UNSUBSCRIBE":
            subs.pop(payload["subscription_id"], None)
        elif etype == "LINK":
            edges[payload["link_id"]] = (
                payload["from_artifact"], payload["to_artifact"], payload["link_type"],
            )
        elif etype == "UNLINK":
            edges.pop(payload["link_id"], None)

    for change_seq in notify_seqs:
        if change_seq not in change_seqs:
            failures.append(f"NOTIFY references seq {change_seq}, which is not a change entry")

    return Verdict(passed=not failures, failures=failures,
                   details={"changes_checked": checked})


def check_h2(entries, dep) -> Verdict:
    """Recorded history must fully account for the live repository:
    dense version numbers, a one-to-one match between versions and
    change entries, and every content hash resolvable and correct."""
    records = [_as_dict(e) for e in entries]
    failures = []

    # entry-side index of version-bearing events
    entry_versions = {}  # (artifact, version) -> (seq, content_hash)
    for rec in records:
        if rec["event_type"] in ("CREATE", "MODIFY"):
            key = (rec["subject_id"], rec["payload"]["version"])
            if key in entry_versions:
                failures.append(
                    f"duplicate log entries for {key[0]} v{key[1]} "
                    f"(seqs {entry_versions[key][0]} and {rec['seq']})"
                )
            entry_versions[key] = (rec["seq"], rec["payload"]["content_hash"])

    live_versions = set()
    for artifact_id in sorted(dep.repo.artifacts):
        artifact = dep.repo.artifacts[artifact_id]
        numbers = [v.version for v in artifact.versions]
        if numbers != list(range(1, len(numbers) + 1)):
            failures.append(f"{artifact_id}: version numbers not dense: {numbers}")
        for v in artifact.versions:
            key = (artifact_id, v.version)
            live_versions.add(key)
            recorded = entry_versions.get(key)
            if recorded is None:
                failures.append(f"{artifact_id} v{v.version}: no log entry records it")
                continue
            seq, content_hash = recorded
            if seq != v.log_seq:
                failures.append(
                    f"{artifact_id} v{v.version}: log_seq {v.log_seq} but entry at {seq}"
                )
            if content_hash != v.content_hash:
                failures.append(f"{artifact_id} v{v.version}: content hash mismatch vs log")
            try:
                blob = dep.store.get(v.content_hash)
            except Exception:
                failures.append(f"{artifact_id} v{v.version}: content {v.content_hash[:12]} "
                                "missing from store")
                continue
            if hashlib.sha256(blob).hexdigest() != v.content_hash:
                failures.append(f"{artifact_id} v{v.version}: stored bytes do not match hash")

    for key in sorted(entry_versions.keys() - live_versions):
        failures.append(f"log records {key[0]} v{key[1]} but repository has no such version")

    # state must equal what a fold over the change entries yields
    states = {}
    for rec in records:
        etype = rec["event_type"]
        if etype == "CREATE":
            states[rec["subject_id"]] = "ACTIVE"
        elif etype == "DELETE":
            states[rec["subject_id"]] = "DELETED"
        elif etype == "RECALL":
            states[rec["subject_id"]] = "ACTIVE"
    for artifact_id, expected_state in sorted(states.items()):
        artifact = dep.repo.artifacts.get(artifact_id)
        if artifact is None:
            failures.append(f"{artifact_id}: created in log but absent from repository")
        elif artifact.state.value != expected_state:
            failures.append(
                f"{artifact_id}: state {artifact.state.value}, log says {expected_state}"
            )
    for artifact_id in sorted(set(dep.repo.artifacts) - set(states)):
        failures.append(f"{artifact_id}: present in repository but never created in log")

    return Verdict(passed=not failures, failures=failures,
                   details={"versions_checked": len(live_versions)})


def check_routing(entries, routing_snapshots: Optional[dict] = None) -> Verdict:
    """HIGH change requests must route to a global review in front of
    all team leaders; LOW ones to the owning team's leader alone."""
    records = [_as_dict(e) for e in entries]
    failures = []
    priority: dict[str, str] = {}
    high = low = 0
    for rec in records:
        etype = rec["event_type"]
        payload = rec["payload"]
        if etype == "CR_SUBMIT":
            priority[payload["cr_id"]] = payload["priority_class"]
        elif etype == "CR_DECIDE" and payload.get("phase") == "route":
            cr_id = payload["cr_id"]
            seq = rec["seq"]
            cls = priority.get(cr_id)
            if cls is None:
                failures.append(f"seq {seq}: route for {cr_id} with no prior submission")
                continue
            state = payload["state"]
            voters = list(payload["voter_ids"])
            chair = payload["chair_id"]
            snapshot = (routing_snapshots or {}).get(seq)
            if cls == "HIGH":
                high += 1
                if state != "GLOBAL_REVIEW":
                    failures.append(f"seq {seq}: HIGH {cr_id} routed to {state}")
                if snapshot is not None:
                    if voters != snapshot["leaders"]:
                        failures.append(
                            f"seq {seq}: {cr_id} voters {voters} != leaders {snapshot['leaders']}"
                        )
                    if chair != snapshot["chair"]:
                        failures.append(
                            f"seq {seq}: {cr_id} chair {chair} != owning leader {snapshot['chair']}"
                        )
            else:
                low += 1
                if state != "LOCAL_REVIEW":
                    failures.append(f"seq {seq}: LOW {cr_id} routed to {state}")
                if voters != [chair]:
                    failures.append(f"seq {seq}: LOW {cr_id} voters {voters}, expected [{chair}]")
                if snapshot is not None and chair != snapshot["chair"]:
                    failures.append(
                        f"seq {seq}: {cr_id} chair {chair} != owning leader {snapshot['chair']}"
                    )
    return Verdict(passed=not failures, failures=failures,
                   details={"routes": high + low, "high": high, "low": low})


def log_signature(entries) -> list[tuple]:
    """Timestamps and hashes stripped; what determinism is judged on."""
    out = []
    for rec in (_as_dict(e) for e in entries):
        payload = {k: v for k, v in rec["payload"].items() if k != "review_deadline"}
        out.append((
            rec["seq"], rec["event_type"], rec["actor_id"], rec["subject_id"],
            json.dumps(payload, sort_keys=True),
        ))
    return out
