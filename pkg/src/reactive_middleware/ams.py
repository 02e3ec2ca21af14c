"""Artefacts Monitoring System.

Bridges the repository's committed change entries into PSS fan-out, keeps a
watch table for explicit monitoring and catch-up polling, and scans external
working copies for out-of-band edits, turning them into tool-originated
change requests (tools hold review privilege, so these enter the CM-T
workflow instead of committing directly).
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import PathUnreadable, UnknownAgent, UnknownArtifact
from .repository import CHANGE_EVENT_TYPES, ChangeLog, LogEntry
from .util import sha256_hex


@dataclass
class WatchEntry:
    artifact_id: str
    last_seen_seq: int
    external_path: Optional[str] = None
    external_hash: Optional[str] = None
    tool_agent_id: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "artifact_id": self.artifact_id,
            "last_seen_seq": self.last_seen_seq,
            "external_path": self.external_path,
            "external_hash": self.external_hash,
            "tool_agent_id": self.tool_agent_id,
        }


class ArtifactMonitor:
    def __init__(self, log: ChangeLog,
                 artifact_exists: Callable[[str], bool],
                 fan_out: Callable[[int], list],
                 submit_tool_cr: Callable[[str, str, bytes, str], object],
                 default_tool_agent: Optional[str] = None,
                 agent_is_tool: Optional[Callable[[str], bool]] = None):
        self.log = log
        self._artifact_exists = artifact_exists
        self._fan_out = fan_out
        self._submit_tool_cr = submit_tool_cr
        self._default_tool_agent = default_tool_agent
        self._agent_is_tool = agent_is_tool or (lambda _aid: True)
        self.watches: dict[str, WatchEntry] = {}

    # -- watch table ------------------------------------------------------------

    def watch(self, artifact_id: str, external_path: Optional[str] = None,
              tool_agent_id: Optional[str] = None) -> WatchEntry:
        if not self._artifact_exists(artifact_id):
            raise UnknownArtifact(f"no such artifact: {artifact_id}")
        external_hash = None
        resolved_tool = None
        if external_path is not None:
            resolved_tool = tool_agent_id or self._default_tool_agent
            if resolved_tool is None or not self._agent_is_tool(resolved_tool):
                raise UnknownAgent("external watch needs a registered TOOL agent")
            external_hash = self._digest_path(external_path)
        entry = WatchEntry(
            artifact_id=artifact_id,
            last_seen_seq=self.log.head_seq,
            external_path=external_path,
            external_hash=external_hash,
            tool_agent_id=resolved_tool,
        )
        self.watches[artifact_id] = entry
        return entry

    def unwatch(self, artifact_id: str) -> None:
        if not self._artifact_exists(artifact_id):
            raise UnknownArtifact(f"no such artifact: {artifact_id}")
        self.watches.pop(artifact_id, None)

    def apply_watch(self, record: dict) -> WatchEntry:
        """Install a watch from an exported record (restore path).

        Keeps the recorded external digest so an out-of-band edit that
        happened while the deployment was down still shows up on the next
        scan. last_seen_seq resets to head: replay already rebuilt state,
        so there is nothing to catch up on.
        """
        external_path = record.get("external_path")
        external_hash = record.get("external_hash")
        if external_path is not None and external_hash is None:
            external_hash = self._digest_path(external_path)
        entry = WatchEntry(
            artifact_id=record["artifact_id"],
            last_seen_seq=self.log.head_seq,
            external_path=external_path,
            external_hash=external_hash,
            tool_agent_id=record.get("tool_agent_id"),
        )
        self.watches[entry.artifact_id] = entry
        return entry

    @staticmethod
    def _digest_path(path: str) -> str:
        try:
            with open(path, "rb") as fh:
                return sha256_hex(fh.read())
        except OSError as exc:
            raise PathUnreadable(f"cannot read {path}: {exc.strerror}")

    # -- internal change forwarding ------------------------------------------------

    def observe(self, entry: LogEntry) -> None:
        """Synchronous push hook: forward a fresh change entry to the PSS.

        Advances last_seen_seq of a watched artifact so polling never
        re-forwards what the push path already handled.
        """
        if entry.event_type not in CHANGE_EVENT_TYPES:
            return
        watch = self.watches.get(entry.subject_id)
        if watch is not None and entry.seq > watch.last_seen_seq:
            watch.last_seen_seq = entry.seq
        self._fan_out(entry.seq)

    def poll_internal(self) -> list[dict]:
        """Catch-up pass: forward missed change entries for watched artifacts.

        Each log seq is forwarded at most once per watch entry
        (last_seen_seq is monotone).
        """
        forwarded = []
        head = self.log.head_seq
        pending: list[tuple[int, WatchEntry]] = []
        for watch in self.watches.values():
            for entry in self.log.entries(since=watch.last_seen_seq):
                if entry.event_type in CHANGE_EVENT_TYPES and entry.subject_id == watch.artifact_id:
                    pending.append((entry.seq, watch))
        for seq, watch in sorted(pending, key=lambda p: p[0]):
            entry = self.log.get(seq)
            self._fan_out(seq)
            forwarded.append({
                "seq": seq,
                "artifact_id": entry.subject_id,
                "event_type": entry.event_type.value,
            })
        for watch in self.watches.values():
            watch.last_seen_seq = head
        return forwarded

    # -- external working copies -----------------------------------------------------

    def scan_external(self) -> dict:
        """Digest-compare registered external paths; changed files become
        implicit change requests on behalf of the watching tool agent.

        Snapshot-to-snapshot: several edits between scans collapse into one
        request carrying the final bytes. Unreadable paths are skipped and
        reported, not fatal.
        """
        submitted = []
        unreadable = []
        for artifact_id in sorted(self.watches):
            watch = self.watches[artifact_id]
            if watch.external_path is None:
                continue
            try:
                digest = self._digest_path(watch.external_path)
            except PathUnreadable as exc:
                unreadable.append({"artifact_id": artifact_id, "error": exc.message})
                continue
            if digest == watch.external_hash:
                continue
            with open(watch.external_path, "rb") as fh:
                content = fh.read()
            cr = self._submit_tool_cr(
                watch.tool_agent_id, artifact_id, content,
                f"external change detected at {os.path.basename(watch.external_path)}",
            )
            watch.external_hash = digest
            submitted.append(cr)
        return {"change_requests": submitted, "unreadable": unreadable}
