"""Shared artifacts repository: immutable version history, content-addressed
storage, and the append-only hash-chained change log.

The log is the system of record: replaying it reproduces artifact state
(event sourcing), and every entry is covered by both a payload digest and a
stored entry hash chained to its predecessor, so any mutation of a persisted
record is detectable, including the final entry.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Optional

from .errors import (
    AlreadyDeleted,
    ArtifactDeleted,
    ChainBroken,
    NotDeleted,
    OutOfOrder,
    StaleParent,
    UnknownArtifact,
    UnknownLogSeq,
    UnknownVersion,
)
from .util import GENESIS_DIGEST, digest_of, sha256_hex


class EventType(str, Enum):
    CREATE = "CREATE"
    MODIFY = "MODIFY"
    DELETE = "DELETE"
    RECALL = "RECALL"
    LINK = "LINK"
    UNLINK = "UNLINK"
    CR_SUBMIT = "CR_SUBMIT"
    CR_DECIDE = "CR_DECIDE"
    NOTIFY = "NOTIFY"
    ROLE_CHANGE = "ROLE_CHANGE"
    PHASE_CHANGE = "PHASE_CHANGE"
    SUBSCRIBE = "SUBSCRIBE"
    UNSUBSCRIBE = "UNSUBSCRIBE"
    ACK = "ACK"
    REGISTRY = "REGISTRY"


CHANGE_EVENT_TYPES = {EventType.CREATE, EventType.MODIFY, EventType.DELETE, EventType.RECALL}


class ArtifactKind(str, Enum):
    REQUIREMENT = "REQUIREMENT"
    DESIGN = "DESIGN"
    CODE = "CODE"
    TEST = "TEST"
    DOCUMENT = "DOCUMENT"


class ArtifactState(str, Enum):
    ACTIVE = "ACTIVE"
    DELETED = "DELETED"


@dataclass
class LogEntry:
    seq: int
    event_type: EventType
    actor_id: str
    subject_id: str
    payload: dict
    payload_hash: str
    prev_hash: str
    timestamp: int
    entry_hash: str

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "event_type": self.event_type.value,
            "actor_id": self.actor_id,
            "subject_id": self.subject_id,
            "payload": self.payload,
            "payload_hash": self.payload_hash,
            "prev_hash": self.prev_hash,
            "timestamp": self.timestamp,
            "entry_hash": self.entry_hash,
        }

    @classmethod
    def from_dict(cls, record: dict) -> "LogEntry":
        return cls(
            seq=record["seq"],
            event_type=EventType(record["event_type"]),
            actor_id=record["actor_id"],
            subject_id=record["subject_id"],
            payload=record["payload"],
            payload_hash=record["payload_hash"],
            prev_hash=record["prev_hash"],
            timestamp=record["timestamp"],
            entry_hash=record["entry_hash"],
        )


def _canonical_line(entry: "LogEntry") -> str:
    # No whitespace: every byte of a serialized entry must be load-bearing,
    # otherwise a whitespace flip would slip past chain verification.
    return json.dumps(entry.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"


def _entry_digest(seq: int, event_type: str, actor_id: str, subject_id: str,
                  payload_hash: str, prev_hash: str, timestamp: int) -> str:
    return digest_of({
        "seq": seq,
        "event_type": event_type,
        "actor_id": actor_id,
        "subject_id": subject_id,
        "payload_hash": payload_hash,
        "prev_hash": prev_hash,
        "timestamp": timestamp,
    })


class ChangeLog:
    """Append-only, hash-chained event log."""

    def __init__(self, sink_path: Optional[str] = None):
        self._entries: list[LogEntry] = []
        self._head_hash = GENESIS_DIGEST
        self._sink_path = sink_path
        self._listeners: list[Callable[[LogEntry], None]] = []

    def add_listener(self, fn: Callable[[LogEntry], None]) -> None:
        self._listeners.append(fn)

    def attach_sink(self, path: str) -> None:
        """Route future appends to an NDJSON file (restore attaches late)."""
        self._sink_path = path

    @property
    def head_seq(self) -> int:
        return len(self._entries)

    @property
    def head_hash(self) -> str:
        return self._head_hash

    def append(self, event_type: EventType, actor_id: str, subject_id: str,
               payload: dict, timestamp: int) -> LogEntry:
        seq = len(self._entries) + 1
        payload_hash = digest_of(payload)
        entry_hash = _entry_digest(seq, event_type.value, actor_id, subject_id,
                                   payload_hash, self._head_hash, timestamp)
        entry = LogEntry(
            seq=seq,
            event_type=event_type,
            actor_id=actor_id,
            subject_id=subject_id,
            payload=payload,
            payload_hash=payload_hash,
            prev_hash=self._head_hash,
            timestamp=timestamp,
            entry_hash=entry_hash,
        )
        self._entries.append(entry)
        self._head_hash = entry_hash
        if self._sink_path:
            with open(self._sink_path, "a", encoding="utf-8") as fh:
                fh.write(_canonical_line(entry))
        for fn in self._listeners:
            fn(entry)
        return entry

    def import_entry(self, entry: LogEntry) -> LogEntry:
        """Append a pre-built entry (restore path); verifies chain position."""
        expected_seq = len(self._entries) + 1
        if entry.seq != expected_seq:
            raise OutOfOrder(f"expected seq {expected_seq}, got {entry.seq}")
        verify_entry(entry, self._head_hash)
        self._entries.append(entry)
        self._head_hash = entry.entry_hash
        return entry

    def get(self, seq: int) -> LogEntry:
        if not 1 <= seq <= len(self._entries):
            raise UnknownLogSeq(f"no log entry with seq {seq}")
        return self._entries[seq - 1]

    def entries(self, since: int = 0) -> list[LogEntry]:
        return self._entries[since:]

    def verify(self) -> bool:
        verify_chain(self._entries)
        return True

    def export_ndjson(self) -> str:
        return "".join(_canonical_line(e) for e in self._entries)


def verify_entry(entry: LogEntry, expected_prev: str) -> None:
    if entry.prev_hash != expected_prev:
        raise ChainBroken(f"prev_hash mismatch at seq {entry.seq}", seq=entry.seq)
    if digest_of(entry.payload) != entry.payload_hash:
        raise ChainBroken(f"payload digest mismatch at seq {entry.seq}", seq=entry.seq)
    recomputed = _entry_digest(entry.seq, entry.event_type.value, entry.actor_id,
                               entry.subject_id, entry.payload_hash, entry.prev_hash,
                               entry.timestamp)
    if recomputed != entry.entry_hash:
        raise ChainBroken(f"entry hash mismatch at seq {entry.seq}", seq=entry.seq)


def verify_chain(entries: Iterable[LogEntry], expected_head: Optional[str] = None) -> str:
    """Verify density, digests and chaining; returns the head hash.

    Raises ChainBroken naming the first inconsistent seq.
    """
    prev = GENESIS_DIGEST
    expected_seq = 1
    for entry in entries:
        if entry.seq != expected_seq:
            raise ChainBroken(f"sequence gap at {entry.seq}", seq=entry.seq)
        verify_entry(entry, prev)
        prev = entry.entry_hash
        expected_seq += 1
    if expected_head is not None and prev != expected_head:
        raise ChainBroken("head hash mismatch", seq=expected_seq - 1)
    return prev


def parse_ndjson_log(text: str) -> list[LogEntry]:
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            entries.append(LogEntry.from_dict(record))
        except (ValueError, KeyError) as exc:
            raise ChainBroken(f"unparseable log record on line {lineno}: {exc}", seq=lineno)
    return entries


class ContentStore:
    """Content-addressed blob store, optionally mirrored to objects/<2hex>/<digest>."""

    def __init__(self, root: Optional[str] = None):
        self._blobs: dict[str, bytes] = {}
        self._root = root

    def attach_root(self, root: str) -> None:
        """Point at an existing objects directory; blobs load lazily."""
        self._root = root

    def put(self, content: bytes) -> str:
        digest = sha256_hex(content)
        if digest not in self._blobs:
            self._blobs[digest] = content
            if self._root:
                path = os.path.join(self._root, digest[:2])
                os.makedirs(path, exist_ok=True)
                target = os.path.join(path, digest)
                if not os.path.exists(target):
                    with open(target, "wb") as fh:
                        fh.write(content)
        return digest

    def get(self, digest: str) -> bytes:
        if digest in self._blobs:
            return self._blobs[digest]
        if self._root:
            target = os.path.join(self._root, digest[:2], digest)
            if os.path.exists(target):
                with open(target, "rb") as fh:
                    content = fh.read()
                self._blobs[digest] = content
                return content
        raise UnknownVersion(f"no object with digest {digest}")

    def __contains__(self, digest: str) -> bool:
        try:
            self.get(digest)
            return True
        except UnknownVersion:
            return False

    def digests(self) -> list[str]:
        known = set(self._blobs)
        if self._root and os.path.isdir(self._root):
            for shard in os.listdir(self._root):
                shard_dir = os.path.join(self._root, shard)
                if os.path.isdir(shard_dir):
                    known.update(os.listdir(shard_dir))
        return sorted(known)


@dataclass
class ArtifactVersion:
    artifact_id: str
    version: int
    content_hash: str
    author_id: str
    change_request_id: Optional[str]
    created_at: int
    log_seq: int

    @property
    def parent_version(self) -> int:
        return self.version - 1

    def to_dict(self) -> dict:
        return {
            "artifact_id": self.artifact_id,
            "version": self.version,
            "content_hash": self.content_hash,
            "author_id": self.author_id,
            "change_request_id": self.change_request_id,
            "created_at": self.created_at,
            "log_seq": self.log_seq,
        }


@dataclass
class Artifact:
    artifact_id: str
    kind: ArtifactKind
    owner_team_id: str
    state: ArtifactState = ArtifactState.ACTIVE
    media_type: str = "application/octet-stream"
    versions: list[ArtifactVersion] = field(default_factory=list)

    @property
    def head_version(self) -> int:
        return len(self.versions)

    @property
    def head(self) -> ArtifactVersion:
        return self.versions[-1]

    def to_dict(self) -> dict:
        return {
            "artifact_id": self.artifact_id,
            "kind": self.kind.value,
            "owner_team_id": self.owner_team_id,
            "state": self.state.value,
            "media_type": self.media_type,
            "head_version": self.head_version,
        }


class ArtifactRepository:
    """Artifact mechanics: storage, dense version history, delete/recall.

    Privilege and review-workflow checks happen in the engine facade;
    this class owns state transitions and their log entries.
    """

    def __init__(self, log: ChangeLog, store: ContentStore):
        self.log = log
        self.store = store
        self.artifacts: dict[str, Artifact] = {}

    def get(self, artifact_id: str) -> Artifact:
        artifact = self.artifacts.get(artifact_id)
        if artifact is None:
            raise UnknownArtifact(f"no such artifact: {artifact_id}")
        return artifact

    def team_of(self, artifact_id: str) -> Optional[str]:
        artifact = self.artifacts.get(artifact_id)
        return artifact.owner_team_id if artifact else None

    def create(self, artifact_id: str, actor_id: str, kind: ArtifactKind | str,
               owner_team_id: str, content: bytes, now: int,
               media_type: str = "text/plain") -> Artifact:
        content_hash = self.store.put(content)
        artifact = Artifact(artifact_id, ArtifactKind(kind), owner_team_id, media_type=media_type)
        entry = self.log.append(
            EventType.CREATE, actor_id, artifact_id,
            {
                "kind": artifact.kind.value,
                "owner_team_id": owner_team_id,
                "content_hash": content_hash,
                "media_type": media_type,
                "version": 1,
            },
            now,
        )
        artifact.versions.append(ArtifactVersion(
            artifact_id=artifact_id, version=1, content_hash=content_hash,
            author_id=actor_id, change_request_id=None, created_at=now,
            log_seq=entry.seq,
        ))
        self.artifacts[artifact_id] = artifact
        return artifact

    def read(self, artifact_id: str, version: Optional[int] = None) -> ArtifactVersion:
        artifact = self.get(artifact_id)
        if version is None:
            version = artifact.head_version
        if not 1 <= version <= artifact.head_version:
            raise UnknownVersion(f"{artifact_id} has no version {version}")
        return artifact.versions[version - 1]

    def content(self, artifact_id: str, version: Optional[int] = None) -> bytes:
        return self.store.get(self.read(artifact_id, version).content_hash)

    def commit(self, artifact_id: str, actor_id: str, content: bytes, now: int,
               change_request_id: Optional[str] = None,
               expected_parent_version: Optional[int] = None) -> ArtifactVersion:
        artifact = self.get(artifact_id)
        if artifact.state is ArtifactState.DELETED:
            raise ArtifactDeleted(f"{artifact_id} is deleted")
        if expected_parent_version is not None and expected_parent_version != artifact.head_version:
            raise StaleParent(
                f"expected parent {expected_parent_version}, head is {artifact.head_version}"
            )
        content_hash = self.store.put(content)
        version = artifact.head_version + 1
        entry = self.log.append(
            EventType.MODIFY, actor_id, artifact_id,
            {
                "version": version,
                "content_hash": content_hash,
                "change_request_id": change_request_id,
            },
            now,
        )
        record = ArtifactVersion(
            artifact_id=artifact_id, version=version, content_hash=content_hash,
            author_id=actor_id, change_request_id=change_request_id, created_at=now,
            log_seq=entry.seq,
        )
        artifact.versions.append(record)
        return record

    def delete(self, artifact_id: str, actor_id: str, now: int) -> Artifact:
        artifact = self.get(artifact_id)
        if artifact.state is ArtifactState.DELETED:
            raise AlreadyDeleted(f"{artifact_id} already deleted")
        artifact.state = ArtifactState.DELETED
        self.log.append(EventType.DELETE, actor_id, artifact_id, {"state": "DELETED"}, now)
        return artifact

    def recall(self, artifact_id: str, actor_id: str, now: int) -> Artifact:
        artifact = self.get(artifact_id)
        if artifact.state is not ArtifactState.DELETED:
            raise NotDeleted(f"{artifact_id} is not deleted")
        artifact.state = ArtifactState.ACTIVE
        self.log.append(EventType.RECALL, actor_id, artifact_id, {"state": "ACTIVE"}, now)
        return artifact


@dataclass
class ReplayedArtifact:
    artifact_id: str
    kind: str
    owner_team_id: str
    state: str
    media_type: str
    versions: list[dict] = field(default_factory=list)

    @property
    def head_version(self) -> int:
        return len(self.versions)

    @property
    def head_content_hash(self) -> Optional[str]:
        return self.versions[-1]["content_hash"] if self.versions else None


@dataclass
class ReplayedState:
    """Artifact-store view reconstructed purely from the log."""

    artifacts: dict[str, ReplayedArtifact] = field(default_factory=dict)

    def summary(self) -> dict[str, tuple[str, int, Optional[str]]]:
        return {
            a.artifact_id: (a.state, a.head_version, a.head_content_hash)
            for a in self.artifacts.values()
        }


def replay_log(entries: Iterable[LogEntry], verify: bool = True) -> ReplayedState:
    """Rebuild artifact state from the event log.

    With verify=True the hash chain is checked first; tampering surfaces
    as ChainBroken rather than silently corrupt state.
    """
    entries = list(entries)
    if verify:
        verify_chain(entries)
    state = ReplayedState()
    for entry in entries:
        payload = entry.payload
        if entry.event_type is EventType.CREATE:
            art = ReplayedArtifact(
                artifact_id=entry.subject_id,
                kind=payload["kind"],
                owner_team_id=payload["owner_team_id"],
                state=ArtifactState.ACTIVE.value,
                media_type=payload.get("media_type", "text/plain"),
            )
            art.versions.append({
                "version": 1,
                "content_hash": payload["content_hash"],
                "author_id": entry.actor_id,
                "change_request_id": None,
                "created_at": entry.timestamp,
                "log_seq": entry.seq,
            })
            state.artifacts[entry.subject_id] = art
        elif entry.event_type is EventType.MODIFY:
            art = state.artifacts.get(entry.subject_id)
            if art is None:
                raise ChainBroken(f"MODIFY before CREATE at seq {entry.seq}", seq=entry.seq)
            expected = art.head_version + 1
            if payload["version"] != expected:
                raise ChainBroken(f"non-dense version at seq {entry.seq}", seq=entry.seq)
            art.versions.append({
                "version": payload["version"],
                "content_hash": payload["content_hash"],
                "author_id": entry.actor_id,
                "change_request_id": payload.get("change_request_id"),
                "created_at": entry.timestamp,
                "log_seq": entry.seq,
            })
        elif entry.event_type is EventType.DELETE:
            art = state.artifacts.get(entry.subject_id)
            if art is None:
                raise ChainBroken(f"DELETE before CREATE at seq {entry.seq}", seq=entry.seq)
            art.state = ArtifactState.DELETED.value
        elif entry.event_type is EventType.RECALL:
            art = state.artifacts.get(entry.subject_id)
            if art is None:
                raise ChainBroken(f"RECALL before CREATE at seq {entry.seq}", seq=entry.seq)
            art.state = ArtifactState.ACTIVE.value
    return state
