"""Small shared helpers: canonical hashing, content encoding, id generation."""

from __future__ import annotations

import base64
import hashlib
import json

GENESIS_DIGEST = "0" * 64

# Reserved actor used when the workflow applies an approved change request.
SYSTEM_AGENT_ID = "rm-system"


def canonical_json(value) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_of(value) -> str:
    """Digest of the canonical JSON form of a structure."""
    return sha256_hex(canonical_json(value).encode("utf-8"))


def b64encode_content(content: bytes) -> str:
    return base64.b64encode(content).decode("ascii")


def b64decode_content(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"))


class IdGenerator:
    """Monotonic per-prefix counters, e.g. art-000001, cr-000002.

    Deterministic by construction; `observe` lets a restore resume
    counters past ids already present in a replayed log.
    """

    def __init__(self):
        self._counters: dict[str, int] = {}

    def next(self, prefix: str) -> str:
        n = self._counters.get(prefix, 0) + 1
        self._counters[prefix] = n
        return f"{prefix}-{n:06d}"

    def observe(self, identifier: str) -> None:
        prefix, _, tail = identifier.rpartition("-")
        if not prefix or not tail.isdigit():
            return
        n = int(tail)
        if n > self._counters.get(prefix, 0):
            self._counters[prefix] = n
