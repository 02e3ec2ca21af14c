"""Append-only log, hash chain, content store, and artifact lifecycle."""

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reactive_middleware.errors import (
    AlreadyDeleted,
    ArtifactDeleted,
    ChainBroken,
    NotDeleted,
    OutOfOrder,
    StaleParent,
    UnknownArtifact,
    UnknownVersion,
)
from reactive_middleware.repository import (
    ArtifactRepository,
    ChangeLog,
    ContentStore,
    EventType,
    LogEntry,
    parse_ndjson_log,
    replay_log,
    verify_chain,
)

GENESIS = "0" * 64


def fresh_repo():
    log = ChangeLog()
    store = ContentStore()
    return ArtifactRepository(log, store), log, store


def seed_log(n: int) -> ChangeLog:
    log = ChangeLog()
    for i in range(1, n + 1):
        log.append(EventType.MODIFY, f"actor-{i % 3}", f"art-{i % 5}",
                   {"version": i, "content_hash": f"h{i}"}, timestamp=1000 + i)
    return log


# -- hash chain ---------------------------------------------------------------

def test_chain_links_back_to_genesis():
    log = seed_log(5)
    entries = log.entries()
    assert entries[0].prev_hash == GENESIS
    for prev, cur in zip(entries, entries[1:]):
        assert cur.prev_hash == prev.entry_hash
    assert log.verify() is True
    assert log.head_hash == entries[-1].entry_hash
    assert [e.seq for e in entries] == [1, 2, 3, 4, 5]


def test_entries_since_slices_by_seq():
    log = seed_log(5)
    assert [e.seq for e in log.entries(since=3)] == [4, 5]
    assert log.entries(since=5) == []


def test_verify_chain_reports_mutated_index():
    log = seed_log(10)
    entries = log.entries()
    victim = entries[6]
    entries[6] = LogEntry(**{**victim.to_dict(),
                             "event_type": victim.event_type,
                             "payload": {"version": 999, "content_hash": "forged"}})
    with pytest.raises(ChainBroken) as err:
        verify_chain(entries)
    assert err.value.seq == 7


def test_single_byte_mutation_in_serialized_log_is_caught():
    log = seed_log(8)
    text = log.export_ndjson()
    rng = random.Random(42)
    for _ in range(50):
        raw = bytearray(text, "utf-8")
        pos = rng.randrange(len(raw))
        original = raw[pos]
        replacement = rng.randrange(32, 127)
        if replacement == original:
            replacement = original ^ 1
        raw[pos] = replacement
        try:
            entries = parse_ndjson_log(raw.decode("utf-8", errors="strict"))
            verify_chain(entries, expected_head=log.head_hash)
        except (ChainBroken, UnicodeDecodeError):
            continue
        pytest.fail(f"mutation at byte {pos} went undetected")


def test_import_entry_enforces_order_and_chain():
    log = seed_log(3)
    replica = ChangeLog()
    entries = log.entries()
    with pytest.raises(OutOfOrder):
        replica.import_entry(entries[1])
    replica.import_entry(entries[0])
    # right position, broken linkage
    forged = LogEntry(**{**entries[2].to_dict(), "event_type": entries[2].event_type,
                         "seq": 2})
    with pytest.raises(ChainBroken):
        replica.import_entry(forged)
    replica.import_entry(entries[1])
    replica.import_entry(entries[2])
    assert replica.head_hash == log.head_hash


def test_head_hash_mismatch_detected():
    log = seed_log(4)
    with pytest.raises(ChainBroken):
        verify_chain(log.entries(), expected_head="f" * 64)


def test_ndjson_round_trip():
    log = seed_log(6)
    parsed = parse_ndjson_log(log.export_ndjson())
    assert [e.to_dict() for e in parsed] == [e.to_dict() for e in log.entries()]
    verify_chain(parsed, expected_head=log.head_hash)


@given(st.lists(st.tuples(st.sampled_from(["a", "b", "c"]),
                          st.integers(0, 5)), min_size=1, max_size=20))
@settings(max_examples=50, deadline=None)
def test_append_then_verify_always_holds(ops):
    log = ChangeLog()
    for actor, n in ops:
        log.append(EventType.NOTIFY, actor, f"art-{n}", {"n": n}, timestamp=n)
    assert log.verify() is True


# -- content store ------------------------------------------------------------

def test_store_is_content_addressed():
    store = ContentStore()
    d1 = store.put(b"same bytes")
    d2 = store.put(b"same bytes")
    assert d1 == d2
    assert store.get(d1) == b"same bytes"
    assert d1 in store
    assert len(store.digests()) == 1


def test_store_get_unknown_digest():
    store = ContentStore()
    with pytest.raises(UnknownVersion):
        store.get("0" * 64)


def test_store_persists_to_disk(tmp_path):
    store = ContentStore(root=str(tmp_path))
    digest = store.put(b"\x00\x01\xff binary ok")
    reopened = ContentStore(root=str(tmp_path))
    assert reopened.get(digest) == b"\x00\x01\xff binary ok"


# -- artifact lifecycle -------------------------------------------------------

def test_create_commit_read_versions():
    repo, log, _ = fresh_repo()
    repo.create("art-1", "alice", "CODE", "team-a", b"one", now=10)
    repo.commit("art-1", "bob", b"two", now=20)
    repo.commit("art-1", "alice", b"three", now=30, change_request_id="cr-7")

    art = repo.get("art-1")
    assert art.head_version == 3
    assert repo.content("art-1") == b"three"
    assert repo.content("art-1", version=1) == b"one"
    v3 = repo.read("art-1", 3)
    assert v3.change_request_id == "cr-7"
    assert v3.parent_version == 2
    with pytest.raises(UnknownVersion):
        repo.read("art-1", 4)
    with pytest.raises(UnknownArtifact):
        repo.get("art-9")


def test_stale_parent_guard():
    repo, _, _ = fresh_repo()
    repo.create("art-1", "alice", "CODE", "team-a", b"one", now=10)
    repo.commit("art-1", "alice", b"two", now=20, expected_parent_version=1)
    with pytest.raises(StaleParent):
        repo.commit("art-1", "bob", b"x", now=30, expected_parent_version=1)


def test_delete_blocks_commit_and_recall_restores():
    repo, _, _ = fresh_repo()
    repo.create("art-1", "alice", "CODE", "team-a", b"one", now=10)
    repo.commit("art-1", "alice", b"two", now=20)
    repo.delete("art-1", "alice", now=30)
    with pytest.raises(ArtifactDeleted):
        repo.commit("art-1", "alice", b"three", now=40)
    with pytest.raises(AlreadyDeleted):
        repo.delete("art-1", "alice", now=41)
    repo.recall("art-1", "alice", now=50)
    with pytest.raises(NotDeleted):
        repo.recall("art-1", "alice", now=51)
    assert repo.content("art-1") == b"two"
    assert repo.get("art-1").head_version == 2


def test_recall_round_trip_is_byte_identical():
    rng = random.Random(7)
    repo, _, _ = fresh_repo()
    for i in range(30):
        art_id = f"art-{i}"
        history = [bytes(rng.randrange(256) for _ in range(rng.randrange(1, 64)))
                   for _ in range(rng.randrange(1, 5))]
        repo.create(art_id, "alice", "CODE", "team-a", history[0], now=i)
        for content in history[1:]:
            repo.commit(art_id, "alice", content, now=i)
        before = [repo.content(art_id, v) for v in range(1, len(history) + 1)]
        repo.delete(art_id, "alice", now=i)
        repo.recall(art_id, "alice", now=i)
        after = [repo.content(art_id, v) for v in range(1, len(history) + 1)]
        assert after == before
        assert repo.content(art_id) == history[-1]


# -- replay -------------------------------------------------------------------

def test_replay_reproduces_live_state():
    repo, log, store = fresh_repo()
    repo.create("art-1", "alice", "CODE", "team-a", b"one", now=10)
    repo.commit("art-1", "bob", b"two", now=20)
    repo.create("art-2", "bob", "TEST", "team-b", b"probe", now=30)
    repo.delete("art-2", "bob", now=40)
    repo.recall("art-2", "bob", now=50)
    repo.delete("art-1", "alice", now=60)

    replayed = replay_log(log.entries())
    assert replayed.summary() == {
        "art-1": ("DELETED", 2, repo.read("art-1", 2).content_hash),
        "art-2": ("ACTIVE", 1, repo.read("art-2", 1).content_hash),
    }
    art1 = replayed.artifacts["art-1"]
    assert art1.kind == "CODE"
    assert art1.owner_team_id == "team-a"
    assert [v["version"] for v in art1.versions] == [1, 2]


def test_replay_rejects_malformed_histories():
    log = ChangeLog()
    log.append(EventType.MODIFY, "a", "art-1", {"version": 1, "content_hash": "h"}, 1)
    with pytest.raises(ChainBroken):
        replay_log(log.entries())

    log2 = ChangeLog()
    log2.append(EventType.CREATE, "a", "art-1",
                {"kind": "CODE", "owner_team_id": "t", "content_hash": "h",
                 "media_type": "text/plain", "version": 1}, 1)
    log2.append(EventType.MODIFY, "a", "art-1", {"version": 3, "content_hash": "h"}, 2)
    with pytest.raises(ChainBroken):
        replay_log(log2.entries())

    log3 = ChangeLog()
    log3.append(EventType.RECALL, "a", "art-1", {"state": "ACTIVE"}, 1)
    with pytest.raises(ChainBroken):
        replay_log(log3.entries())


def test_replay_ignores_non_change_entries():
    log = ChangeLog()
    log.append(EventType.CREATE, "a", "art-1",
               {"kind": "CODE", "owner_team_id": "t", "content_hash": "h",
                "media_type": "text/plain", "version": 1}, 1)
    log.append(EventType.NOTIFY, "system", "art-1", {"change_seq": 1}, 2)
    log.append(EventType.CR_SUBMIT, "a", "cr-1", {"artifact_id": "art-1"}, 3)
    state = replay_log(log.entries())
    assert state.artifacts["art-1"].head_version == 1


def test_log_sink_written_as_ndjson(tmp_path):
    sink = tmp_path / "log.ndjson"
    log = ChangeLog(sink_path=str(sink))
    log.append(EventType.NOTIFY, "a", "s", {"k": 1}, 1)
    log.append(EventType.NOTIFY, "a", "s", {"k": 2}, 2)
    lines = sink.read_text().splitlines()
    assert len(lines) == 2
    assert json.loads(lines[1])["payload"] == {"k": 2}
    parsed = parse_ndjson_log(sink.read_text())
    verify_chain(parsed, expected_head=log.head_hash)
