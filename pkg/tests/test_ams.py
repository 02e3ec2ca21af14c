"""Artifact monitoring: push forwarding, poll catch-up, external digest scans."""

import pytest

from reactive_middleware.ams import ArtifactMonitor
from reactive_middleware.errors import PathUnreadable, UnknownAgent, UnknownArtifact
from reactive_middleware.repository import ChangeLog, EventType


class Recorder:
    """Counts fan-out calls and fake tool change requests."""

    def __init__(self):
        self.fanned: list[int] = []
        self.tool_crs: list[dict] = []

    def fan_out(self, seq):
        self.fanned.append(seq)
        return []

    def submit_tool_cr(self, tool_agent_id, artifact_id, content, rationale):
        record = {"tool": tool_agent_id, "artifact_id": artifact_id,
                  "content": content, "rationale": rationale}
        self.tool_crs.append(record)
        return record


def make_ams(artifacts=("art-1", "art-2"), tools=("tool-1",)):
    log = ChangeLog()
    rec = Recorder()
    ams = ArtifactMonitor(
        log,
        artifact_exists=lambda a: a in artifacts,
        fan_out=rec.fan_out,
        submit_tool_cr=rec.submit_tool_cr,
        agent_is_tool=lambda a: a in tools,
    )
    return ams, log, rec


def modify(log, artifact_id, version=2):
    return log.append(EventType.MODIFY, "alice", artifact_id,
                      {"version": version, "content_hash": "h"}, timestamp=10)


def test_watch_validates_inputs(tmp_path):
    ams, _, _ = make_ams()
    with pytest.raises(UnknownArtifact):
        ams.watch("ghost")
    with pytest.raises(UnknownArtifact):
        ams.unwatch("ghost")
    path = tmp_path / "w.txt"
    path.write_text("x")
    with pytest.raises(UnknownAgent):
        ams.watch("art-1", external_path=str(path))  # no tool agent named
    with pytest.raises(UnknownAgent):
        ams.watch("art-1", external_path=str(path), tool_agent_id="not-a-tool")


def test_observe_forwards_changes_once():
    ams, log, rec = make_ams()
    ams.watch("art-1")
    entry = modify(log, "art-1")
    ams.observe(entry)
    assert rec.fanned == [entry.seq]
    # the push already advanced the cursor; polling finds nothing new
    assert ams.poll_internal() == []
    assert rec.fanned == [entry.seq]


def test_observe_ignores_non_change_entries():
    ams, log, rec = make_ams()
    ams.watch("art-1")
    entry = log.append(EventType.NOTIFY, "x", "art-1", {"change_seq": 1}, 5)
    ams.observe(entry)
    assert rec.fanned == []


def test_poll_catches_up_missed_entries():
    ams, log, rec = make_ams()
    ams.watch("art-1")
    e1 = modify(log, "art-1", version=2)
    e2 = modify(log, "art-2", version=2)  # not watched
    e3 = modify(log, "art-1", version=3)
    forwarded = ams.poll_internal()
    assert [f["seq"] for f in forwarded] == [e1.seq, e3.seq]
    assert rec.fanned == [e1.seq, e3.seq]
    # cursors moved to head: a second poll is quiet
    assert ams.poll_internal() == []


def test_watch_starts_at_current_head():
    ams, log, rec = make_ams()
    modify(log, "art-1")  # before the watch exists
    ams.watch("art-1")
    assert ams.poll_internal() == []


def test_scan_external_submits_cr_on_digest_change(tmp_path):
    ams, _, rec = make_ams()
    path = tmp_path / "spec.txt"
    path.write_text("rev A")
    ams.watch("art-1", external_path=str(path), tool_agent_id="tool-1")

    # unchanged file: quiet scan
    result = ams.scan_external()
    assert result == {"change_requests": [], "unreadable": []}

    path.write_text("rev B")
    result = ams.scan_external()
    assert len(result["change_requests"]) == 1
    cr = rec.tool_crs[0]
    assert cr["tool"] == "tool-1"
    assert cr["artifact_id"] == "art-1"
    assert cr["content"] == b"rev B"
    assert "spec.txt" in cr["rationale"]

    # digest snapshot updated: same content does not re-trigger
    assert ams.scan_external()["change_requests"] == []


def test_scan_collapses_multiple_edits_into_one_request(tmp_path):
    ams, _, rec = make_ams()
    path = tmp_path / "w.txt"
    path.write_text("one")
    ams.watch("art-1", external_path=str(path), tool_agent_id="tool-1")
    path.write_text("two")
    path.write_text("three")
    result = ams.scan_external()
    assert len(result["change_requests"]) == 1
    assert rec.tool_crs[0]["content"] == b"three"


def test_scan_reports_unreadable_paths(tmp_path):
    ams, _, _ = make_ams()
    path = tmp_path / "gone.txt"
    path.write_text("x")
    ams.watch("art-1", external_path=str(path), tool_agent_id="tool-1")
    path.unlink()
    result = ams.scan_external()
    assert result["change_requests"] == []
    assert result["unreadable"][0]["artifact_id"] == "art-1"


def test_watch_missing_path_raises(tmp_path):
    ams, _, _ = make_ams()
    with pytest.raises(PathUnreadable):
        ams.watch("art-1", external_path=str(tmp_path / "nope.txt"),
                  tool_agent_id="tool-1")


def test_apply_watch_keeps_recorded_digest(tmp_path):
    # a stale recorded digest means the next scan still sees the offline edit
    ams, _, rec = make_ams()
    path = tmp_path / "w.txt"
    path.write_text("new bytes")
    ams.apply_watch({
        "artifact_id": "art-1",
        "external_path": str(path),
        "external_hash": "0" * 64,  # digest recorded before the edit
        "tool_agent_id": "tool-1",
    })
    result = ams.scan_external()
    assert len(result["change_requests"]) == 1
    assert rec.tool_crs[0]["content"] == b"new bytes"
