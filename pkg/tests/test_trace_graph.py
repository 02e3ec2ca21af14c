"""Typed trace links, directional impact traversal, provenance chains."""

import random

import pytest

from reactive_middleware.errors import (
    DuplicateLink,
    SelfLoop,
    UnknownArtifact,
    UnknownLink,
    UnknownVersion,
)
from reactive_middleware.harness.checks import impact_oracle
from reactive_middleware.repository import ArtifactRepository, ChangeLog, ContentStore
from reactive_middleware.trace_graph import LinkType, TraceGraph, provenance_chain

LINK_TYPES = [t.value for t in LinkType]


def make_graph(artifact_ids):
    known = set(artifact_ids)
    log = ChangeLog()
    return TraceGraph(log, artifact_exists=lambda a: a in known), log


def test_add_and_remove_links():
    g, log = make_graph(["a", "b"])
    link = g.add("l1", "actor", "a", "b", "DERIVES_FROM", now=1)
    assert link.link_type is LinkType.DERIVES_FROM
    assert [l.link_id for l in g.links()] == ["l1"]
    assert log.entries()[-1].event_type.value == "LINK"

    g.remove("l1", "actor", now=2)
    assert g.links() == []
    assert log.entries()[-1].event_type.value == "UNLINK"
    with pytest.raises(UnknownLink):
        g.get("l1")


def test_link_validation():
    g, _ = make_graph(["a", "b"])
    with pytest.raises(SelfLoop):
        g.add("l1", "actor", "a", "a", "REFINES", now=1)
    with pytest.raises(UnknownArtifact):
        g.add("l1", "actor", "a", "ghost", "REFINES", now=1)
    g.add("l1", "actor", "a", "b", "REFINES", now=1)
    with pytest.raises(DuplicateLink):
        g.add("l2", "actor", "a", "b", "REFINES", now=2)
    # same endpoints under a different type is a distinct link
    g.add("l3", "actor", "a", "b", "VERIFIES", now=3)


def test_depends_on_propagates_against_the_arrow():
    # code depends on lib: a change to lib impacts code, not the reverse
    g, _ = make_graph(["code", "lib"])
    g.add("l1", "actor", "code", "lib", "DEPENDS_ON", now=1)
    assert g.impact_set("lib") == [("code", 1)]
    assert g.impact_set("code") == []


def test_forward_types_propagate_with_the_arrow():
    for link_type in ["DERIVES_FROM", "SATISFIES", "VERIFIES", "REFINES"]:
        g, _ = make_graph(["src", "dst"])
        g.add("l1", "actor", "src", "dst", link_type, now=1)
        assert g.impact_set("src") == [("dst", 1)], link_type
        assert g.impact_set("dst") == [], link_type


def test_impact_excludes_source_and_orders_by_distance():
    g, _ = make_graph(["r", "d", "c", "t"])
    g.add("l1", "a", "r", "d", "SATISFIES", now=1)
    g.add("l2", "a", "d", "c", "REFINES", now=2)
    g.add("l3", "a", "c", "t", "VERIFIES", now=3)
    assert g.impact_set("r") == [("d", 1), ("c", 2), ("t", 3)]
    assert g.impact_set("r", depth=2) == [("d", 1), ("c", 2)]
    assert g.upstream_set("t") == [("c", 1), ("d", 2), ("r", 3)]


def test_cycles_terminate_with_min_distance():
    g, _ = make_graph(["a", "b", "c"])
    g.add("l1", "x", "a", "b", "REFINES", now=1)
    g.add("l2", "x", "b", "c", "REFINES", now=2)
    g.add("l3", "x", "c", "a", "REFINES", now=3)
    assert g.impact_set("a") == [("b", 1), ("c", 2)]
    assert g.impact_set("b") == [("c", 1), ("a", 2)]


def test_removed_link_stops_propagation():
    g, _ = make_graph(["a", "b"])
    g.add("l1", "x", "a", "b", "SATISFIES", now=1)
    g.remove("l1", "x", now=2)
    assert g.impact_set("a") == []


def test_unknown_artifact_impact_raises():
    g, _ = make_graph(["a"])
    with pytest.raises(UnknownArtifact):
        g.impact_set("ghost")


def test_impact_matches_oracle_on_random_graphs():
    rng = random.Random(2024)
    for round_no in range(25):
        n = rng.randrange(5, 40)
        nodes = [f"n{i}" for i in range(n)]
        g, _ = make_graph(nodes)
        edges = []
        seen = set()
        for k in range(rng.randrange(n, 4 * n)):
            a, b = rng.sample(nodes, 2)
            lt = rng.choice(LINK_TYPES)
            if (a, b, lt) in seen:
                continue
            seen.add((a, b, lt))
            g.add(f"l{k}", "x", a, b, lt, now=k)
            edges.append((a, b, lt))
        for start in rng.sample(nodes, 5):
            assert g.impact_set(start) == impact_oracle(edges, start), \
                f"round {round_no}, start {start}"
            depth = rng.randrange(1, 4)
            assert g.impact_set(start, depth=depth) == \
                impact_oracle(edges, start, depth=depth)


def test_exports_list_every_link():
    g, _ = make_graph(["a", "b", "c"])
    g.add("l1", "x", "a", "b", "SATISFIES", now=1)
    g.add("l2", "x", "b", "c", "DEPENDS_ON", now=2)
    edge_list = g.export_edge_list()
    assert "a\tb\tSATISFIES" in edge_list
    dot = g.export_dot()
    assert dot.startswith("digraph")
    assert '"b" -> "c"' in dot


# -- provenance ---------------------------------------------------------------

def test_provenance_chain_orders_versions():
    log = ChangeLog()
    repo = ArtifactRepository(log, ContentStore())
    repo.create("art-1", "alice", "CODE", "team-a", b"one", now=10)
    repo.commit("art-1", "bob", b"two", now=20, change_request_id="cr-1")
    repo.commit("art-1", "carol", b"three", now=30)

    chain = provenance_chain(repo.get("art-1"))
    assert [c["version"] for c in chain] == [1, 2, 3]
    assert [c["author_id"] for c in chain] == ["alice", "bob", "carol"]
    assert chain[1]["change_request_id"] == "cr-1"
    assert [c["timestamp"] for c in chain] == [10, 20, 30]
    assert all(c["log_seq"] for c in chain)

    truncated = provenance_chain(repo.get("art-1"), version=2)
    assert [c["version"] for c in truncated] == [1, 2]
    with pytest.raises(UnknownVersion):
        provenance_chain(repo.get("art-1"), version=9)
