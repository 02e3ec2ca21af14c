"""Privilege/capability decision table and grant resolution order."""

import itertools

import pytest

from reactive_middleware.access_control import (
    CAPABILITIES,
    AccessControl,
    Capability,
    Grant,
    Privilege,
    team_scope,
)
from reactive_middleware.errors import NotALeader, UnknownAgent, UnknownArtifact

# The full 6x6 decision table, written out so a regression in CAPABILITIES
# cannot hide behind the same constant the implementation uses.
EXPECTED_MATRIX = {
    ("NONE", "VIEW"): False,
    ("NONE", "MODIFY"): False,
    ("NONE", "REVIEW_PENDING"): False,
    ("NONE", "CREATE"): False,
    ("NONE", "DELETE"): False,
    ("NONE", "RECALL"): False,
    ("VIEW", "VIEW"): True,
    ("VIEW", "MODIFY"): False,
    ("VIEW", "REVIEW_PENDING"): False,
    ("VIEW", "CREATE"): False,
    ("VIEW", "DELETE"): False,
    ("VIEW", "RECALL"): False,
    ("MODIFY", "VIEW"): True,
    ("MODIFY", "MODIFY"): True,
    ("MODIFY", "REVIEW_PENDING"): False,
    ("MODIFY", "CREATE"): False,
    ("MODIFY", "DELETE"): False,
    ("MODIFY", "RECALL"): False,
    ("REVIEW", "VIEW"): True,
    ("REVIEW", "MODIFY"): False,
    ("REVIEW", "REVIEW_PENDING"): True,
    ("REVIEW", "CREATE"): False,
    ("REVIEW", "DELETE"): False,
    ("REVIEW", "RECALL"): False,
    ("CREATE", "VIEW"): True,
    ("CREATE", "MODIFY"): True,
    ("CREATE", "REVIEW_PENDING"): False,
    ("CREATE", "CREATE"): True,
    ("CREATE", "DELETE"): False,
    ("CREATE", "RECALL"): False,
    ("OWN", "VIEW"): True,
    ("OWN", "MODIFY"): True,
    ("OWN", "REVIEW_PENDING"): True,
    ("OWN", "CREATE"): True,
    ("OWN", "DELETE"): True,
    ("OWN", "RECALL"): True,
}


def make_access(kinds=None, leaders=None, artifact_team=None):
    """AccessControl over a tiny fake directory held in plain dicts."""
    kinds = kinds or {}
    leaders = leaders or {}  # team_id -> leader agent_id
    artifacts = artifact_team or {}
    return AccessControl(
        agent_kind=kinds.get,
        is_leader_of=lambda agent, team: leaders.get(team) == agent,
        is_any_leader=lambda agent: agent in leaders.values(),
        artifact_team=artifacts.get,
    )


def grant_for(ac, agent, artifact, privilege):
    ac.apply_grant(Grant(agent_id=agent, scope=artifact, privilege=privilege,
                         granted_by="test", granted_at=0))


def test_matrix_is_exhaustive():
    pairs = set(itertools.product([p.value for p in Privilege],
                                  [c.value for c in Capability]))
    assert set(EXPECTED_MATRIX) == pairs
    assert len(EXPECTED_MATRIX) == 36


@pytest.mark.parametrize("privilege,capability",
                         list(itertools.product(Privilege, Capability)))
def test_authorize_matches_matrix(privilege, capability):
    ac = make_access(kinds={"u": "HUMAN"}, artifact_team={"art": "team-x"})
    grant_for(ac, "u", "art", privilege)
    expected = EXPECTED_MATRIX[(privilege.value, capability.value)]
    assert ac.authorize("u", "art", capability) is expected


def test_capability_table_matches_matrix():
    for privilege in Privilege:
        granted = {c for c in Capability
                   if EXPECTED_MATRIX[(privilege.value, c.value)]}
        assert CAPABILITIES[privilege] == granted


def test_review_and_modify_are_incomparable():
    # neither set contains the other; privileges are not a rank order
    assert not CAPABILITIES[Privilege.REVIEW] <= CAPABILITIES[Privilege.MODIFY]
    assert not CAPABILITIES[Privilege.MODIFY] <= CAPABILITIES[Privilege.REVIEW]
    assert CAPABILITIES[Privilege.VIEW] < CAPABILITIES[Privilege.MODIFY]
    assert all(CAPABILITIES[p] <= CAPABILITIES[Privilege.OWN] for p in Privilege)


def test_human_default_is_none_and_tool_default_is_review():
    ac = make_access(kinds={"human": "HUMAN", "tool": "TOOL"},
                     artifact_team={"art": "team-x"})
    assert ac.effective_privilege("human", "art") is Privilege.NONE
    assert ac.effective_privilege("tool", "art") is Privilege.REVIEW
    assert ac.authorize("tool", "art", Capability.REVIEW_PENDING)
    assert not ac.authorize("tool", "art", Capability.MODIFY)


def test_owning_team_leader_gets_own():
    ac = make_access(kinds={"boss": "HUMAN"}, leaders={"team-x": "boss"},
                     artifact_team={"art": "team-x"})
    assert ac.effective_privilege("boss", "art") is Privilege.OWN


def test_foreign_leader_gets_review_only():
    ac = make_access(kinds={"boss": "HUMAN"},
                     leaders={"team-y": "boss"},
                     artifact_team={"art": "team-x"})
    assert ac.effective_privilege("boss", "art") is Privilege.REVIEW
    assert not ac.authorize("boss", "art", Capability.DELETE)


def test_artifact_grant_beats_team_grant():
    ac = make_access(kinds={"u": "HUMAN"}, artifact_team={"art": "team-x"})
    ac.apply_grant(Grant("u", team_scope("team-x"), Privilege.OWN, "test", 0))
    ac.apply_grant(Grant("u", "art", Privilege.VIEW, "test", 1))
    assert ac.effective_privilege("u", "art") is Privilege.VIEW


def test_team_grant_overrides_implicit_privilege():
    # an explicit grant narrows even a leader's implicit OWN
    ac = make_access(kinds={"boss": "HUMAN"}, leaders={"team-x": "boss"},
                     artifact_team={"art": "team-x"})
    ac.apply_grant(Grant("boss", team_scope("team-x"), Privilege.VIEW, "test", 0))
    assert ac.effective_privilege("boss", "art") is Privilege.VIEW


def test_later_grant_supersedes_earlier():
    ac = make_access(kinds={"boss": "HUMAN", "u": "HUMAN"},
                     leaders={"team-x": "boss"}, artifact_team={"art": "team-x"})
    ac.assign("boss", "u", "art", Privilege.MODIFY, now=1)
    ac.assign("boss", "u", "art", Privilege.VIEW, now=2)
    assert ac.effective_privilege("u", "art") is Privilege.VIEW
    assert len(ac.grants()) == 1


def test_assign_requires_leadership_of_scope_team():
    ac = make_access(kinds={"boss": "HUMAN", "u": "HUMAN"},
                     leaders={"team-y": "boss"}, artifact_team={"art": "team-x"})
    with pytest.raises(NotALeader):
        ac.assign("boss", "u", "art", Privilege.VIEW, now=0)
    with pytest.raises(NotALeader):
        ac.assign("u", "u", team_scope("team-y"), Privilege.VIEW, now=0)


def test_assign_rejects_unknown_agent_and_artifact():
    ac = make_access(kinds={"boss": "HUMAN"}, leaders={"team-x": "boss"},
                     artifact_team={"art": "team-x"})
    with pytest.raises(UnknownAgent):
        ac.assign("boss", "ghost", "art", Privilege.VIEW, now=0)
    with pytest.raises(UnknownArtifact):
        ac.assign("boss", "boss", "no-such-artifact", Privilege.VIEW, now=0)


def test_authorize_denies_unknown_artifact_without_raising():
    ac = make_access(kinds={"u": "HUMAN"})
    assert ac.authorize("u", "ghost", Capability.VIEW) is False


def test_team_scope_authorization_gates_create():
    ac = make_access(kinds={"u": "HUMAN"}, artifact_team={})
    assert not ac.authorize_team("u", "team-x", Capability.CREATE)
    ac.apply_grant(Grant("u", team_scope("team-x"), Privilege.CREATE, "test", 0))
    assert ac.authorize_team("u", "team-x", Capability.CREATE)
    assert not ac.authorize_team("u", "team-x", Capability.DELETE)
