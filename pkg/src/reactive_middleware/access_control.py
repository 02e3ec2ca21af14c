"""Six-privilege access model enforced as capability sets per (agent, artifact).

Privileges are not a total order (Review can amend pending changes but not
commit; Modify can commit but not review), so each privilege maps to an
explicit capability set instead of a rank.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

from .errors import NotALeader, UnknownAgent, UnknownArtifact


class Privilege(str, Enum):
    NONE = "NONE"
    VIEW = "VIEW"
    MODIFY = "MODIFY"
    REVIEW = "REVIEW"
    CREATE = "CREATE"
    OWN = "OWN"


class Capability(str, Enum):
    VIEW = "VIEW"
    MODIFY = "MODIFY"
    REVIEW_PENDING = "REVIEW_PENDING"
    CREATE = "CREATE"
    DELETE = "DELETE"
    RECALL = "RECALL"


CAPABILITIES: dict[Privilege, frozenset[Capability]] = {
    Privilege.NONE: frozenset(),
    Privilege.VIEW: frozenset({Capability.VIEW}),
    Privilege.MODIFY: frozenset({Capability.VIEW, Capability.MODIFY}),
    Privilege.REVIEW: frozenset({Capability.VIEW, Capability.REVIEW_PENDING}),
    Privilege.CREATE: frozenset({Capability.VIEW, Capability.MODIFY, Capability.CREATE}),
    Privilege.OWN: frozenset(
        {
            Capability.VIEW,
            Capability.MODIFY,
            Capability.REVIEW_PENDING,
            Capability.CREATE,
            Capability.DELETE,
            Capability.RECALL,
        }
    ),
}


@dataclass
class Grant:
    agent_id: str
    scope: str  # artifact id, or "team:<team_id>" wildcard
    privilege: Privilege
    granted_by: str
    granted_at: int

    def to_dict(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "scope": self.scope,
            "privilege": self.privilege.value,
            "granted_by": self.granted_by,
            "granted_at": self.granted_at,
        }


def team_scope(team_id: str) -> str:
    return f"team:{team_id}"


class AccessControl:
    """Grant table plus the pure authorize decision.

    Effective privilege resolution, most specific wins:
      1. explicit grant on the artifact
      2. explicit grant on the owning team's scope
      3. leader of the owning team -> OWN
      4. any team leader -> REVIEW (GSD change managers review globally)
      5. TOOL agent -> REVIEW (default tool privilege)
      6. -> NONE
    """

    def __init__(
        self,
        agent_kind: Callable[[str], Optional[str]],
        is_leader_of: Callable[[str, str], bool],
        is_any_leader: Callable[[str], bool],
        artifact_team: Callable[[str], Optional[str]],
    ):
        # Callables resolve directory facts so this module stays table-pure.
        self._agent_kind = agent_kind
        self._is_leader_of = is_leader_of
        self._is_any_leader = is_any_leader
        self._artifact_team = artifact_team
        self._grants: dict[tuple[str, str], Grant] = {}

    # -- mutation ------------------------------------------------------------

    def assign(self, leader_id: str, agent_id: str, scope: str, privilege: Privilege, now: int) -> Grant:
        """Record a grant; later grants on the same (agent, scope) supersede."""
        if self._agent_kind(agent_id) is None:
            raise UnknownAgent(f"no such agent: {agent_id}")
        team_id = self._scope_team(scope)
        if not self._is_leader_of(leader_id, team_id):
            raise NotALeader(f"{leader_id} does not lead {team_id}")
        grant = Grant(agent_id=agent_id, scope=scope, privilege=privilege, granted_by=leader_id, granted_at=now)
        self._grants[(agent_id, scope)] = grant
        return grant

    def apply_grant(self, grant: Grant) -> None:
        """Install a grant without authority checks (replay/import path)."""
        self._grants[(grant.agent_id, grant.scope)] = grant

    def _scope_team(self, scope: str) -> str:
        if scope.startswith("team:"):
            return scope.split(":", 1)[1]
        team_id = self._artifact_team(scope)
        if team_id is None:
            raise UnknownArtifact(f"no such artifact: {scope}")
        return team_id

    # -- queries (pure) --------------------------------------------------------

    def effective_privilege(self, agent_id: str, artifact_id: str) -> Privilege:
        team_id = self._artifact_team(artifact_id)
        if team_id is None:
            raise UnknownArtifact(f"no such artifact: {artifact_id}")
        grant = self._grants.get((agent_id, artifact_id))
        if grant is not None:
            return grant.privilege
        grant = self._grants.get((agent_id, team_scope(team_id)))
        if grant is not None:
            return grant.privilege
        return self._implicit_privilege(agent_id, team_id)

    def effective_team_privilege(self, agent_id: str, team_id: str) -> Privilege:
        grant = self._grants.get((agent_id, team_scope(team_id)))
        if grant is not None:
            return grant.privilege
        return self._implicit_privilege(agent_id, team_id)

    def _implicit_privilege(self, agent_id: str, team_id: str) -> Privilege:
        if self._is_leader_of(agent_id, team_id):
            return Privilege.OWN
        if self._is_any_leader(agent_id):
            return Privilege.REVIEW
        if self._agent_kind(agent_id) == "TOOL":
            return Privilege.REVIEW
        return Privilege.NONE

    def authorize(self, agent_id: str, artifact_id: str, capability: Capability) -> bool:
        """Pure allow/deny; deny is a value, never an exception."""
        try:
            privilege = self.effective_privilege(agent_id, artifact_id)
        except UnknownArtifact:
            return False
        return capability in CAPABILITIES[privilege]

    def authorize_team(self, agent_id: str, team_id: str, capability: Capability) -> bool:
        return capability in CAPABILITIES[self.effective_team_privilege(agent_id, team_id)]

    def grants(self) -> list[Grant]:
        return sorted(self._grants.values(), key=lambda g: (g.agent_id, g.scope))


__all__ = [
    "AccessControl",
    "Capability",
    "CAPABILITIES",
    "Grant",
    "Privilege",
    "team_scope",
]
