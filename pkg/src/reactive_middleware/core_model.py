"""Organizational entities and requirement prioritization.

Holds sites, teams, change agents, projects and requirements, derives the
change-manager set from team leadership, and classifies requirements into
HIGH/LOW priority from dependability attribute weights against a threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import (
    ConfigInvalid,
    DuplicateId,
    EmptyAttributeSet,
    IllegalPhaseTransition,
    NotATeamMember,
    OutOfRange,
    ToolCannotLead,
    UnknownAgent,
    UnknownProject,
    UnknownRequirement,
    UnknownSite,
    UnknownTeam,
)

MIN_TZ_OFFSET = -720
MAX_TZ_OFFSET = 840

DEFAULT_ATTRIBUTE_WEIGHTS = {
    "SAFETY": 1.0,
    "RELIABILITY": 0.9,
    "SECURITY": 0.8,
    "ROBUSTNESS": 0.7,
    "AVAILABILITY": 0.6,
    "MAINTAINABILITY": 0.3,
}

DEFAULT_PRIORITY_THRESHOLD = 0.7


class AgentKind(str, Enum):
    HUMAN = "HUMAN"
    TOOL = "TOOL"


class ProjectPhase(str, Enum):
    INITIATING = "INITIATING"
    PLANNING = "PLANNING"
    EXECUTING = "EXECUTING"
    MONITORING_CONTROLLING = "MONITORING_CONTROLLING"
    CLOSING = "CLOSING"


# Executing and monitoring/controlling alternate; everything else is one-way.
ALLOWED_PHASE_TRANSITIONS = {
    (ProjectPhase.INITIATING, ProjectPhase.PLANNING),
    (ProjectPhase.PLANNING, ProjectPhase.EXECUTING),
    (ProjectPhase.EXECUTING, ProjectPhase.MONITORING_CONTROLLING),
    (ProjectPhase.MONITORING_CONTROLLING, ProjectPhase.EXECUTING),
    (ProjectPhase.MONITORING_CONTROLLING, ProjectPhase.CLOSING),
}


class PriorityClass(str, Enum):
    HIGH = "HIGH"
    LOW = "LOW"


class AttributeName(str, Enum):
    SAFETY = "SAFETY"
    RELIABILITY = "RELIABILITY"
    ROBUSTNESS = "ROBUSTNESS"
    AVAILABILITY = "AVAILABILITY"
    SECURITY = "SECURITY"
    MAINTAINABILITY = "MAINTAINABILITY"


@dataclass
class Site:
    site_id: str
    name: str
    timezone_offset_minutes: int

    def to_dict(self) -> dict:
        return {
            "site_id": self.site_id,
            "name": self.name,
            "timezone_offset_minutes": self.timezone_offset_minutes,
        }


@dataclass
class Team:
    team_id: str
    site_id: str
    leader_id: str
    member_ids: set[str]

    def to_dict(self) -> dict:
        return {
            "team_id": self.team_id,
            "site_id": self.site_id,
            "leader_id": self.leader_id,
            "member_ids": sorted(self.member_ids),
        }


@dataclass
class ChangeAgent:
    agent_id: str
    kind: AgentKind
    display_name: str
    team_id: Optional[str] = None
    is_team_leader: bool = False

    def to_dict(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "kind": self.kind.value,
            "display_name": self.display_name,
            "team_id": self.team_id,
            "is_team_leader": self.is_team_leader,
        }


@dataclass
class Project:
    project_id: str
    sdlc_tag: str
    phase: ProjectPhase
    team_ids: set[str]
    priority_threshold: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "project_id": self.project_id,
            "sdlc_tag": self.sdlc_tag,
            "phase": self.phase.value,
            "team_ids": sorted(self.team_ids),
            "priority_threshold": self.priority_threshold,
        }


@dataclass
class DependabilityAttribute:
    name: AttributeName
    weight: float

    def to_dict(self) -> dict:
        return {"name": self.name.value, "weight": self.weight}


@dataclass
class Requirement:
    requirement_id: str
    artifact_id: str
    attributes: list[DependabilityAttribute] = field(default_factory=list)
    priority_score: float = 0.0
    priority_class: PriorityClass = PriorityClass.LOW
    classified: bool = False

    def to_dict(self) -> dict:
        return {
            "requirement_id": self.requirement_id,
            "artifact_id": self.artifact_id,
            "attributes": [a.to_dict() for a in self.attributes],
            "priority_score": self.priority_score,
            "priority_class": self.priority_class.value,
            "classified": self.classified,
        }


class Directory:
    """Registry of sites, teams, agents, projects and requirements."""

    def __init__(self, weights: Optional[dict[str, float]] = None,
                 priority_threshold: float = DEFAULT_PRIORITY_THRESHOLD):
        self.sites: dict[str, Site] = {}
        self.teams: dict[str, Team] = {}
        self.agents: dict[str, ChangeAgent] = {}
        self.projects: dict[str, Project] = {}
        self.requirements: dict[str, Requirement] = {}
        self.weights = dict(DEFAULT_ATTRIBUTE_WEIGHTS)
        if weights:
            self.weights.update(weights)
        self._validate_weights()
        if not 0.0 <= priority_threshold <= 1.0:
            raise ConfigInvalid("priority_threshold must be within [0, 1]", key="priority_threshold")
        self.priority_threshold = priority_threshold

    def _validate_weights(self) -> None:
        for name, weight in self.weights.items():
            if name not in AttributeName.__members__:
                raise ConfigInvalid(f"unknown attribute: {name}", key=f"weights.{name}")
            if not 0.0 <= weight <= 1.0:
                raise ConfigInvalid(f"weight out of range: {name}", key=f"weights.{name}")
        if self.weights["SAFETY"] < max(self.weights.values()):
            raise ConfigInvalid("SAFETY weight must dominate", key="weights.SAFETY")

    # -- registration ---------------------------------------------------------

    def add_site(self, site_id: str, name: str, timezone_offset_minutes: int) -> Site:
        if site_id in self.sites:
            raise DuplicateId(f"site exists: {site_id}")
        if not MIN_TZ_OFFSET <= timezone_offset_minutes <= MAX_TZ_OFFSET:
            raise OutOfRange(f"timezone offset out of range: {timezone_offset_minutes}")
        site = Site(site_id, name, timezone_offset_minutes)
        self.sites[site_id] = site
        return site

    def add_agent(self, agent_id: str, kind: AgentKind | str, display_name: str,
                  team_id: Optional[str] = None) -> ChangeAgent:
        if agent_id in self.agents:
            raise DuplicateId(f"agent exists: {agent_id}")
        kind = AgentKind(kind)
        if team_id is not None and team_id not in self.teams:
            raise UnknownTeam(f"no such team: {team_id}")
        agent = ChangeAgent(agent_id, kind, display_name, team_id)
        self.agents[agent_id] = agent
        if team_id is not None:
            self.teams[team_id].member_ids.add(agent_id)
        return agent

    def add_team(self, team_id: str, site_id: str, leader_id: str, member_ids: set[str]) -> Team:
        if team_id in self.teams:
            raise DuplicateId(f"team exists: {team_id}")
        if site_id not in self.sites:
            raise UnknownSite(f"no such site: {site_id}")
        members = set(member_ids)
        members.add(leader_id)
        for agent_id in members:
            if agent_id not in self.agents:
                raise UnknownAgent(f"no such agent: {agent_id}")
        leader = self.agents[leader_id]
        if leader.kind is AgentKind.TOOL:
            raise ToolCannotLead(f"tool agent cannot lead: {leader_id}")
        team = Team(team_id, site_id, leader_id, members)
        self.teams[team_id] = team
        for agent_id in members:
            self.agents[agent_id].team_id = team_id
        leader.is_team_leader = True
        return team

    def add_project(self, project_id: str, sdlc_tag: str, team_ids: set[str],
                    phase: ProjectPhase | str = ProjectPhase.INITIATING,
                    priority_threshold: Optional[float] = None) -> Project:
        if project_id in self.projects:
            raise DuplicateId(f"project exists: {project_id}")
        for team_id in team_ids:
            if team_id not in self.teams:
                raise UnknownTeam(f"no such team: {team_id}")
            for other in self.projects.values():
                if team_id in other.team_ids:
                    raise ConfigInvalid(
                        f"team {team_id} already belongs to project {other.project_id}",
                        key="projects.team_ids",
                    )
        if priority_threshold is not None and not 0.0 <= priority_threshold <= 1.0:
            raise OutOfRange("priority threshold must be within [0, 1]")
        project = Project(project_id, sdlc_tag, ProjectPhase(phase), set(team_ids), priority_threshold)
        self.projects[project_id] = project
        return project

    def add_requirement(self, requirement_id: str, artifact_id: str) -> Requirement:
        if requirement_id in self.requirements:
            raise DuplicateId(f"requirement exists: {requirement_id}")
        req = Requirement(requirement_id=requirement_id, artifact_id=artifact_id)
        self.requirements[requirement_id] = req
        return req

    # -- leadership -----------------------------------------------------------

    def appoint_leader(self, team_id: str, agent_id: str) -> Team:
        team = self.teams.get(team_id)
        if team is None:
            raise UnknownTeam(f"no such team: {team_id}")
        agent = self.agents.get(agent_id)
        if agent is None:
            raise UnknownAgent(f"no such agent: {agent_id}")
        if agent.kind is AgentKind.TOOL:
            raise ToolCannotLead(f"tool agent cannot lead: {agent_id}")
        if agent_id not in team.member_ids:
            raise NotATeamMember(f"{agent_id} is not a member of {team_id}")
        previous = team.leader_id
        if previous in self.agents:
            self.agents[previous].is_team_leader = False
        team.leader_id = agent_id
        agent.is_team_leader = True
        return team

    def change_managers(self) -> set[str]:
        """The GSD change managers: derived from team leadership, never stored."""
        return {team.leader_id for team in self.teams.values()}

    def is_leader_of(self, agent_id: str, team_id: str) -> bool:
        team = self.teams.get(team_id)
        return team is not None and team.leader_id == agent_id

    def is_any_leader(self, agent_id: str) -> bool:
        return agent_id in self.change_managers()

    def agent_kind(self, agent_id: str) -> Optional[str]:
        agent = self.agents.get(agent_id)
        return agent.kind.value if agent else None

    # -- prioritization ---------------------------------------------------------

    def classify_requirement(self, requirement_id: str, attribute_names: list[str],
                             team_of_artifact=None) -> Requirement:
        req = self.requirements.get(requirement_id)
        if req is None:
            raise UnknownRequirement(f"no such requirement: {requirement_id}")
        if not attribute_names:
            raise EmptyAttributeSet("classification needs at least one attribute")
        attrs = []
        for name in sorted(set(attribute_names)):
            if name not in AttributeName.__members__:
                raise OutOfRange(f"unknown attribute: {name}")
            attrs.append(DependabilityAttribute(AttributeName(name), self.weights[name]))
        req.attributes = attrs
        req.priority_score = max(a.weight for a in attrs)
        req.classified = True
        req.priority_class = self._classify_score(req, team_of_artifact)
        return req

    def effective_threshold(self, requirement: Requirement, team_of_artifact) -> float:
        """Project override if the housing artifact's team is in a project."""
        team_id = team_of_artifact(requirement.artifact_id)
        if team_id is not None:
            for project in self.projects.values():
                if team_id in project.team_ids and project.priority_threshold is not None:
                    return project.priority_threshold
        return self.priority_threshold

    def _classify_score(self, req: Requirement, team_of_artifact=None) -> PriorityClass:
        threshold = (
            self.effective_threshold(req, team_of_artifact)
            if team_of_artifact is not None
            else self.priority_threshold
        )
        return PriorityClass.HIGH if req.priority_score >= threshold else PriorityClass.LOW

    def set_priority_threshold(self, project_id: str, threshold: float, team_of_artifact) -> list[str]:
        """Set a project's threshold; returns requirement ids whose class changed."""
        if not 0.0 <= threshold <= 1.0:
            raise OutOfRange(f"threshold out of range: {threshold}")
        project = self.projects.get(project_id)
        if project is None:
            raise UnknownProject(f"no such project: {project_id}")
        project.priority_threshold = threshold
        return self.rederive_priorities(team_of_artifact)

    def rederive_priorities(self, team_of_artifact) -> list[str]:
        changed = []
        for req in self.requirements.values():
            if not req.classified:
                continue
            new_class = self._classify_score(req, team_of_artifact)
            if new_class is not req.priority_class:
                req.priority_class = new_class
                changed.append(req.requirement_id)
        return sorted(changed)

    def advance_phase(self, project_id: str, target: ProjectPhase | str) -> Project:
        project = self.projects.get(project_id)
        if project is None:
            raise UnknownProject(f"no such project: {project_id}")
        target = ProjectPhase(target)
        if (project.phase, target) not in ALLOWED_PHASE_TRANSITIONS:
            raise IllegalPhaseTransition(f"{project.phase.value} -> {target.value} not allowed")
        project.phase = target
        return project

    def high_requirements(self) -> list[Requirement]:
        return [r for r in self.requirements.values() if r.priority_class is PriorityClass.HIGH]
