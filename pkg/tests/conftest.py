"""Shared fixtures: a small two-team deployment most suites build on."""

import sys

import pytest

from reactive_middleware.deployment import Deployment, VirtualClock


def two_team_config() -> dict:
    """Two sites, two teams, a shared project; tokens for every agent."""
    agents = [
        {"agent_id": "lead-a", "display_name": "Lead A", "kind": "HUMAN"},
        {"agent_id": "lead-b", "display_name": "Lead B", "kind": "HUMAN"},
        {"agent_id": "dev-1", "display_name": "Dev One", "kind": "HUMAN"},
        {"agent_id": "dev-2", "display_name": "Dev Two", "kind": "HUMAN"},
        {"agent_id": "tool-1", "display_name": "Scanner", "kind": "TOOL"},
        {"agent_id": "outsider", "display_name": "Outsider", "kind": "HUMAN"},
    ]
    return {
        "sites": [
            {"site_id": "site-a", "name": "Site A", "timezone_offset_minutes": 0},
            {"site_id": "site-b", "name": "Site B", "timezone_offset_minutes": 330},
        ],
        "agents": agents,
        "teams": [
            {"team_id": "team-a", "site_id": "site-a", "leader_id": "lead-a",
             "member_ids": ["lead-a", "dev-1", "tool-1"]},
            {"team_id": "team-b", "site_id": "site-b", "leader_id": "lead-b",
             "member_ids": ["lead-b", "dev-2"]},
        ],
        "projects": [
            {"project_id": "proj-1", "sdlc_tag": "mainline",
             "team_ids": ["team-a", "team-b"], "phase": "EXECUTING"},
        ],
        "tokens": {f"tok-{a['agent_id']}": a["agent_id"] for a in agents},
    }


@pytest.fixture
def config() -> dict:
    return two_team_config()


@pytest.fixture
def dep(config) -> Deployment:
    return Deployment(config, clock=VirtualClock())


@pytest.fixture
def artifact(dep) -> str:
    """One CODE artifact owned by team-a, created by its leader."""
    art = dep.create_artifact("lead-a", "CODE", "team-a", b"v1 contents")
    return art.artifact_id


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance verdict lines after the normal test summary."""
    for name, module in list(sys.modules.items()):
        if name.rsplit(".", 1)[-1] != "test_acceptance":
            continue
        lines = getattr(module, "CRITERIA", None)
        if lines:
            terminalreporter.section("acceptance criteria")
            for line in lines:
                terminalreporter.write_line(line)
        return
