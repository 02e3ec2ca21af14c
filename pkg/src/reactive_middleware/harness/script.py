"""Scenario scripts: a JSON document of steps over one deployment.

A step names an operation plus its parameters. String values starting
with `$` are symbols: a step with `"bind": "$x"` captures the id the
engine assigned, and later steps reference it as `"$x"`. Config-level
ids (teams, agents) are literal strings.
"""

from __future__ import annotations

import json
import os
from typing import Union

from ..errors import ScriptParseError, UnresolvedSymbol

# op -> (required params, optional params)
OPS: dict[str, tuple[set, set]] = {
    "add_site": ({"name"}, {"site_id", "timezone_offset_minutes", "actor"}),
    "register_agent": ({"display_name"}, {"agent_id", "kind", "team", "actor"}),
    "register_team": ({"site", "leader"}, {"team_id", "members", "actor"}),
    "register_project": ({"teams"}, {"project_id", "sdlc_tag", "phase",
                                     "priority_threshold", "actor"}),
    "register_requirement": ({"artifact"}, {"requirement_id", "actor"}),
    "classify_requirement": ({"requirement", "attributes"}, {"actor"}),
    "set_priority_threshold": ({"project", "threshold"}, {"actor"}),
    "appoint_leader": ({"team", "agent"}, {"actor"}),
    "advance_phase": ({"project", "phase"}, {"actor"}),
    "assign_privilege": ({"leader", "agent", "scope", "privilege"}, set()),
    "create_artifact": ({"actor", "kind", "team", "content"},
                        {"media_type", "artifact_id"}),
    "commit_version": ({"actor", "artifact", "content"}, set()),
    "delete_artifact": ({"actor", "artifact"}, set()),
    "recall_artifact": ({"actor", "artifact"}, set()),
    "link": ({"actor", "from", "to", "type"}, set()),
    "unlink": ({"actor", "link"}, set()),
    "subscribe": ({"agent", "artifact"}, {"closure"}),
    "unsubscribe": ({"subscription"}, set()),
    "ack_all": ({"agent"}, set()),
    "submit_cr": ({"actor", "artifact", "content"}, {"rationale"}),
    "route_cr": ({"cr"}, set()),
    "cast_vote": ({"actor", "cr", "vote"}, set()),
    "close_review": ({"cr"}, set()),
    "apply_cr": ({"cr"}, set()),
    "reactivate_cr": ({"actor", "cr"}, set()),
    "watch": ({"artifact"}, {"external_path", "tool", "actor"}),
    "unwatch": ({"artifact"}, {"actor"}),
    "poll_ams": (set(), set()),
    "scan_external": (set(), set()),
    "advance_clock": ({"seconds"}, set()),
}

META_KEYS = {"op", "bind", "expect_error", "comment"}

KNOWN_CHECKS = {
    "h1", "h2", "routing", "chain", "log_head", "cr_state", "artifact_head",
    "artifact_state", "priority", "impact", "provenance_length",
    "pending_count", "notified",
}


def load_script(source: Union[str, dict]) -> dict:
    """Accepts a dict, a path to a JSON file, or a JSON string."""
    if isinstance(source, dict):
        script = source
    elif isinstance(source, str) and os.path.exists(source):
        with open(source, encoding="utf-8") as fh:
            try:
                script = json.load(fh)
            except json.JSONDecodeError as err:
                raise ScriptParseError(f"{source}: not valid JSON: {err}") from err
    elif isinstance(source, str):
        try:
            script = json.loads(source)
        except json.JSONDecodeError as err:
            raise ScriptParseError(f"not valid JSON: {err}") from err
    else:
        raise ScriptParseError(f"cannot load a script from {type(source).__name__}")
    return validate_script(script)


def validate_script(script: dict) -> dict:
    if not isinstance(script, dict):
        raise ScriptParseError("script must be a JSON object")
    steps = script.get("steps")
    if not isinstance(steps, list):
        raise ScriptParseError("script needs a 'steps' list")
    seed = script.get("seed", 0)
    if not isinstance(seed, int):
        raise ScriptParseError("'seed' must be an integer")
    if not isinstance(script.get("config", {}), dict):
        raise ScriptParseError("'config' must be an object")
    bound: set[str] = set()
    for index, step in enumerate(steps):
        where = f"step {index}"
        if not isinstance(step, dict):
            raise ScriptParseError(f"{where}: steps must be objects")
        op = step.get("op")
        if op not in OPS:
            raise ScriptParseError(f"{where}: unknown op: {op!r}")
        required, optional = OPS[op]
        missing = required - step.keys()
        if missing:
            raise ScriptParseError(f"{where} ({op}): missing {sorted(missing)}")
        stray = step.keys() - required - optional - META_KEYS
        if stray:
            raise ScriptParseError(f"{where} ({op}): unknown keys {sorted(stray)}")
        bind = step.get("bind")
        if bind is not None:
            if not (isinstance(bind, str) and bind.startswith("$")):
                raise ScriptParseError(f"{where}: bind must be a '$'-prefixed string")
            if bind in bound:
                raise ScriptParseError(f"{where}: symbol {bind} bound twice")
            bound.add(bind)
        expect = step.get("expect_error")
        if expect is not None and not isinstance(expect, str):
            raise ScriptParseError(f"{where}: expect_error must be an error code string")
    expectations = script.get("expectations", [])
    if not isinstance(expectations, list):
        raise ScriptParseError("'expectations' must be a list")
    for index, exp in enumerate(expectations):
        if isinstance(exp, str):
            continue  # shorthand for {"check": exp}
        if not isinstance(exp, dict) or "check" not in exp:
            raise ScriptParseError(f"expectation {index}: needs a 'check' field")
        if exp["check"] not in KNOWN_CHECKS:
            raise ScriptParseError(f"expectation {index}: unknown check {exp['check']!r}")
    return script


def resolve(value, symbols: dict):
    """Replace $symbols recursively; unknown ones are an error."""
    if isinstance(value, str) and value.startswith("$"):
        if value not in symbols:
            raise UnresolvedSymbol(f"symbol {value} is not bound", symbol=value)
        return symbols[value]
    if isinstance(value, list):
        return [resolve(v, symbols) for v in value]
    if isinstance(value, dict):
        return {k: resolve(v, symbols) for k, v in value.items()}
    return value


def normalize_expectations(script: dict) -> list[dict]:
    out = []
    for exp in script.get("expectations", []):
        out.append({"check": exp} if isinstance(exp, str) else dict(exp))
    return out
