"""Scenario harness: scripted and generated end-to-end runs with
independent verdicts for notification completeness (H1) and
recorded-history completeness (H2)."""

from .checks import (
    Verdict,
    check_h1,
    check_h2,
    check_routing,
    impact_oracle,
    log_signature,
)
from .runner import ScenarioReport, run_scenario
from .script import ScriptParseError, UnresolvedSymbol, load_script, validate_script

__all__ = [
    "Verdict",
    "check_h1",
    "check_h2",
    "check_routing",
    "impact_oracle",
    "log_signature",
    "ScenarioReport",
    "run_scenario",
    "ScriptParseError",
    "UnresolvedSymbol",
    "load_script",
    "validate_script",
]
