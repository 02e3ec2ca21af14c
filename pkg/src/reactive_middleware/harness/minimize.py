"""Shrink a failing script by chunked step removal (ddmin style).

A candidate that aborts on an unresolved symbol is treated as passing:
removing a bind that later steps depend on does not preserve the
failure, so the chunk goes back in.
"""

from __future__ import annotations

from ..errors import ScriptParseError, UnresolvedSymbol
from .runner import run_scenario


def still_fails(script: dict) -> bool:
    try:
        report = run_scenario(script)
    except (ScriptParseError, UnresolvedSymbol):
        return False
    return not report.passed


def minimize_steps(script: dict, fails=still_fails) -> dict:
    steps = list(script["steps"])

    def candidate(kept: list) -> dict:
        trimmed = dict(script)
        trimmed["steps"] = kept
        return trimmed

    chunks = 2
    while len(steps) >= 2:
        size = max(1, len(steps) // chunks)
        removed = False
        index = 0
        while index < len(steps):
            trial = steps[:index] + steps[index + size:]
            if trial and fails(candidate(trial)):
                steps = trial
                removed = True
            else:
                index += size
        if removed:
            chunks = max(chunks - 1, 2)
        elif size == 1:
            break
        else:
            chunks = min(chunks * 2, len(steps))

    return candidate(steps)
