"""Clock abstraction so scenarios can drive time deterministically."""

from __future__ import annotations

import time


class SystemClock:
    """Wall clock, integer epoch seconds."""

    def now(self) -> int:
        return int(time.time())


class VirtualClock:
    """Manually advanced clock for deterministic runs."""

    def __init__(self, start: int = 1_600_000_000):
        self._now = int(start)

    def now(self) -> int:
        return self._now

    def advance(self, seconds: int) -> int:
        if seconds < 0:
            raise ValueError("clock only moves forward")
        self._now += int(seconds)
        return self._now
