"""Per-task trace assembly.

Branches record into their own TraceRecorder instances and the pipeline
merges them in a fixed order (visual before textual), so concurrent execution
never changes the recorded trace.
"""

from __future__ import annotations

import time

from .core.types import ToolCall, ToolKind


class TraceRecorder:
    def __init__(self) -> None:
        self.tool_calls: list[ToolCall] = []
        self.notes: list[str] = []

    def add(self, kind: ToolKind, input_digest: str, cache_hit: bool = False,
            duration_ms: float = 0.0) -> None:
        self.tool_calls.append(ToolCall(kind=kind, input_digest=input_digest,
                                        cache_hit=cache_hit, duration_ms=duration_ms))

    def note(self, text: str) -> None:
        self.notes.append(text)

    def extend(self, other: "TraceRecorder") -> None:
        self.tool_calls.extend(other.tool_calls)
        self.notes.extend(other.notes)


class Stopwatch:
    """Milliseconds since construction or the last lap() call."""

    def __init__(self) -> None:
        self._mark = time.perf_counter()

    def lap(self) -> float:
        now = time.perf_counter()
        elapsed = (now - self._mark) * 1000.0
        self._mark = now
        return elapsed


__all__ = ["Stopwatch", "TraceRecorder"]
