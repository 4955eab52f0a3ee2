"""Convergence instrumentation.

A trace is an append-only sequence of per-microstep events; it serializes
to JSON-lines with one object per event.  `res_l2` carries the most recent
exactly-computed residual norm (refreshed at sweep boundaries; recomputing
it at every microstep would break the linear-in-d sweep cost).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

SCHEMA_VERSION = 1

#: event phases: a local solve, a rank truncation, a basis enrichment, or
#: the summary event closing a sweep
PHASES = ("solve", "truncate", "enrich", "sweep_end")


@dataclass
class TraceEvent:
    sweep: int
    microstep: int
    k: int
    J: float
    res_l2: float
    ranks: list[int]
    t_wall_s: float
    phase: str = "solve"
    err_A: float | None = None
    omega: float | None = None

    def to_json(self) -> str:
        doc = {"schema": SCHEMA_VERSION}
        doc.update(asdict(self))
        return json.dumps(doc)

    @staticmethod
    def from_json(line: str) -> "TraceEvent":
        doc = json.loads(line)
        doc.pop("schema", None)
        return TraceEvent(**doc)


@dataclass
class ConvergenceTrace:
    events: list[TraceEvent] = field(default_factory=list)

    def append(self, event: TraceEvent):
        self.events.append(event)

    def extend(self, events):
        self.events.extend(events)

    def __len__(self):
        return len(self.events)

    def sweep_end_events(self):
        return [e for e in self.events if e.phase == "sweep_end"]

    def write_jsonl(self, path):
        with open(path, "w") as f:
            for e in self.events:
                f.write(e.to_json() + "\n")

    @staticmethod
    def read_jsonl(path) -> "ConvergenceTrace":
        with open(path) as f:
            events = [TraceEvent.from_json(line) for line in f if line.strip()]
        return ConvergenceTrace(events=events)
