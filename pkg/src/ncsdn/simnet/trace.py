"""Immutable record of one simulation run."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

STATUSES = ("delivered", "lost", "failed")


@dataclass(frozen=True)
class UnitRecord:
    """Fate of one source packet at one sink."""

    flow: str
    sink: str
    generation: int
    index: int
    send_time: float
    deliver_time: float | None
    status: str
    path: tuple = ()

    @property
    def latency(self) -> float | None:
        if self.deliver_time is None:
            return None
        return self.deliver_time - self.send_time


@dataclass(frozen=True)
class LinkCounters:
    sent: int = 0
    delivered: int = 0
    dropped_loss: int = 0
    dropped_failure: int = 0

    @property
    def dropped(self) -> int:
        return self.dropped_loss + self.dropped_failure

    @property
    def in_flight(self) -> int:
        return self.sent - self.delivered - self.dropped


@dataclass(frozen=True)
class Trace:
    records: tuple = ()
    links: dict = field(default_factory=dict)
    path_loads: tuple = ()          # ((link key), transmissions) at the split node
    duration: float = 0.0
    events: int = 0
    decode_errors: int = 0
    link_generation_counts: dict = field(default_factory=dict)
    inbox: dict = field(default_factory=dict)

    @property
    def sent(self) -> int:
        return len(self.records)

    @property
    def delivered(self) -> int:
        return sum(1 for r in self.records if r.status == "delivered")

    def conserved(self) -> bool:
        return all(c.in_flight == 0 for c in self.links.values())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["flow", "sink", "generation", "index", "send_time", "deliver_time",
                    "status", "path"])
        for r in self.records:
            w.writerow([r.flow, r.sink, r.generation, r.index, f"{r.send_time:.9f}",
                        "" if r.deliver_time is None else f"{r.deliver_time:.9f}",
                        r.status, "-".join(r.path)])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())
