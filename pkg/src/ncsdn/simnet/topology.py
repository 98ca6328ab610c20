"""Directed network graphs with lossy, delayed links."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

PROPAGATION_KM_PER_S = 200_000.0
ROLES = ("host", "switch")


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Link:
    src: str
    dst: str
    capacity: float = 100_000.0
    loss_prob: float = 0.0
    distance_km: float = 0.0
    transmit_slots_per_round: int = 1

    def __post_init__(self):
        if self.src == self.dst:
            raise TopologyError(f"self-loop on {self.src}")
        if self.capacity <= 0:
            raise TopologyError(f"link {self.key}: capacity must be > 0")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise TopologyError(f"link {self.key}: loss_prob must be in [0, 1]")
        if self.distance_km < 0:
            raise TopologyError(f"link {self.key}: distance_km must be >= 0")
        if self.transmit_slots_per_round < 1:
            raise TopologyError(f"link {self.key}: transmit_slots_per_round must be >= 1")

    @property
    def key(self) -> tuple:
        return (self.src, self.dst)

    @property
    def delay(self) -> float:
        """Transmission plus propagation time for one packet."""
        return 1.0 / self.capacity + self.distance_km / PROPAGATION_KM_PER_S


@dataclass(frozen=True)
class Demand:
    source: str
    sinks: tuple
    flow: str


@dataclass
class Topology:
    nodes: dict = field(default_factory=dict)  # id -> role
    links: list = field(default_factory=list)
    demands: list = field(default_factory=list)

    def __post_init__(self):
        self._index = {}
        for link in self.links:
            self._index[link.key] = link
        self.validate()

    def validate(self) -> None:
        for node, role in self.nodes.items():
            if role not in ROLES:
                raise TopologyError(f"node {node}: unknown role {role!r}")
        seen = set()
        for link in self.links:
            for end in link.key:
                if end not in self.nodes:
                    raise TopologyError(f"link {link.key} references unknown node {end}")
            if link.key in seen:
                raise TopologyError(f"duplicate link {link.key}")
            seen.add(link.key)
        for d in self.demands:
            for node in (d.source, *d.sinks):
                if node not in self.nodes:
                    raise TopologyError(f"demand {d.flow} references unknown node {node}")
            if d.source in d.sinks:
                raise TopologyError(f"demand {d.flow}: source is also a sink")

    def link(self, src: str, dst: str) -> Link:
        try:
            return self._index[(src, dst)]
        except KeyError:
            raise TopologyError(f"no link {src}->{dst}") from None

    def out_links(self, node: str) -> list:
        return [l for l in self.links if l.src == node]

    def in_links(self, node: str) -> list:
        return [l for l in self.links if l.dst == node]

    def demand(self, flow: str) -> Demand:
        for d in self.demands:
            if d.flow == flow:
                return d
        raise TopologyError(f"unknown flow {flow!r}")

    def with_links(self, links) -> "Topology":
        return Topology(dict(self.nodes), list(links), list(self.demands))

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n, "role": r} for n, r in self.nodes.items()],
            "links": [asdict(l) for l in self.links],
            "demands": [{"source": d.source, "sinks": list(d.sinks), "flow": d.flow}
                        for d in self.demands],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Topology":
        try:
            raw = data["nodes"]
            if isinstance(raw, dict):  # shorthand: {"id": "role"}
                nodes = dict(raw)
            else:
                nodes = {n["id"]: n.get("role", "switch") for n in raw}
            links = [Link(**l) for l in data["links"]]
            demands = [Demand(d["source"], tuple(d["sinks"]), d["flow"])
                       for d in data.get("demands", [])]
        except (KeyError, TypeError) as exc:
            raise TopologyError(f"malformed topology description: {exc}") from exc
        return cls(nodes, links, demands)


def load_topology(path) -> Topology:
    path = Path(path)
    if not path.exists():
        raise TopologyError(f"topology file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise TopologyError(f"{path}: invalid JSON: {exc}") from exc
    return Topology.from_dict(data)


def build_butterfly(capacity: float = 100_000.0) -> Topology:
    """Six-node butterfly: A feeds T1, which reaches B2 and C2 directly and
    through the single T1->T2->G bottleneck."""
    nodes = {"A": "host", "T1": "switch", "T2": "switch", "G": "switch",
             "B2": "host", "C2": "host"}
    links = [
        Link("A", "T1", capacity),
        Link("T1", "B2", capacity),
        Link("T1", "C2", capacity),
        Link("T1", "T2", capacity),
        Link("T2", "G", capacity),
        Link("G", "B2", capacity),
        Link("G", "C2", capacity),
    ]
    return Topology(nodes, links, [Demand("A", ("B2", "C2"), "mcast")])


def build_parallel_paths(n: int = 2, p_loss: float = 0.0, distance_km: float = 0.0,
                         capacity: float = 100_000.0) -> Topology:
    """``S -> Pi -> D`` for i in 1..n. Loss sits on each last hop only, so the
    end-to-end loss of every path equals ``p_loss``."""
    if n < 1:
        raise TopologyError("need at least one path")
    nodes = {"S": "host", "D": "host"}
    links = []
    for i in range(1, n + 1):
        mid = f"P{i}"
        nodes[mid] = "switch"
        links.append(Link("S", mid, capacity, 0.0, distance_km))
        links.append(Link(mid, "D", capacity, p_loss, distance_km))
    return Topology(nodes, links, [Demand("S", ("D",), "f1")])


def build_two_path(p_loss: float = 0.0, distance_km: float = 0.0,
                   capacity: float = 100_000.0) -> Topology:
    return build_parallel_paths(2, p_loss, distance_km, capacity)


def build_chain(length: int = 3, capacity: float = 100_000.0) -> Topology:
    nodes = {f"N{i}": "switch" for i in range(length)}
    nodes["N0"] = "host"
    nodes[f"N{length - 1}"] = "host"
    links = [Link(f"N{i}", f"N{i + 1}", capacity) for i in range(length - 1)]
    return Topology(nodes, links, [Demand("N0", (f"N{length - 1}",), "f1")])
