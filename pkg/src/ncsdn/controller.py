"""Centralised control plane for the simulated network.

The controller keeps a global view of the topology, computes link-disjoint
multipath routes, decides where coding happens and reacts to link failures.
Southbound interaction is a plain method call: the simulator reads the rule
set back from :meth:`Controller.rules`.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

from .analytic import ScenarioParams
from .rules import FlowRule, canonical, dump_rules
from .simnet.topology import Topology

log = logging.getLogger(__name__)

PRIORITY = {"forward": 10, "recode": 15, "encode": 20, "decode": 20}
SMOOTHING = 0.5


class UnreachableError(RuntimeError):
    pass


def _distances_to(adj_in: dict, sink: str) -> dict:
    dist = {sink: 0}
    queue = deque([sink])
    while queue:
        v = queue.popleft()
        for u in adj_in.get(v, ()):
            if u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    return dist


def _shortest_path(links: set, source: str, sink: str):
    """Fewest hops; among equals the lexicographically smallest node sequence."""
    adj_out: dict = {}
    adj_in: dict = {}
    for a, b in links:
        adj_out.setdefault(a, []).append(b)
        adj_in.setdefault(b, []).append(a)
    dist = _distances_to(adj_in, sink)
    if source not in dist:
        return None
    path = [source]
    v = source
    while v != sink:
        v = min(w for w in adj_out[v] if dist.get(w) == dist[v] - 1)
        path.append(v)
    return tuple(path)


def path_links(path) -> list:
    return list(zip(path[:-1], path[1:]))


def compute_paths(topology: Topology, source: str, sink: str, n: int, dead=()) -> list:
    """Up to ``n`` link-disjoint loop-free paths, shortest first.

    A source with a single live uplink shares that uplink among all paths;
    otherwise no path could ever branch from a single-homed host.
    """
    if source == sink:
        raise ValueError("source and sink must differ")
    if n < 1:
        raise ValueError("n must be >= 1")
    dead = set(dead)
    links = {l.key for l in topology.links if l.key not in dead}
    uplinks = [k for k in links if k[0] == source]
    shared = set(uplinks) if len(uplinks) == 1 else set()
    paths = []
    while len(paths) < n:
        p = _shortest_path(links, source, sink)
        if p is None or p in paths:
            break
        paths.append(p)
        links -= set(path_links(p)) - shared
    if not paths:
        raise UnreachableError(f"no live path from {source} to {sink}")
    return paths


@dataclass
class FlowState:
    flow: str
    source: str
    sinks: tuple
    params: ScenarioParams
    coded: bool
    paths: dict = field(default_factory=dict)    # sink -> [path]
    weights: dict = field(default_factory=dict)  # sink -> [weight per path]
    k: int = 1
    status: str = "active"


def _uncoded_weights(m: int, heaviest: float) -> list:
    if m == 1:
        return [1.0]
    rest = (1.0 - heaviest) / (m - 1)
    return [heaviest] + [rest] * (m - 1)


def _branch_node(paths: list) -> str:
    """End of the common prefix of all paths; the source if they never split."""
    first = paths[0]
    if len(paths) == 1:
        return first[0]
    i = 0
    while all(len(p) > i + 1 and p[i + 1] == first[i + 1] for p in paths):
        i += 1
    return first[i]


class Controller:
    def __init__(self, topology: Topology):
        self.topology = topology
        self.dead: set = set()
        self.flows: dict[str, FlowState] = {}
        self._rules: dict[str, frozenset] = {}
        self.load_stats: dict = {}
        self.warnings: list = []

    # ---- queries -------------------------------------------------------
    def rules(self, flow: str | None = None) -> frozenset:
        if flow is not None:
            return self._rules.get(flow, frozenset())
        out = set()
        for rs in self._rules.values():
            out |= rs
        return frozenset(out)

    def dump(self) -> str:
        return dump_rules(self.rules())

    def path_sets(self, flow: str) -> dict:
        return {s: list(p) for s, p in self.flows[flow].paths.items()}

    def split_node(self, flow: str) -> str:
        fs = self.flows[flow]
        return _branch_node([p for ps in fs.paths.values() for p in ps])

    # ---- installation --------------------------------------------------
    def install_flow(self, flow: str, params: ScenarioParams, coded: bool = True) -> frozenset:
        d = self.topology.demand(flow)
        fs = FlowState(flow, d.source, tuple(d.sinks), params, coded, k=params.k)
        self._route(fs)
        self.flows[flow] = fs
        self._rules[flow] = self._build_rules(fs)
        return self._rules[flow]

    def install_coded_flow(self, flow: str, params: ScenarioParams) -> frozenset:
        return self.install_flow(flow, params, coded=True)

    def _route(self, fs: FlowState) -> None:
        n = fs.params.n
        for s in fs.sinks:
            paths = compute_paths(self.topology, fs.source, s, n, self.dead)
            if fs.coded:
                if len(paths) < fs.k:
                    msg = (f"flow {fs.flow}: {len(paths)} path(s) to {s} for k={fs.k}; "
                           "coded packets multiplexed over available paths")
                    if msg not in self.warnings:
                        self.warnings.append(msg)
                        log.warning(msg)
                w = [1.0 / len(paths)] * len(paths)
            else:
                w = _uncoded_weights(len(paths), fs.params.heaviest_path_fraction)
                keep = [i for i, x in enumerate(w) if x > 0]
                paths = [paths[i] for i in keep]
                w = [w[i] for i in keep]
            fs.paths[s] = paths
            fs.weights[s] = w

    def _build_rules(self, fs: FlowState) -> frozenset:
        rules = set()
        g = fs.params.generation_size
        for s in fs.sinks:
            paths, w = fs.paths[s], fs.weights[s]
            through_node: dict = {}
            through_link: dict = {}
            for p, wp in zip(paths, w):
                for a, b in path_links(p):
                    through_node[a] = through_node.get(a, 0.0) + wp
                    through_link[(a, b)] = through_link.get((a, b), 0.0) + wp
            for (a, b), wl in through_link.items():
                rules.add(FlowRule(a, fs.flow, "forward", sink=s, out_link=(a, b),
                                   weight=wl / through_node[a],
                                   priority=PRIORITY["forward"]))
            rules.add(FlowRule(s, fs.flow, "decode", sink=s, generation_size=g,
                               priority=PRIORITY["decode"]))
        rules = self._normalise_weights(rules)
        if not fs.coded:
            return frozenset(rules)

        all_paths = [p for s in fs.sinks for p in fs.paths[s]]
        enc = _branch_node(all_paths)
        outs = []
        rank = max(len(ps) for ps in fs.paths.values())
        for i in range(rank):
            for s in fs.sinks:
                if i < len(fs.paths[s]):
                    p = fs.paths[s][i]
                    j = p.index(enc)
                    hop = (p[j], p[j + 1])
                    if hop not in outs:
                        outs.append(hop)
        rules.add(FlowRule(enc, fs.flow, "encode", generation_size=g, k=fs.k,
                           field=fs.params.field, out_links=tuple(outs),
                           priority=PRIORITY["encode"]))
        # merge points downstream of the encoder recode instead of forwarding copies
        incoming: dict = {}
        for p in all_paths:
            j = p.index(enc)
            for a, b in path_links(p[j:]):
                incoming.setdefault(b, set()).add((a, b))
        for node, ins in incoming.items():
            if len(ins) > 1 and node not in fs.sinks:
                rules.add(FlowRule(node, fs.flow, "recode", field=fs.params.field,
                                   priority=PRIORITY["recode"]))
        return frozenset(rules)

    @staticmethod
    def _normalise_weights(rules: set) -> set:
        # rounding guard: make each (node, flow, sink) group sum to exactly 1
        groups: dict = {}
        for r in rules:
            if r.action == "forward":
                groups.setdefault((r.node, r.flow, r.sink), []).append(r)
        out = {r for r in rules if r.action != "forward"}
        for grp in groups.values():
            grp.sort(key=lambda r: r.out_link)
            total = sum(r.weight for r in grp[:-1])
            for r in grp[:-1]:
                out.add(r)
            last = grp[-1]
            out.add(FlowRule(last.node, last.flow, "forward", sink=last.sink,
                             out_link=last.out_link, weight=1.0 - total,
                             priority=last.priority))
        return out

    # ---- failures ------------------------------------------------------
    def _packets_per_sink(self, fs: FlowState, outs: tuple, k: int) -> dict:
        enc = _branch_node([p for ps in fs.paths.values() for p in ps])
        received = {}
        for s in fs.sinks:
            live_hops = set()
            for p in fs.paths[s]:
                if any(l in self.dead for l in path_links(p)):
                    continue
                j = p.index(enc)
                live_hops.add((p[j], p[j + 1]))
            received[s] = sum(1 for j in range(k) if outs[j % len(outs)] in live_hops)
        return received

    def handle_link_down(self, link) -> dict:
        """Mark ``link`` dead and repair affected flows.

        Returns ``{flow: (removed_rules, added_rules)}`` for flows whose rules
        changed. Coded flows whose surviving paths still deliver a full
        generation are left untouched.
        """
        key = link.key if hasattr(link, "key") else tuple(link)
        self.topology.link(*key)
        self.dead.add(key)
        updates = {}
        for flow, fs in self.flows.items():
            if fs.status != "active":
                continue
            old = self._rules[flow]
            uses = any(r.out_link == key or key in r.out_links for r in old)
            if not uses:
                continue
            if fs.coded:
                enc_rule = next(r for r in old if r.action == "encode")
                got = self._packets_per_sink(fs, enc_rule.out_links, fs.k)
                g = fs.params.generation_size
                if all(c >= g for c in got.values()):
                    continue
            try:
                self._route(fs)
            except UnreachableError:
                fs.status = "undeliverable"
                self._rules[flow] = frozenset()
                updates[flow] = (old, frozenset())
                log.warning("flow %s undeliverable after %s went down", flow, key)
                continue
            if fs.coded:
                self._raise_redundancy(fs)
            new = self._build_rules(fs)
            self._rules[flow] = new
            updates[flow] = (old - new, new - old)
        return updates

    def _raise_redundancy(self, fs: FlowState) -> None:
        g = fs.params.generation_size
        trial = self._build_rules(fs)
        outs = next(r for r in trial if r.action == "encode").out_links
        k = fs.k
        while min(self._packets_per_sink(fs, outs, k).values()) < g:
            k += 1
            if k > 64 * max(g, 1):
                raise UnreachableError(f"flow {fs.flow}: cannot deliver a full generation")
        fs.k = k

    def handle_link_up(self, link) -> None:
        key = link.key if hasattr(link, "key") else tuple(link)
        self.dead.discard(key)

    # ---- load balancing --------------------------------------------------
    def rebalance(self, flow: str, loads, sink: str | None = None) -> tuple:
        """Move split weights halfway toward uniform given observed path loads."""
        fs = self.flows[flow]
        sink = sink or fs.sinks[0]
        cur = fs.weights[sink]
        m = len(cur)
        if m == 1:
            return tuple(cur)
        loads = list(loads)
        if len(loads) != m:
            raise ValueError(f"{len(loads)} load samples for {m} paths")
        self.load_stats[(flow, sink)] = tuple(loads)
        total = float(sum(loads))
        observed = [x / total for x in loads] if total > 0 else list(cur)
        target = 1.0 / m
        new = [o + SMOOTHING * (target - o) for o in observed]
        s = sum(new)
        new = [x / s for x in new]
        fs.weights[sink] = new
        self._rules[flow] = self._build_rules(fs)
        return tuple(new)


def rule_lines(rules) -> list:
    return [r.line() for r in canonical(rules)]
