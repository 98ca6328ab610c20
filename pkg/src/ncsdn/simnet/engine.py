"""Seeded discrete-event packet simulator.

One :func:`run` owns all its state: an event heap ordered by
``(time, insertion sequence)``, per-entity random streams, the compiled rule
tables and the counters that end up in the :class:`Trace`.

Coding happens where the rules say so. A node holding an ``encode`` rule
collects the raw packets of a generation and emits ``k`` packets
systematic-first, round-robin over its listed out-links. Sinks holding a
``decode`` rule run an incremental Gaussian-elimination decoder; a generation
is delivered when the decoder reaches full rank. Without an encode rule the
flow is plain forwarding and sinks reassemble packets by index.
"""

from __future__ import annotations

import heapq
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .. import codec
from ..analytic import ScenarioParams
from ..rng import Streams, stream
from .topology import Link, Topology
from .trace import LinkCounters, Trace, UnitRecord

ARRIVAL = "arrival"
LINK_DELIVERY = "link_delivery"
LINK_DROP = "link_drop"
NODE_PROCESS = "node_process"
FAILURE_TOGGLE = "failure_toggle"
CONTROL = "control"
RETRANSMIT = "retransmit"


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    link: tuple = ()
    packet: object = None
    reason: str = ""
    up: bool = True


class Packet:
    __slots__ = ("flow", "gen", "gen_size", "index", "coded", "payload", "sinks",
                 "attempt", "emit_time", "hops")

    def __init__(self, flow, gen, gen_size, index, coded, payload, sinks, attempt=0,
                 emit_time=0.0, hops=()):
        self.flow = flow
        self.gen = gen
        self.gen_size = gen_size
        self.index = index      # -1 for coded packets
        self.coded = coded      # CodedPacket or None
        self.payload = payload
        self.sinks = sinks
        self.attempt = attempt
        self.emit_time = emit_time
        self.hops = hops

    def copy_for(self, sinks):
        return Packet(self.flow, self.gen, self.gen_size, self.index, self.coded,
                      self.payload, sinks, self.attempt, self.emit_time, self.hops)


def generate_traffic(lam: float, duration: float, mode: str = "deterministic",
                     rng=None) -> list:
    """Arrival times in ``[0, duration)`` for a source of rate ``lam``."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if duration < 0:
        raise ValueError("duration must be >= 0")
    if lam == 0 or duration == 0:
        return []
    if mode == "deterministic":
        count = int(math.floor(lam * duration + 1e-9))
        return [i / lam for i in range(count)]
    if mode == "poisson":
        if rng is None:
            raise ValueError("poisson traffic needs a random stream")
        times = []
        t = rng.expovariate(lam)
        while t < duration:
            times.append(t)
            t += rng.expovariate(lam)
        return times
    raise ValueError(f"unknown traffic mode {mode!r}; expected 'deterministic' or 'poisson'")


def link_transmit(link: Link, packet, now: float, rng, up: bool = True) -> Event:
    """Outcome of putting ``packet`` on ``link`` at ``now``."""
    t = now + link.delay
    if not up:
        return Event(t, LINK_DROP, link.key, packet, "failure")
    if link.loss_prob > 0.0 and rng.random() < link.loss_prob:
        return Event(t, LINK_DROP, link.key, packet, "loss")
    return Event(t, LINK_DELIVERY, link.key, packet)


def inject_failures(topology: Topology, p_failure: float, seed: int, paths) -> list:
    """Independently take each designated path down for the whole run.

    A downed path loses the links no other designated path uses; shared
    links (a common feeder) stay up so path outcomes remain independent.
    """
    if not 0.0 <= p_failure <= 1.0:
        raise ValueError("p_failure must be in [0, 1]")
    paths = [tuple(p) for p in paths]
    usage = defaultdict(int)
    for p in paths:
        for key in set(zip(p[:-1], p[1:])):
            topology.link(*key)
            usage[key] += 1
    rng = stream(seed, "failures")
    down = []
    for p in paths:
        hit = rng.random() < p_failure
        if not hit:
            continue
        keys = list(zip(p[:-1], p[1:]))
        own = [k for k in keys if usage[k] == 1] or keys
        for k in own:
            if k not in down:
                down.append(k)
    return [Event(0.0, FAILURE_TOGGLE, k, up=False) for k in down]


class _Selector:
    """Smooth weighted round-robin over out-links, rotated per sink so that
    equal-weight sinks start on different links."""

    __slots__ = ("links", "weights", "credit", "order")

    def __init__(self, links, weights, rotation):
        self.links = links
        self.weights = weights
        self.credit = [0.0] * len(links)
        m = len(links)
        self.order = [(rotation + i) % m for i in range(m)]

    def next(self) -> Link:
        if len(self.links) == 1:
            return self.links[0]
        credit = self.credit
        for i, w in enumerate(self.weights):
            credit[i] += w
        best = self.order[0]
        for i in self.order[1:]:
            if credit[i] > credit[best] + 1e-12:
                best = i
        credit[best] -= 1.0
        return self.links[best]


class Simulation:
    def __init__(self, topology: Topology, params: ScenarioParams, rules, seed: int, *,
                 duration: float = 1.0, traffic: str = "deterministic", failures=(),
                 controller=None, capture: bool = False, on_event=None):
        if duration < 0:
            raise ValueError("duration must be >= 0")
        self.topology = topology
        self.params = params
        self.seed = seed
        self.duration = duration
        self.traffic = traffic
        self.capture = capture
        self.on_event = on_event
        self.controller = controller
        self.initial_failures = list(failures)
        self.streams = Streams(seed)
        self.heap = []
        self.seq = 0
        self.now = 0.0
        self.events = 0
        self.up = {l.key: True for l in topology.links}
        self.counters = {l.key: [0, 0, 0, 0] for l in topology.links}
        self.gen_counts = defaultdict(lambda: defaultdict(int))
        self.units = {}
        self.failed_gens = set()
        self.decoders = {}
        self.enc_buffers = defaultdict(list)
        self.recode_buffers = defaultdict(list)
        self.inbox = defaultdict(list)
        self.sources = {}
        self.decode_errors = 0
        self.path_loads = {}
        self.delay_role = {"host": 0.0, "switch": params.l_processing}
        self._compile(rules)

    # ---- rule tables -----------------------------------------------------
    def _compile(self, rules) -> None:
        rules = list(rules)
        fwd = defaultdict(list)
        self.encode = {}
        self.recode_at = {}
        self.decode = {}
        for r in rules:
            if r.action == "forward":
                fwd[(r.node, r.flow, r.sink)].append(r)
            elif r.action == "encode":
                self.encode[(r.node, r.flow)] = r
            elif r.action == "recode":
                self.recode_at[(r.node, r.flow)] = r.field or "gf256"
            elif r.action == "decode":
                self.decode[(r.node, r.flow)] = r
        old = getattr(self, "fwd", {})
        self.fwd = {}
        sink_rank = {}
        for d in self.topology.demands:
            for i, s in enumerate(d.sinks):
                sink_rank[(d.flow, s)] = i
        for key, rs in fwd.items():
            rs = sorted(rs, key=lambda r: r.out_link)
            links = [self.topology.link(*r.out_link) for r in rs]
            weights = [r.weight for r in rs]
            prev = old.get(key)
            if prev is not None and [l.key for l in prev.links] == [l.key for l in links]:
                prev.weights = weights
                self.fwd[key] = prev
            else:
                self.fwd[key] = _Selector(links, weights, sink_rank.get((key[1], key[2]), 0))
        # sinks reachable through each encoder out-link
        self.enc_targets = {}
        for (node, flow), r in self.encode.items():
            targets = []
            for out in r.out_links:
                sinks = tuple(s for (n, f, s), sel in sorted(self.fwd.items())
                              if n == node and f == flow
                              and any(l.key == out for l in sel.links))
                targets.append((self.topology.link(*out), sinks))
            self.enc_targets[(node, flow)] = targets
        self.coded_flows = {f for (_, f) in self.encode}
        self.split = {}
        for d in self.topology.demands:
            self.split[d.flow] = self._split_node(d)

    def _split_node(self, demand) -> str:
        for (node, flow) in self.encode:
            if flow == demand.flow:
                return node
        seen = set()
        frontier = [demand.source]
        while frontier:
            v = frontier.pop(0)
            if v in seen:
                continue
            seen.add(v)
            outs = set()
            for s in demand.sinks:
                sel = self.fwd.get((v, demand.flow, s))
                if sel is not None:
                    outs.update(l.key for l in sel.links)
            if len(outs) > 1:
                return v
            frontier.extend(b for _, b in sorted(outs))
        return demand.source

    def _check_coverage(self) -> None:
        for d in self.topology.demands:
            if d.flow not in {f for (_, f) in self.decode}:
                raise ConfigurationError(f"flow {d.flow}: no rules installed")
            for s in d.sinks:
                if (s, d.flow) not in self.decode:
                    raise ConfigurationError(f"flow {d.flow}: no decode rule at sink {s}")
                if (d.source, d.flow) not in self.encode and (d.source, d.flow, s) not in self.fwd:
                    raise ConfigurationError(
                        f"flow {d.flow}: no forward rule at {d.source} toward {s}")

    # ---- event plumbing --------------------------------------------------
    def schedule(self, time, kind, a=None, b=None) -> None:
        self.seq += 1
        heapq.heappush(self.heap, (time, self.seq, kind, a, b))

    def run(self) -> Trace:
        self._check_coverage()
        g = self.params.generation_size
        for ev in self.initial_failures:
            self.schedule(ev.time, FAILURE_TOGGLE, ev.link, ev.up)
        for d in self.topology.demands:
            times = generate_traffic(self.params.lam, self.duration, self.traffic,
                                     self.streams[f"traffic:{d.flow}"])
            total = len(times)
            for i, t in enumerate(times):
                gen = i // g
                self.schedule(t, ARRIVAL, d, (i, gen, min(g, total - gen * g)))
        heap = self.heap
        pop = heapq.heappop
        while heap:
            t, _, kind, a, b = pop(heap)
            self.now = t
            self.events += 1
            if kind == LINK_DELIVERY:
                self._on_delivery(t, a, b)
            elif kind == NODE_PROCESS:
                self._process(a, b, t)
            elif kind == LINK_DROP:
                self._on_drop(t, a, b)
            elif kind == ARRIVAL:
                self._on_arrival(t, a, b)
            elif kind == RETRANSMIT:
                self._forward(a, b, t)
            elif kind == FAILURE_TOGGLE:
                self._on_toggle(t, a, b)
            elif kind == CONTROL:
                self._on_control(a)
            if self.on_event is not None:
                self.on_event(self, kind)
        return self._trace()

    # ---- handlers ----------------------------------------------------------
    def _on_arrival(self, t, demand, info) -> None:
        i, gen, gen_size = info
        index = i % self.params.generation_size
        payload = np.frombuffer(
            self.streams[f"payload:{demand.flow}"].randbytes(self.params.symbol_size),
            dtype=np.uint8)
        if self.capture:
            self.sources[(demand.flow, gen, index)] = payload
        for s in demand.sinks:
            self.units[(demand.flow, s, gen, index)] = [t, None, False, ()]
        pkt = Packet(demand.flow, gen, gen_size, index, None, payload, tuple(demand.sinks),
                     emit_time=t, hops=(demand.source,))
        self.schedule(t + self.params.l_request, NODE_PROCESS, demand.source, pkt)

    def _on_delivery(self, t, key, pkt) -> None:
        self.counters[key][1] += 1
        node = key[1]
        pkt.hops = pkt.hops + (node,)
        role = self.topology.nodes[node]
        delay = self.params.l_response if node in pkt.sinks else self.delay_role[role]
        if delay > 0:
            self.schedule(t + delay, NODE_PROCESS, node, pkt)
        else:
            self._process(node, pkt, t)

    def _on_drop(self, t, key, info) -> None:
        pkt, reason = info
        c = self.counters[key]
        coded_flow = pkt.flow in self.coded_flows
        if reason == "failure":
            c[3] += 1
            for s in pkt.sinks:
                if coded_flow:
                    self.failed_gens.add((pkt.flow, s, pkt.gen))
                else:
                    u = self.units.get((pkt.flow, s, pkt.gen, pkt.index))
                    if u is not None:
                        u[2] = True
        else:
            c[2] += 1
        if not coded_flow and pkt.attempt < self.params.retransmit_limit:
            rtt = 2.0 * (t - pkt.emit_time)
            source = self.topology.demand(pkt.flow).source
            again = Packet(pkt.flow, pkt.gen, pkt.gen_size, pkt.index, None, pkt.payload,
                           pkt.sinks, pkt.attempt + 1, pkt.emit_time + rtt, (source,))
            self.schedule(pkt.emit_time + rtt, RETRANSMIT, source, again)

    def _on_toggle(self, t, key, up) -> None:
        self.up[key] = up
        if not up and self.controller is not None \
                and self.params.failure_detection_delay is not None:
            self.schedule(t + self.params.failure_detection_delay, CONTROL, key)

    def _on_control(self, key) -> None:
        updates = self.controller.handle_link_down(key)
        if updates:
            self._compile(self.controller.rules())

    # ---- node behaviour ----------------------------------------------------
    def _process(self, node, pkt, t) -> None:
        sinks = pkt.sinks
        if node in sinks:
            self._deliver(node, pkt, t)
            sinks = tuple(s for s in sinks if s != node)
            if not sinks:
                return
            pkt = pkt.copy_for(sinks)
        key = (node, pkt.flow)
        if pkt.coded is None and key in self.encode:
            self._encode(node, pkt, t)
            return
        if pkt.coded is not None and key in self.recode_at:
            pkt = self._recode(node, pkt)
        self._forward(node, pkt, t)

    def _forward(self, node, pkt, t) -> None:
        groups = {}
        for s in pkt.sinks:
            sel = self.fwd.get((node, pkt.flow, s))
            if sel is None:
                continue
            link = sel.next()
            groups.setdefault(link, []).append(s)
        split = self.split.get(pkt.flow) == node
        for link, ss in groups.items():
            out = pkt if len(groups) == 1 and len(ss) == len(pkt.sinks) else pkt.copy_for(tuple(ss))
            if split:
                self.path_loads[link.key] = self.path_loads.get(link.key, 0) + 1
            self._transmit(link, out, t)

    def _transmit(self, link, pkt, t) -> None:
        key = link.key
        self.counters[key][0] += 1
        if self.capture:
            self.gen_counts[key][(pkt.flow, pkt.gen)] += 1
        ev = link_transmit(link, pkt, t, self.streams[f"link:{key[0]}->{key[1]}"], self.up[key])
        if ev.kind == LINK_DROP:
            self.schedule(ev.time, LINK_DROP, key, (pkt, ev.reason))
        else:
            self.schedule(ev.time, LINK_DELIVERY, key, pkt)

    def _encode(self, node, pkt, t) -> None:
        bkey = (node, pkt.flow, pkt.gen)
        buf = self.enc_buffers[bkey]
        buf.append(pkt)
        if len(buf) < pkt.gen_size:
            return
        del self.enc_buffers[bkey]
        rule = self.encode[(node, pkt.flow)]
        sources = [codec.SourcePacket(pkt.gen, p.index, p.payload) for p in buf]
        enc = codec.GenerationEncoder(sources, self.streams[f"encode:{node}:{pkt.flow}"],
                                      rule.field or "gf256")
        targets = self.enc_targets[(node, pkt.flow)]
        t_emit = t + self.params.l_coding / 2.0
        for j in range(rule.k):
            cp = enc.next_packet()
            link, sinks = targets[j % len(targets)]
            sinks = tuple(s for s in sinks if s in pkt.sinks) if pkt.sinks else sinks
            if not sinks:
                continue
            out = Packet(pkt.flow, pkt.gen, pkt.gen_size, -1, cp, cp.payload, sinks,
                         emit_time=t_emit, hops=pkt.hops)
            self.path_loads[link.key] = self.path_loads.get(link.key, 0) + 1
            self._transmit(link, out, t_emit)

    def _recode(self, node, pkt):
        buf = self.recode_buffers[(node, pkt.flow, pkt.gen)]
        buf.append(pkt.coded)
        rng = self.streams[f"recode:{node}:{pkt.flow}"]
        field = self.recode_at[(node, pkt.flow)]
        weights = [codec.random_coefficient(rng, field) for _ in buf]
        cp = codec.recode(buf, weights)
        return Packet(pkt.flow, pkt.gen, pkt.gen_size, -1, cp, cp.payload, pkt.sinks,
                      pkt.attempt, pkt.emit_time, pkt.hops)

    def _deliver(self, sink, pkt, t) -> None:
        flow = pkt.flow
        if self.capture:
            vec = pkt.coded.vector if pkt.coded is not None else codec.unit_vector(
                pkt.index, pkt.gen_size)
            self.inbox[(sink, flow, pkt.gen)].append(
                (vec, bytes(pkt.payload)))
        if pkt.coded is None:
            if flow in self.coded_flows:
                # raw packet reaching a sink before any encoder: treat as systematic
                cp = codec.CodedPacket(pkt.gen, codec.unit_vector(pkt.index, pkt.gen_size),
                                       pkt.payload)
                self._decode_insert(sink, flow, pkt, cp, t)
                return
            u = self.units.get((flow, sink, pkt.gen, pkt.index))
            if u is not None and u[1] is None:
                u[1] = t
                u[3] = pkt.hops
            return
        self._decode_insert(sink, flow, pkt, pkt.coded, t)

    def _decode_insert(self, sink, flow, pkt, cp, t) -> None:
        dkey = (sink, flow, pkt.gen)
        state = self.decoders.get(dkey)
        if state is None:
            state = self.decoders[dkey] = codec.DecoderState(pkt.gen, pkt.gen_size)
        if state.complete:
            return
        state.insert(cp)
        if not state.complete:
            return
        t_dec = t + self.params.l_coding / 2.0
        if self.capture:
            for sp in codec.decode_generation(state):
                ref = self.sources.get((flow, pkt.gen, sp.index))
                if ref is None or not np.array_equal(ref, sp.payload):
                    self.decode_errors += 1
        for idx in range(pkt.gen_size):
            u = self.units.get((flow, sink, pkt.gen, idx))
            if u is not None and u[1] is None:
                u[1] = t_dec
                u[3] = pkt.hops
        # release the basis once the generation is done
        state.coeffs = []
        state.payloads = []

    # ---- output ------------------------------------------------------------
    def _trace(self) -> Trace:
        records = []
        for (flow, sink, gen, idx), (t0, t1, failed, hops) in sorted(
                self.units.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2], kv[0][3])):
            if t1 is not None:
                status = "delivered"
            elif failed or (flow, sink, gen) in self.failed_gens:
                status = "failed"
            else:
                status = "lost"
            records.append(UnitRecord(flow, sink, gen, idx, t0, t1, status, tuple(hops)))
        links = {k: LinkCounters(*c) for k, c in sorted(self.counters.items())}
        path_keys = set()
        for d in self.topology.demands:
            split = self.split[d.flow]
            if (split, d.flow) in self.encode:
                path_keys.update(self.encode[(split, d.flow)].out_links)
            else:
                for s in d.sinks:
                    sel = self.fwd.get((split, d.flow, s))
                    if sel is not None:
                        path_keys.update(l.key for l in sel.links)
        loads = tuple(sorted((k, self.path_loads.get(k, 0)) for k in path_keys))
        gen_counts = {k: dict(v) for k, v in sorted(self.gen_counts.items())}
        inbox = {k: tuple(v) for k, v in sorted(self.inbox.items())}
        return Trace(tuple(records), links, loads, self.duration, self.events,
                     self.decode_errors, gen_counts, inbox)


def run(topology: Topology, params: ScenarioParams, rules, seed: int, *,
        duration: float = 1.0, traffic: str = "deterministic", failures=(),
        controller=None, capture: bool = False, on_event=None) -> Trace:
    """Simulate ``duration`` seconds of offered traffic and drain the network."""
    sim = Simulation(topology, params, rules, seed, duration=duration, traffic=traffic,
                     failures=failures, controller=controller, capture=capture,
                     on_event=on_event)
    return sim.run()
