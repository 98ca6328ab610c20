import json
import math
import random

import pytest

from ncsdn.analytic import ScenarioParams
from ncsdn.controller import Controller
from ncsdn.harness import collect_metrics
from ncsdn.rng import Streams
from ncsdn.simnet import (ConfigurationError, Link, Topology, TopologyError,
                          build_butterfly, build_chain, build_two_path, generate_traffic,
                          inject_failures, link_transmit, load_topology, run)

LOSSLESS = ScenarioParams(lam=100.0, p_loss=0.0, p_failure=0.0, retransmit_limit=0)
BUTTERFLY = ScenarioParams(lam=200.0, p_loss=0.0, p_failure=0.0, k=3, generation_size=2,
                           field="gf2", retransmit_limit=0, heaviest_path_fraction=0.5)


def installed(topo, params, coded=True):
    ctl = Controller(topo)
    rules = set()
    for d in topo.demands:
        rules |= ctl.install_flow(d.flow, params, coded=coded)
    return ctl, rules


# ---- traffic ---------------------------------------------------------------

@pytest.mark.parametrize("lam,duration", [(1000, 1.0), (700, 2.5), (1, 0.5), (0, 3.0)])
def test_deterministic_count(lam, duration):
    times = generate_traffic(lam, duration)
    assert len(times) == math.floor(lam * duration)
    assert times == sorted(times) and all(0 <= t < duration for t in times)


def test_poisson_count_within_three_sigma():
    lam, duration = 1000.0, 10.0
    for seed in range(5):
        n = len(generate_traffic(lam, duration, "poisson", random.Random(seed)))
        assert abs(n - lam * duration) <= 3 * math.sqrt(lam * duration)


def test_traffic_errors():
    with pytest.raises(ValueError):
        generate_traffic(-1, 1)
    with pytest.raises(ValueError):
        generate_traffic(10, 1, "bursty")
    with pytest.raises(ValueError):
        generate_traffic(10, 1, "poisson")


# ---- links -----------------------------------------------------------------

def test_bernoulli_drop_rate():
    link = Link("a", "b", loss_prob=0.3)
    rng = random.Random(42)
    drops = sum(link_transmit(link, None, 0.0, rng).kind == "link_drop" for _ in range(100_000))
    assert abs(drops / 100_000 - 0.3) <= 0.01


def test_down_link_drops_everything():
    ev = link_transmit(Link("a", "b"), None, 1.0, random.Random(0), up=False)
    assert ev.kind == "link_drop" and ev.reason == "failure"


def test_link_delay():
    link = Link("a", "b", capacity=1000.0, distance_km=200.0)
    assert link.delay == pytest.approx(0.001 + 0.001)


def test_link_validation():
    with pytest.raises(TopologyError):
        Link("a", "b", loss_prob=1.5)
    with pytest.raises(TopologyError):
        Link("a", "b", capacity=0)


def test_topology_rejects_unknown_node():
    with pytest.raises(TopologyError):
        Topology({"a": "host"}, [Link("a", "b")], [])


def test_topology_file_roundtrip(tmp_path):
    topo = build_butterfly()
    path = tmp_path / "bf.json"
    path.write_text(json.dumps(topo.to_dict()))
    again = load_topology(path)
    assert again.to_dict() == topo.to_dict()
    with pytest.raises(TopologyError):
        load_topology(tmp_path / "missing.json")


# ---- failures ----------------------------------------------------------------

def test_failure_injection_extremes():
    topo = build_two_path()
    paths = [("S", "P1", "D"), ("S", "P2", "D")]
    assert inject_failures(topo, 0.0, 1, paths) == []
    down = inject_failures(topo, 1.0, 1, paths)
    assert {e.link for e in down} == {("S", "P1"), ("P1", "D"), ("S", "P2"), ("P2", "D")}


def test_failed_path_marks_units_failed():
    topo = build_two_path()
    _, rules = installed(topo, LOSSLESS.replace(heaviest_path_fraction=1.0), coded=False)
    fails = inject_failures(topo, 1.0, 3, [("S", "P1", "D")])
    tr = run(topo, LOSSLESS, rules, 3, duration=0.5, failures=fails)
    assert {r.status for r in tr.records} == {"failed"}
    assert collect_metrics(tr, 0.5).fault_tolerance == 0.0


# ---- runs ----------------------------------------------------------------------

def test_missing_rules_rejected():
    with pytest.raises(ConfigurationError):
        run(build_two_path(), LOSSLESS, set(), 0)


def test_lossless_chain_delivers_everything():
    topo = build_chain(4)
    _, rules = installed(topo, LOSSLESS, coded=False)
    tr = run(topo, LOSSLESS, rules, 0, duration=1.0)
    assert tr.sent == 100 and tr.delivered == 100
    assert tr.conserved()


def test_zero_duration_gives_empty_trace():
    topo = build_two_path()
    _, rules = installed(topo, LOSSLESS)
    tr = run(topo, LOSSLESS, rules, 0, duration=0.0)
    assert tr.records == () and tr.conserved()


@pytest.mark.parametrize("coded", [False, True])
def test_same_seed_same_trace(coded):
    p = ScenarioParams(lam=500.0, p_loss=0.3, retransmit_limit=1)
    topo = build_two_path(0.3)
    _, rules = installed(topo, p, coded)
    a = run(topo, p, rules, 11, duration=0.5, traffic="poisson")
    b = run(topo, p, rules, 11, duration=0.5, traffic="poisson")
    c = run(topo, p, rules, 12, duration=0.5, traffic="poisson")
    assert a.to_csv() == b.to_csv()
    assert a.to_csv() != c.to_csv()


def test_conservation_and_causality_at_every_event():
    p = ScenarioParams(lam=300.0, p_loss=0.3, retransmit_limit=1)
    topo = build_two_path(0.3)
    _, rules = installed(topo, p, True)
    times = []

    def check(sim, kind):
        times.append(sim.now)
        for sent, delivered, lost, failed in sim.counters.values():
            assert delivered + lost + failed <= sent

    tr = run(topo, p, rules, 5, duration=0.5, on_event=check)
    assert times == sorted(times)
    assert tr.conserved()
    for r in tr.records:
        if r.status == "delivered":
            assert r.deliver_time > r.send_time


def test_trace_csv_export(tmp_path):
    topo = build_two_path(0.3)
    p = ScenarioParams(lam=100.0)
    _, rules = installed(topo, p, False)
    tr = run(topo, p, rules, 1, duration=0.1)
    out = tmp_path / "trace.csv"
    tr.write_csv(out)
    lines = out.read_text().splitlines()
    assert lines[0].startswith("flow,sink,generation,index,send_time")
    assert len(lines) == 1 + len(tr.records)


def test_streams_are_independent_of_creation_order():
    a, b = Streams(9), Streams(9)
    x = a["link:S->P1"].random()
    b["link:S->P2"].random()
    assert b["link:S->P1"].random() == x
    with pytest.raises(ValueError):
        Streams(-1)


# ---- butterfly -------------------------------------------------------------------

def butterfly_run(coded):
    topo = build_butterfly()
    ctl, rules = installed(topo, BUTTERFLY, coded)
    tr = run(topo, BUTTERFLY, rules, 2, duration=1.0, capture=True)
    return ctl, tr


def test_butterfly_coded_uses_bottleneck_once():
    ctl, tr = butterfly_run(True)
    per_gen = tr.link_generation_counts[("T1", "T2")]
    assert set(per_gen.values()) == {1}
    assert tr.delivered == len(tr.records) and tr.decode_errors == 0
    assert any("2 path(s)" in w for w in ctl.warnings)


def test_butterfly_uncoded_uses_bottleneck_twice():
    _, tr = butterfly_run(False)
    per_gen = tr.link_generation_counts[("T1", "T2")]
    assert set(per_gen.values()) == {2}
    assert tr.delivered == len(tr.records)


def test_butterfly_inboxes_hold_xor():
    _, tr = butterfly_run(True)
    vectors = {sink: {v for v, _ in tr.inbox[(sink, "mcast", 0)]} for sink in ("B2", "C2")}
    for vs in vectors.values():
        assert (1, 1) in vs and len(vs) == 2


def test_topology_node_mapping_shorthand():
    data = {"nodes": {"S": "host", "D": "host"}, "links": [{"src": "S", "dst": "D"}],
            "demands": [{"source": "S", "sinks": ["D"], "flow": "f1"}]}
    topo = Topology.from_dict(data)
    assert topo.nodes == {"S": "host", "D": "host"}
    with pytest.raises(TopologyError):
        Topology.from_dict({"nodes": [], "links": [{"src": "S", "dst": "D", "colour": 1}]})
