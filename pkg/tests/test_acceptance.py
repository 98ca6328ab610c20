"""Acceptance criteria 1-8. Each check records a verdict that the terminal
summary prints as one PASS/FAIL line per criterion."""

import random
import time

import numpy as np
import pytest

from ncsdn import codec
from ncsdn.analytic import CASES, evaluate_scenario, improvement_percent
from ncsdn.cli import run_command
from ncsdn.codec import (DecoderState, InsufficientRankError, SourcePacket,
                         decode_generation, encode_generation)
from ncsdn.controller import Controller
from ncsdn.harness import CellSpec, find_discrepancies, simulate_cell
from ncsdn.simnet import build_butterfly, run

T1 = "Case 1 analytic reproduction"
T2 = "42.8% improvement claim"
T3 = "Cases 2-4 analytic plus discrepancy flags"
T4 = "Butterfly halving"
T5 = "Codec round trip"
T6 = "Statistical convergence"
T7 = "Determinism of simulate"
T8 = "GF(2^8) brute force"


# ---- 1 -------------------------------------------------------------------------

def test_c1_case1_exact(criterion):
    rep = evaluate_scenario(CASES["case1"])
    got = {
        "throughput": (round(rep.throughput.uncoded, 1), round(rep.throughput.coded, 1)),
        "packet_loss": (round(rep.packet_loss.uncoded, 4), round(rep.packet_loss.coded, 4)),
        "fault_tolerance": (round(rep.fault_tolerance.uncoded, 4),
                            round(rep.fault_tolerance.coded, 4)),
        "latency": (round(rep.latency.uncoded, 6), round(rep.latency.coded, 6)),
        "load_imbalance": round(rep.load_imbalance.uncoded, 4),
    }
    want = {"throughput": (700.0, 1000.0), "packet_loss": (0.30, 0.09),
            "fault_tolerance": (0.70, 0.91), "latency": (0.020, 0.025),
            "load_imbalance": 0.60}
    ok = criterion(1, T1, got == want, f"values {'match' if got == want else got}")
    start = time.perf_counter()
    for _ in range(1000):
        evaluate_scenario(CASES["case1"])
    per_call = (time.perf_counter() - start) / 1000
    fast = criterion(1, T1, per_call < 1e-3, f"{per_call * 1e6:.1f} us per evaluation")
    assert ok and fast


# ---- 2 -------------------------------------------------------------------------

def test_c2_improvement(criterion):
    v = improvement_percent(700, 1000)
    ok = abs(v - 300 / 7) < 1e-12 and f"{v:.3f}" == "42.857" and f"{v:.1f}" == "42.9"
    criterion(2, T2, ok, f"{v:.3f}% (42.8 in the text truncates, 42.9 rounds)")
    assert ok


# ---- 3 -------------------------------------------------------------------------

@pytest.mark.parametrize("case,loss,ft", [
    ("case2", (0.60, 0.36), (0.60, 0.84)),
    ("case4", (0.50, 0.25), (0.50, 0.75)),
    ("case3", (0.35, 0.1225), (0.68, 0.8976)),
])
def test_c3_analytic(criterion, case, loss, ft):
    rep = evaluate_scenario(CASES[case])
    got_loss = (round(rep.packet_loss.uncoded, 4), round(rep.packet_loss.coded, 4))
    got_ft = (round(rep.fault_tolerance.uncoded, 4), round(rep.fault_tolerance.coded, 4))
    ok = got_loss == loss and got_ft == ft and rep.params.k == 2
    criterion(3, T3, ok, f"{case} loss {got_loss} tolerance {got_ft}")
    assert ok


def test_c3_suite_emits_flags(criterion, capsys):
    code = run_command(["suite", "--cases", "2,3", "--seeds", "1", "--duration", "0.05",
                        "--failure-trials", "1", "--format", "csv"])
    out = capsys.readouterr().out
    section = out.split("# discrepancies", 1)[1] if "# discrepancies" in out else ""
    needed = ["case3,packet_loss,coded,0.1225,0.1500",
              "case3,fault_tolerance,coded,0.8976,0.8800",
              "case2,throughput,uncoded,800.0,400.0",
              "case2,throughput,coded,2000.0,850.0"]
    missing = [n for n in needed if n not in section]
    ok = code in (0, 1) and not missing
    criterion(3, T3, ok, "suite flags case3 loss/tolerance and case2 throughput"
              if ok else f"missing flags {missing}")
    flagged = {(d.case, d.metric, d.mode) for c in ("case2", "case3")
               for d in find_discrepancies(c, evaluate_scenario(CASES[c]))}
    assert ("case3", "packet_loss", "coded") in flagged
    assert ok


# ---- 4 -------------------------------------------------------------------------

def test_c4_butterfly(criterion):
    params = CASES["case1"].replace(lam=1000.0, p_loss=0.0, p_failure=0.0, k=3,
                                    generation_size=2, field="gf2",
                                    heaviest_path_fraction=0.5)
    counts = {}
    start = time.perf_counter()
    for coded in (False, True):
        topo = build_butterfly()
        rules = Controller(topo).install_flow("mcast", params, coded=coded)
        tr = run(topo, params, rules, 4, duration=1.0, capture=True)
        per_gen = set(tr.link_generation_counts[("T1", "T2")].values())
        gens = len({r.generation for r in tr.records})
        decoded = {(r.sink, r.generation) for r in tr.records if r.status == "delivered"}
        complete = all(sum(1 for r in tr.records if r.sink == s and r.generation == g
                           and r.status == "delivered") == 2 for s, g in decoded)
        counts[coded] = (per_gen, len(decoded) == 2 * gens and complete, tr.decode_errors)
    elapsed = time.perf_counter() - start
    ok = (counts[True][0] == {1} and counts[False][0] == {2}
          and counts[True][1] and counts[False][1] and counts[True][2] == 0)
    criterion(4, T4, ok, f"bottleneck per generation coded {sorted(counts[True][0])} "
              f"uncoded {sorted(counts[False][0])}; all generations decoded at both sinks "
              f"({elapsed:.2f} s)")
    assert ok


# ---- 5 -------------------------------------------------------------------------

def test_c5_roundtrip(criterion):
    r = random.Random(2024)
    start = time.perf_counter()
    failures = 0
    for trial in range(1000):
        field = "gf256" if trial % 2 == 0 else "gf2"
        g = r.randint(1, 16)
        size = r.randint(1, 1024)
        src = [SourcePacket(trial, i, np.frombuffer(r.randbytes(size), dtype=np.uint8))
               for i in range(g)]
        state = DecoderState(trial, g)
        innovative = []
        while not state.complete:
            p = encode_generation(src, codec.random_vector(g, r, field))
            if state.insert(p):
                innovative.append(p)
        if decode_generation(state) != src:
            failures += 1
        partial = DecoderState(trial, g)
        for p in r.sample(innovative, g - 1):
            partial.insert(p)
        try:
            decode_generation(partial)
            failures += 1
        except InsufficientRankError:
            pass
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < 60
    criterion(5, T5, ok, f"1000 generations, {failures} failures, {elapsed:.1f} s")
    assert ok


# ---- 6 -------------------------------------------------------------------------

SEEDS = tuple(range(20))


@pytest.fixture(scope="module")
def convergence():
    start = time.perf_counter()
    case1 = {mode: simulate_cell(CellSpec("case1", CASES["case1"], mode == "coded", SEEDS,
                                          5.0, 0, 0.02))
             for mode in ("uncoded", "coded")}
    case4 = {mode: simulate_cell(CellSpec("case4", CASES["case4"], mode == "coded", SEEDS,
                                          0.01, 250, 0.02))
             for mode in ("uncoded", "coded")}
    return case1, case4, time.perf_counter() - start


def test_c6_loss_and_uncoded_throughput(criterion, convergence):
    case1, case4, elapsed = convergence
    u, c = case1["uncoded"], case1["coded"]
    checks = [
        u.units >= 100_000 and c.units >= 100_000,
        abs(u.throughput - 700) <= 0.05 * 700,
        abs(u.packet_loss - 0.30) <= 0.02,
        abs(c.packet_loss - 0.09) <= 0.02,
        elapsed < 300,
    ]
    criterion(6, T6, all(checks),
              f"{u.units} packets per mode; throughput uncoded {u.throughput:.1f}; "
              f"loss {u.packet_loss:.4f}/{c.packet_loss:.4f}; {elapsed:.0f} s")
    assert all(checks)


def test_c6_fault_tolerance(criterion, convergence):
    _, case4, _ = convergence
    u, c = case4["uncoded"], case4["coded"]
    ok = abs(u.fault_tolerance - 0.50) <= 0.02 and abs(c.fault_tolerance - 0.75) <= 0.02
    criterion(6, T6, ok, f"case 4 tolerance {u.fault_tolerance:.4f}/{c.fault_tolerance:.4f}")
    assert ok


@pytest.mark.xfail(strict=True, reason="coded throughput of lam is inconsistent with a coded "
                   "loss of p^K; the simulator delivers lam*(1-p^K)")
def test_c6_coded_throughput(criterion, convergence):
    case1, _, _ = convergence
    c = case1["coded"]
    ok = abs(c.throughput - 1000) <= 0.05 * 1000
    criterion(6, T6, ok, f"coded throughput {c.throughput:.1f} vs 1000 +/- 5% "
              f"(lam*(1-p^K) = {1000 * (1 - 0.09):.0f})")
    assert ok


# ---- 7 -------------------------------------------------------------------------

@pytest.mark.parametrize("fmt", ["csv", "json", "table"])
def test_c7_determinism(criterion, tmp_path, fmt):
    outs = []
    for name in ("a", "b"):
        path = tmp_path / f"{name}.{fmt}"
        code = run_command(["simulate", "--preset", "case1", "--seed", "31", "--duration", "0.5",
                            "--set", "traffic=poisson", "--with-failures",
                            "--format", fmt, "--out", str(path)])
        assert code == 0
        outs.append(path.read_bytes())
    ok = outs[0] == outs[1] and len(outs[0]) > 0
    criterion(7, T7, ok, f"{fmt} identical" if ok else f"{fmt} differs")
    assert ok


# ---- 8 -------------------------------------------------------------------------

def test_c8_field_axioms(criterion):
    mul = codec.MUL
    a = np.arange(256, dtype=np.intp)
    ab = mul[a[:, None], a[None, :]]
    assoc = bool(np.array_equal(mul[ab[:, :, None], a[None, None, :]],
                                mul[a[:, None, None], ab[None, :, :]]))
    comm = bool(np.array_equal(ab, ab.T))
    distrib = bool(np.array_equal(mul[a[:, None, None], (a[None, :, None] ^ a[None, None, :])],
                                  ab[:, :, None] ^ ab[:, None, :]))
    inverses = all(codec.mul(x, codec.inv(x)) == 1 for x in range(1, 256))
    ok = assoc and comm and distrib and inverses
    criterion(8, T8, ok, "associativity, commutativity and distributivity on all 256^3 "
              "triples; all 255 inverses")
    assert ok
