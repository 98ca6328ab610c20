import pytest

from ncsdn.analytic import CASES, evaluate_scenario
from ncsdn.harness import (DEFAULT_POLICY, MetricsReport, collect_metrics, compare_to_analytic,
                           find_discrepancies, run_case_suite, trial_seed)
from ncsdn.report import emit_report
from ncsdn.simnet.trace import Trace, UnitRecord


def record(status, t0=0.0, t1=None, sink="D"):
    return UnitRecord("f1", sink, 0, 0, t0, t1, status)


def test_collect_metrics_counts():
    recs = (record("delivered", 0.0, 0.02), record("delivered", 0.1, 0.12),
            record("lost"), record("failed"))
    tr = Trace(recs, path_loads=((("S", "P1"), 3), (("S", "P2"), 1)))
    m = collect_metrics(tr, 2.0)
    assert m.throughput == pytest.approx(1.0)
    assert m.latency == pytest.approx(0.02)
    assert m.packet_loss == pytest.approx(0.5)
    assert m.fault_tolerance == pytest.approx(0.75)
    assert m.load_imbalance == pytest.approx(0.5)


def test_collect_metrics_per_sink_throughput():
    recs = (record("delivered", 0, 1, "B"), record("delivered", 0, 1, "C"))
    assert collect_metrics(Trace(recs), 1.0).throughput == pytest.approx(1.0)


def test_collect_metrics_empty_and_bad_duration():
    assert collect_metrics(Trace(), 1.0) == MetricsReport(duration=1.0)
    with pytest.raises(ValueError):
        collect_metrics(Trace(), 0.0)


def test_compare_inside_and_outside_tolerance(case1):
    good = MetricsReport(throughput=710, latency=0.0205, packet_loss=0.31,
                         fault_tolerance=0.69, load_imbalance=0.61)
    res = compare_to_analytic(good, case1, "uncoded")
    assert res.passed
    bad = MetricsReport(throughput=600, latency=0.0205, packet_loss=0.40,
                        fault_tolerance=0.69, load_imbalance=0.61)
    res = compare_to_analytic(bad, evaluate_scenario(case1), "uncoded")
    assert {f.metric for f in res.failures()} == {"throughput", "packet_loss"}
    assert res["throughput"].rel_deviation == pytest.approx(-100 / 700)


def test_compare_custom_policy(case1):
    m = MetricsReport(throughput=600, latency=0.02, packet_loss=0.3, fault_tolerance=0.7,
                      load_imbalance=0.6)
    res = compare_to_analytic(m, case1, "uncoded", {"throughput": ("relative", 0.2)})
    assert res.passed
    with pytest.raises(ValueError):
        compare_to_analytic(m, case1, "sideways")


def test_default_policy_bounds():
    assert DEFAULT_POLICY["throughput"] == ("relative", 0.05)
    assert DEFAULT_POLICY["packet_loss"] == ("absolute", 0.02)


def test_discrepancies_flag_known_cells():
    flagged = {(c, d.metric, d.mode)
               for c in CASES for d in find_discrepancies(c, evaluate_scenario(CASES[c]))}
    assert ("case3", "packet_loss", "coded") in flagged
    assert ("case3", "fault_tolerance", "coded") in flagged
    assert ("case2", "throughput", "uncoded") in flagged
    assert ("case2", "throughput", "coded") in flagged
    assert ("case4", "throughput", "coded") in flagged
    assert ("case1", "throughput", "uncoded") not in flagged
    assert ("case1", "packet_loss", "coded") not in flagged


def test_trial_seed_spreads():
    seeds = {trial_seed(0, t) for t in range(100)}
    assert len(seeds) == 100
    assert trial_seed(3, 4) == trial_seed(3, 4)


def test_small_suite_is_deterministic():
    kw = dict(cases=("case1",), duration=0.2, failure_trials=5)
    a = run_case_suite([1, 2], **kw)
    b = run_case_suite([1, 2], **kw)
    assert emit_report(a, "csv") == emit_report(b, "csv")
    assert len(a.rows) == 10 and not a.partial


def test_suite_rejects_unknown_case():
    with pytest.raises(KeyError):
        run_case_suite([0], cases=("case9",))
    with pytest.raises(ValueError):
        run_case_suite([])
