"""Measure simulated runs, reconcile them with the closed-form model and
reproduce the four-case evaluation table."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analytic import CASES, AnalyticReport, ScenarioParams, evaluate_scenario
from .controller import Controller
from .simnet import build_two_path, inject_failures, run
from .simnet.trace import Trace

log = logging.getLogger(__name__)

METRICS = ("throughput", "latency", "packet_loss", "fault_tolerance", "load_imbalance")
MODES = ("uncoded", "coded")
REPORT_UNITS = {
    "throughput": "packets/sec",
    "latency": "seconds",
    "packet_loss": "probability",
    "fault_tolerance": "probability",
    "load_imbalance": "fraction",
}

# (kind, bound): relative bounds are fractions of the analytic value,
# absolute bounds are in the metric's own unit.
DEFAULT_POLICY = {
    "throughput": ("relative", 0.05),
    "latency": ("relative", 0.10),
    "packet_loss": ("absolute", 0.02),
    "fault_tolerance": ("absolute", 0.02),
    "load_imbalance": ("absolute", 0.02),
}

# Printed evaluation table: (without coding, with coding), probabilities as fractions.
PRINTED_TABLE = {
    "case1": {"throughput": (700, 1000), "latency": (0.02, 0.025),
              "packet_loss": (0.30, 0.09), "fault_tolerance": (0.70, 0.91),
              "load_imbalance": (0.60, 0.20)},
    "case2": {"throughput": (400, 850), "latency": (0.05, 0.06),
              "packet_loss": (0.60, 0.36), "fault_tolerance": (0.60, 0.84),
              "load_imbalance": (0.80, 0.40)},
    "case3": {"throughput": (650, 950), "latency": (0.04, 0.05),
              "packet_loss": (0.35, 0.15), "fault_tolerance": (0.68, 0.88),
              "load_imbalance": (0.65, 0.25)},
    "case4": {"throughput": (600, 850), "latency": (0.03, 0.035),
              "packet_loss": (0.50, 0.25), "fault_tolerance": (0.50, 0.75),
              "load_imbalance": (0.70, 0.30)},
}

# half a unit of the table's printed precision
_PRINTED_SLACK = {"throughput": 0.5, "latency": 0.0005, "packet_loss": 0.005,
                  "fault_tolerance": 0.005, "load_imbalance": 0.005}


class UnitMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class MetricsReport:
    throughput: float = 0.0
    latency: float = 0.0
    packet_loss: float = 0.0
    fault_tolerance: float = 0.0
    load_imbalance: float = 0.0
    path_loads: tuple = ()
    units: int = 0
    delivered: int = 0
    latency_samples: int = 0
    duration: float = 0.0

    def metric(self, name: str) -> float:
        return getattr(self, name)


def collect_metrics(trace: Trace, duration: float) -> MetricsReport:
    if duration <= 0:
        raise ValueError("duration must be > 0")
    records = trace.records
    units = len(records)
    if units == 0:
        return MetricsReport(duration=duration)
    sinks = {(r.flow, r.sink) for r in records}
    delivered = failed = 0
    lat_sum = 0.0
    for r in records:
        if r.status == "delivered":
            delivered += 1
            lat_sum += r.deliver_time - r.send_time
        elif r.status == "failed":
            failed += 1
    loads = [c for _, c in trace.path_loads]
    total = sum(loads)
    imbalance = (max(loads) - min(loads)) / total if total else 0.0
    return MetricsReport(
        throughput=delivered / duration / len(sinks),
        latency=lat_sum / delivered if delivered else 0.0,
        packet_loss=(units - delivered) / units,
        fault_tolerance=1.0 - failed / units,
        load_imbalance=imbalance,
        path_loads=tuple((k, c / duration) for k, c in trace.path_loads),
        units=units,
        delivered=delivered,
        latency_samples=delivered,
        duration=duration,
    )


@dataclass(frozen=True)
class MetricComparison:
    metric: str
    unit: str
    simulated: float
    analytic: float
    abs_deviation: float
    rel_deviation: float
    tolerance: tuple
    passed: bool

    @property
    def deviation(self) -> float:
        """The deviation the tolerance is judged on."""
        return self.rel_deviation if self.tolerance[0] == "relative" else self.abs_deviation


@dataclass(frozen=True)
class ComparisonResult:
    mode: str
    items: tuple

    @property
    def passed(self) -> bool:
        return all(i.passed for i in self.items)

    def failures(self) -> list:
        return [i for i in self.items if not i.passed]

    def __getitem__(self, metric: str) -> MetricComparison:
        for i in self.items:
            if i.metric == metric:
                return i
        raise KeyError(metric)


def compare_to_analytic(report: MetricsReport, params, mode: str = "uncoded",
                        policy: dict | None = None, metrics=METRICS) -> ComparisonResult:
    """Deviation of each simulated metric from the closed form.

    ``params`` may be a :class:`ScenarioParams` or an already evaluated
    :class:`AnalyticReport`.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    policy = {**DEFAULT_POLICY, **(policy or {})}
    analytic = params if isinstance(params, AnalyticReport) else evaluate_scenario(params)
    pairs = analytic.metrics()
    items = []
    for name in metrics:
        pair = pairs[name]
        if pair.unit != REPORT_UNITS[name]:
            raise UnitMismatchError(
                f"{name}: simulated in {REPORT_UNITS[name]}, analytic in {pair.unit}")
        expected = pair.coded if mode == "coded" else pair.uncoded
        got = report.metric(name)
        abs_dev = got - expected
        rel_dev = abs_dev / expected if expected else (0.0 if abs_dev == 0 else float("inf"))
        kind, bound = policy[name]
        dev = abs(rel_dev) if kind == "relative" else abs(abs_dev)
        items.append(MetricComparison(name, pair.unit, got, expected, abs_dev, rel_dev,
                                      (kind, bound), dev <= bound + 1e-12))
    return ComparisonResult(mode, tuple(items))


# ---------------------------------------------------------------------------
# case suite

@dataclass(frozen=True)
class SuiteRow:
    case: str
    metric: str
    mode: str
    analytic: float
    simulated: float
    deviation: float
    passed: bool
    printed: float


@dataclass(frozen=True)
class Discrepancy:
    case: str
    metric: str
    mode: str
    formula: float
    printed: float

    @property
    def note(self) -> str:
        return f"formula gives {self.formula:.6g}, printed table shows {self.printed:.6g}"


@dataclass
class SuiteReport:
    rows: list = field(default_factory=list)
    discrepancies: list = field(default_factory=list)
    analytic: dict = field(default_factory=dict)
    simulated: dict = field(default_factory=dict)
    seeds: tuple = ()
    errors: list = field(default_factory=list)
    partial: bool = False

    @property
    def passed(self) -> bool:
        return not self.partial and bool(self.rows) and all(r.passed for r in self.rows)

    def row(self, case: str, metric: str, mode: str) -> SuiteRow:
        for r in self.rows:
            if (r.case, r.metric, r.mode) == (case, metric, mode):
                return r
        raise KeyError((case, metric, mode))


def find_discrepancies(case: str, report: AnalyticReport) -> list:
    """Cells where the closed form disagrees with the printed table."""
    out = []
    table = PRINTED_TABLE[case]
    for name, pair in report.metrics().items():
        for mode, value, printed in (("uncoded", pair.uncoded, table[name][0]),
                                     ("coded", pair.coded, table[name][1])):
            if abs(value - printed) > _PRINTED_SLACK[name] + 1e-12:
                out.append(Discrepancy(case, name, mode, value, printed))
    return out


def trial_seed(seed: int, trial: int) -> int:
    ss = np.random.SeedSequence(int(seed), spawn_key=(0xFA11, int(trial)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class CellSpec:
    case: str
    params: ScenarioParams
    coded: bool
    seeds: tuple
    duration: float
    failure_trials: int
    trial_duration: float


def _install(params: ScenarioParams, p_loss: float, coded: bool):
    topo = build_two_path(p_loss, params.distance_km, params.link_capacity)
    ctl = Controller(topo)
    rules = ctl.install_flow("f1", params, coded=coded)
    return topo, ctl, rules


def simulate_cell(spec: CellSpec) -> MetricsReport:
    """Loss-only runs for throughput, loss, latency and load; separate
    failure-only trials for fault tolerance."""
    p = spec.params
    topo, _, rules = _install(p, p.p_loss, spec.coded)
    thr, imb = [], []
    units = delivered = 0
    lat_sum = 0.0
    loads: dict = {}
    for seed in spec.seeds:
        tr = run(topo, p, rules, seed, duration=spec.duration)
        m = collect_metrics(tr, spec.duration)
        thr.append(m.throughput)
        imb.append(m.load_imbalance)
        units += m.units
        delivered += m.delivered
        lat_sum += m.latency * m.delivered
        for k, v in m.path_loads:
            loads[k] = loads.get(k, 0.0) + v / len(spec.seeds)

    ft_units = ft_failed = 0
    if spec.failure_trials > 0:
        lossless = p.replace(p_loss=0.0)
        ftopo, fctl, frules = _install(lossless, 0.0, spec.coded)
        paths = [q for qs in fctl.path_sets("f1").values() for q in qs]
        for seed in spec.seeds:
            for trial in range(spec.failure_trials):
                ts = trial_seed(seed, trial)
                fails = inject_failures(ftopo, p.p_failure, ts, paths)
                tr = run(ftopo, lossless, frules, ts, duration=spec.trial_duration,
                         failures=fails)
                ft_units += len(tr.records)
                ft_failed += sum(1 for r in tr.records if r.status != "delivered")
    return MetricsReport(
        throughput=float(np.mean(thr)) if thr else 0.0,
        latency=lat_sum / delivered if delivered else 0.0,
        packet_loss=(units - delivered) / units if units else 0.0,
        fault_tolerance=1.0 - ft_failed / ft_units if ft_units else 1.0,
        load_imbalance=float(np.mean(imb)) if imb else 0.0,
        path_loads=tuple(sorted(loads.items())),
        units=units,
        delivered=delivered,
        latency_samples=delivered,
        duration=spec.duration * len(spec.seeds),
    )


def run_case_suite(seeds, cases=("case1", "case2", "case3", "case4"), *,
                   duration: float = 100.0, failure_trials: int = 250,
                   trial_duration: float = 0.02, jobs: int = 1,
                   policy: dict | None = None) -> SuiteReport:
    """Analytic and simulated rows for every (case, mode), plus the list of
    cells where the printed table contradicts its own formulas."""
    seeds = tuple(int(s) for s in seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    cases = tuple(cases)
    for c in cases:
        if c not in CASES:
            raise KeyError(f"unknown case {c!r}; expected one of {sorted(CASES)}")
    report = SuiteReport(seeds=seeds)
    specs = []
    for c in cases:
        params = CASES[c]
        report.analytic[c] = evaluate_scenario(params)
        report.discrepancies.extend(find_discrepancies(c, report.analytic[c]))
        for mode in MODES:
            specs.append(CellSpec(c, params, mode == "coded", seeds, duration,
                                  failure_trials, trial_duration))

    results = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [(s, pool.submit(simulate_cell, s)) for s in specs]
            for s, fut in futures:
                try:
                    results[(s.case, s.coded)] = fut.result()
                except Exception as exc:  # noqa: BLE001 - reported, not swallowed
                    report.errors.append(f"{s.case}/{'coded' if s.coded else 'uncoded'}: {exc}")
                    report.partial = True
                    break
    else:
        for s in specs:
            try:
                results[(s.case, s.coded)] = simulate_cell(s)
            except Exception as exc:  # noqa: BLE001
                report.errors.append(f"{s.case}/{'coded' if s.coded else 'uncoded'}: {exc}")
                report.partial = True
                log.error("suite aborted at %s: %s", s.case, exc)
                break

    for c in cases:
        for mode in MODES:
            sim = results.get((c, mode == "coded"))
            if sim is None:
                continue
            report.simulated[(c, mode)] = sim
            cmp = compare_to_analytic(sim, report.analytic[c], mode, policy)
            table = PRINTED_TABLE[c]
            for item in cmp.items:
                printed = table[item.metric][1 if mode == "coded" else 0]
                report.rows.append(SuiteRow(c, item.metric, mode, item.analytic,
                                            item.simulated, item.deviation, item.passed,
                                            printed))
    return report
