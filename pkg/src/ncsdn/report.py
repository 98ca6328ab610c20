"""CSV, JSON and plain-table rendering of analytic, simulated and suite reports.

Numbers are printed at fixed precision so output is byte-stable: throughput
to 1 decimal, latency to 6, probabilities and fractions to 4.
"""

from __future__ import annotations

import csv
import io
import json

from .analytic import CASE_TITLES, AnalyticReport
from .harness import METRICS, MetricsReport, SuiteReport

FORMATS = ("csv", "json", "table")

LABELS = {
    "throughput": "Throughput (packets/sec)",
    "latency": "Latency (seconds)",
    "packet_loss": "Packet Loss (fraction)",
    "fault_tolerance": "Fault Tolerance (fraction)",
    "load_imbalance": "Load Imbalance (fraction)",
}


def precision(metric: str) -> int:
    if metric == "throughput":
        return 1
    if metric == "latency":
        return 6
    return 4


def fmt(metric: str, value: float) -> str:
    return f"{value:.{precision(metric)}f}"


def _num(metric: str, value: float) -> float:
    return float(fmt(metric, value))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _table(header, rows) -> str:
    widths = [len(h) for h in header]
    for r in rows:
        widths = [max(w, len(c)) for w, c in zip(widths, r)]
    line = "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()
    out = [line, "  ".join("-" * w for w in widths)]
    for r in rows:
        out.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(out) + "\n"


# ---- analytic ------------------------------------------------------------

def _analytic_rows(report: AnalyticReport):
    for name, pair in report.metrics().items():
        yield name, pair


def _emit_analytic(report: AnalyticReport, form: str) -> str:
    if form == "json":
        data = {name: {"unit": p.unit, "without_coding": _num(name, p.uncoded),
                       "with_coding": _num(name, p.coded)}
                for name, p in _analytic_rows(report)}
        return json.dumps(data, indent=2) + "\n"
    rows = [[name, p.unit, fmt(name, p.uncoded), fmt(name, p.coded)]
            for name, p in _analytic_rows(report)]
    if form == "csv":
        return _csv(["metric", "unit", "without_coding", "with_coding"], rows)
    return _table(["Metric", "Without Coding", "With Coding"],
                  [[LABELS[r[0]], r[2], r[3]] for r in rows])


# ---- single simulation ---------------------------------------------------

def _emit_metrics(reports: dict, form: str) -> str:
    modes = list(reports)
    if form == "json":
        data = {}
        for mode, m in reports.items():
            data[mode] = {name: _num(name, m.metric(name)) for name in METRICS}
            data[mode]["path_loads"] = {f"{a}->{b}": _num("throughput", v)
                                        for (a, b), v in m.path_loads}
            data[mode]["units"] = m.units
            data[mode]["delivered"] = m.delivered
        return json.dumps(data, indent=2) + "\n"
    rows = [[name] + [fmt(name, reports[mode].metric(name)) for mode in modes]
            for name in METRICS]
    if form == "csv":
        return _csv(["metric"] + modes, rows)
    header = ["Metric"] + ["Without Coding" if m == "uncoded" else "With Coding" for m in modes]
    return _table(header, [[LABELS[r[0]]] + r[1:] for r in rows])


# ---- suite -----------------------------------------------------------------

SUITE_HEADER = ["case", "metric", "mode", "analytic", "simulated", "deviation", "pass"]
DISCREPANCY_HEADER = ["case", "metric", "mode", "formula", "printed", "note"]


def _emit_suite(report: SuiteReport, form: str) -> str:
    rows = [[r.case, r.metric, r.mode, fmt(r.metric, r.analytic), fmt(r.metric, r.simulated),
             f"{r.deviation:.4f}", "pass" if r.passed else "fail"] for r in report.rows]
    disc = [[d.case, d.metric, d.mode, fmt(d.metric, d.formula), fmt(d.metric, d.printed),
             d.note] for d in report.discrepancies]
    if form == "json":
        data = {
            "seeds": list(report.seeds),
            "passed": report.passed,
            "partial": report.partial,
            "errors": list(report.errors),
            "rows": [{"case": r.case, "metric": r.metric, "mode": r.mode,
                      "analytic": _num(r.metric, r.analytic),
                      "simulated": _num(r.metric, r.simulated),
                      "deviation": float(f"{r.deviation:.4f}"), "pass": r.passed}
                     for r in report.rows],
            "discrepancies": [{"case": d.case, "metric": d.metric, "mode": d.mode,
                               "formula": _num(d.metric, d.formula),
                               "printed": _num(d.metric, d.printed), "note": d.note}
                              for d in report.discrepancies],
        }
        return json.dumps(data, indent=2) + "\n"
    if form == "csv":
        text = _csv(SUITE_HEADER, rows)
        if disc:
            text += "\n# discrepancies between formulas and the printed table\n"
            text += _csv(DISCREPANCY_HEADER, disc)
        if report.errors:
            text += "\n# errors (partial results)\n"
            text += "".join(f"# {e}\n" for e in report.errors)
        return text
    return _suite_table(report)


def _suite_table(report: SuiteReport) -> str:
    header = ["Case", "Metric", "Without Coding", "With Coding", "Sim Without", "Sim With",
              "Printed", "Pass"]
    rows = []
    cases = list(dict.fromkeys(r.case for r in report.rows)) or list(report.analytic)
    for case in cases:
        title = CASE_TITLES.get(case, case)
        for name in METRICS:
            a = report.analytic[case].metrics()[name]
            cells = {}
            for mode in ("uncoded", "coded"):
                try:
                    cells[mode] = report.row(case, name, mode)
                except KeyError:
                    cells[mode] = None
            sim = [fmt(name, cells[m].simulated) if cells[m] else "-" for m in ("uncoded", "coded")]
            ok = all(c.passed for c in cells.values() if c) and all(cells.values())
            printed = (f"{fmt(name, cells['uncoded'].printed)}/{fmt(name, cells['coded'].printed)}"
                     if cells["uncoded"] and cells["coded"] else "-")
            rows.append([title, LABELS[name], fmt(name, a.uncoded), fmt(name, a.coded),
                         sim[0], sim[1], printed, "yes" if ok else "NO"])
            title = ""
    text = _table(header, rows)
    if report.discrepancies:
        text += "\nDiscrepancies (formula vs printed table):\n"
        text += _table(["Case", "Metric", "Mode", "Formula", "Printed"],
                       [[d.case, d.metric, d.mode, fmt(d.metric, d.formula),
                         fmt(d.metric, d.printed)] for d in report.discrepancies])
    if report.errors:
        text += "\nErrors (partial results):\n" + "".join(f"  {e}\n" for e in report.errors)
    return text


def emit_report(report, form: str = "table") -> bytes:
    if form not in FORMATS:
        raise ValueError(f"unknown format {form!r}; supported formats: {', '.join(FORMATS)}")
    if isinstance(report, AnalyticReport):
        text = _emit_analytic(report, form)
    elif isinstance(report, SuiteReport):
        text = _emit_suite(report, form)
    elif isinstance(report, MetricsReport):
        text = _emit_metrics({"value": report}, form)
    elif isinstance(report, dict) and all(isinstance(v, MetricsReport) for v in report.values()):
        text = _emit_metrics(report, form)
    else:
        raise TypeError(f"cannot render {type(report).__name__}")
    return text.encode("utf-8")
