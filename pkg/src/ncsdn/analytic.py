"""Closed-form throughput, latency, loss, fault-tolerance and load models.

Every function returns a :class:`MetricPair` holding the value without coding
and with coding. Probabilities are fractions in [0, 1]; multiply by 100 for
the percentage columns of a report.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

UNITS = ("packets/sec", "seconds", "probability", "fraction")


class ParamError(ValueError):
    """Out-of-range scenario parameter; ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class ScenarioParams:
    lam: float = 1000.0
    p_loss: float = 0.3
    k: int = 2
    p_failure: float = 0.3
    n: int = 2
    l_request: float = 0.008
    l_processing: float = 0.004
    l_response: float = 0.008
    l_coding: float = 0.006
    l_reduced: float = 0.001
    heaviest_path_fraction: float = 0.8
    distance_km: float = 0.0
    # simulator-only knobs
    generation_size: int = 1
    field: str = "gf256"
    symbol_size: int = 16
    retransmit_limit: int = 1
    link_capacity: float = 100_000.0
    failure_detection_delay: float | None = None

    def __post_init__(self):
        for key in ("p_loss", "p_failure"):
            v = getattr(self, key)
            if not 0.0 <= v <= 1.0:
                raise ParamError(key, f"must be in [0, 1], got {v}")
        if self.lam < 0:
            raise ParamError("lam", f"must be >= 0, got {self.lam}")
        for key in ("k", "n", "generation_size", "symbol_size"):
            v = getattr(self, key)
            if int(v) != v or v < 1:
                raise ParamError(key, f"must be an integer >= 1, got {v}")
        for key in ("l_request", "l_processing", "l_response", "l_coding", "l_reduced",
                    "distance_km"):
            if getattr(self, key) < 0:
                raise ParamError(key, f"must be >= 0, got {getattr(self, key)}")
        f = self.heaviest_path_fraction
        if not (1.0 / self.n - 1e-12 <= f <= 1.0):
            raise ParamError("heaviest_path_fraction",
                             f"must be in [1/n, 1] = [{1.0 / self.n:.4g}, 1], got {f}")
        if self.field not in ("gf256", "gf2"):
            raise ParamError("field", f"must be 'gf256' or 'gf2', got {self.field!r}")
        if self.retransmit_limit < 0 or int(self.retransmit_limit) != self.retransmit_limit:
            raise ParamError("retransmit_limit", "must be an integer >= 0")
        if self.link_capacity <= 0:
            raise ParamError("link_capacity", "must be > 0")
        d = self.failure_detection_delay
        if d is not None and d < 0:
            raise ParamError("failure_detection_delay", "must be >= 0 or None")

    @property
    def r(self) -> float:
        """Single-path reliability."""
        return 1.0 - self.p_failure

    def replace(self, **changes) -> "ScenarioParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def keys(cls) -> tuple:
        return tuple(f.name for f in fields(cls))


@dataclass(frozen=True)
class MetricPair:
    uncoded: float
    coded: float
    unit: str

    def __post_init__(self):
        if self.unit not in UNITS:
            raise ValueError(f"unknown unit {self.unit!r}")


@dataclass(frozen=True)
class LoadSplit:
    t_max_uncoded: float
    t_min_uncoded: float
    t_max_coded: float
    t_min_coded: float
    imbalance: MetricPair


@dataclass(frozen=True)
class AnalyticReport:
    params: ScenarioParams
    throughput: MetricPair
    latency: MetricPair
    packet_loss: MetricPair
    fault_tolerance: MetricPair
    load_imbalance: MetricPair
    load: LoadSplit

    def metrics(self) -> dict:
        return {
            "throughput": self.throughput,
            "latency": self.latency,
            "packet_loss": self.packet_loss,
            "fault_tolerance": self.fault_tolerance,
            "load_imbalance": self.load_imbalance,
        }


def throughput_pair(lam: float, p_loss: float) -> MetricPair:
    if p_loss >= 1.0:
        raise ZeroDivisionError("coded throughput undefined for p_loss = 1")
    uncoded = lam * (1.0 - p_loss)
    coded = uncoded * (1.0 / (1.0 - p_loss))
    return MetricPair(uncoded, coded, "packets/sec")


def latency_pair(l_request: float, l_processing: float, l_response: float,
                 l_coding: float, l_reduced: float) -> MetricPair:
    for name, v in (("l_request", l_request), ("l_processing", l_processing),
                    ("l_response", l_response), ("l_coding", l_coding),
                    ("l_reduced", l_reduced)):
        if v < 0:
            raise ParamError(name, f"must be >= 0, got {v}")
    uncoded = l_request + l_processing + l_response
    # L_reduced is delay avoided, so it is subtracted
    coded = uncoded + l_coding - l_reduced
    return MetricPair(uncoded, coded, "seconds")


def packet_loss_pair(p_loss: float, k: int) -> MetricPair:
    if k < 1:
        raise ParamError("k", f"must be >= 1, got {k}")
    return MetricPair(p_loss, p_loss ** k, "probability")


def fault_tolerance_pair(p_failure: float, k: int) -> MetricPair:
    if k < 1:
        raise ParamError("k", f"must be >= 1, got {k}")
    r = 1.0 - p_failure
    return MetricPair(r, 1.0 - (1.0 - r) ** k, "probability")


def load_pair(lam: float, n: int, heaviest_path_fraction: float) -> LoadSplit:
    if n < 1:
        raise ParamError("n", f"must be >= 1, got {n}")
    f = heaviest_path_fraction
    if n == 1:
        t_max_u = t_min_u = lam
    else:
        if not (1.0 / n - 1e-12 <= f <= 1.0):
            raise ParamError("heaviest_path_fraction", f"infeasible for n={n}: {f}")
        t_max_u = lam * f
        t_min_u = lam * (1.0 - f) / (n - 1)
    t_max_c = t_min_c = lam / n
    if lam > 0:
        # clamp so a uniform split cannot round to a tiny negative value
        imb = MetricPair(max(0.0, (t_max_u - t_min_u) / lam),
                         max(0.0, (t_max_c - t_min_c) / lam), "fraction")
    else:
        imb = MetricPair(0.0, 0.0, "fraction")
    return LoadSplit(t_max_u, t_min_u, t_max_c, t_min_c, imb)


def improvement_percent(before: float, after: float) -> float:
    if before == 0:
        raise ZeroDivisionError("improvement relative to zero is undefined")
    return 100.0 * (after - before) / before


def evaluate_scenario(params: ScenarioParams) -> AnalyticReport:
    load = load_pair(params.lam, params.n, params.heaviest_path_fraction)
    return AnalyticReport(
        params=params,
        throughput=throughput_pair(params.lam, params.p_loss),
        latency=latency_pair(params.l_request, params.l_processing, params.l_response,
                             params.l_coding, params.l_reduced),
        packet_loss=packet_loss_pair(params.p_loss, params.k),
        fault_tolerance=fault_tolerance_pair(params.p_failure, params.k),
        load_imbalance=load.imbalance,
        load=load,
    )


# Four evaluation cases. Rates are back-solved from the uncoded throughput
# column; latency components and the heaviest-path share are calibrated so
# the uncoded/coded latency totals and the uncoded imbalance match the table.
# Uncoded runs of the presets never retransmit, matching T = lam * (1 - p).
CASES: dict[str, ScenarioParams] = {
    "case1": ScenarioParams(
        lam=1000.0, p_loss=0.3, p_failure=0.3, k=2, n=2,
        l_request=0.008, l_processing=0.004, l_response=0.008,
        l_coding=0.006, l_reduced=0.001, heaviest_path_fraction=0.8,
        retransmit_limit=0),
    "case2": ScenarioParams(
        lam=2000.0, p_loss=0.6, p_failure=0.4, k=2, n=2,
        l_request=0.020, l_processing=0.010, l_response=0.020,
        l_coding=0.012, l_reduced=0.002, heaviest_path_fraction=0.9,
        retransmit_limit=0),
    "case3": ScenarioParams(
        lam=1000.0, p_loss=0.35, p_failure=0.32, k=2, n=2,
        l_request=0.016, l_processing=0.008, l_response=0.016,
        l_coding=0.012, l_reduced=0.002, heaviest_path_fraction=0.825,
        distance_km=100.0, retransmit_limit=0),
    "case4": ScenarioParams(
        lam=1200.0, p_loss=0.5, p_failure=0.5, k=2, n=2,
        l_request=0.012, l_processing=0.006, l_response=0.012,
        l_coding=0.006, l_reduced=0.001, heaviest_path_fraction=0.85,
        retransmit_limit=0),
}

CASE_TITLES = {
    "case1": "1. Base Case",
    "case2": "2. High Traffic (lambda=2000)",
    "case3": "3. Long Distance (d=100km)",
    "case4": "4. High Path Failure (P_failure=0.5)",
}
