"""Command-line entry point: ``ncsdn analytic|simulate|suite``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .analytic import CASES, ParamError, ScenarioParams, evaluate_scenario
from .controller import Controller
from .harness import collect_metrics, run_case_suite
from .report import FORMATS, emit_report
from .simnet import (TopologyError, build_butterfly, build_two_path, inject_failures,
                     load_topology, run)

OUTPUT_DIR_ENV = "NCSDN_OUTPUT_DIR"
TOPOLOGIES = ("two_path", "butterfly")
MODES = ("coded", "uncoded", "both")
TRAFFIC = ("deterministic", "poisson")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is the dotted path of the bad entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "custom"
    params: ScenarioParams = field(default_factory=ScenarioParams)
    topology: str = "two_path"
    mode: str = "both"
    traffic: str = "deterministic"
    duration: float = 10.0
    seeds: tuple = (0,)


_CONFIG_KEYS = ("name", "preset", "topology", "mode", "traffic", "duration", "seed", "seeds")
_PARAM_TYPES = typing.get_type_hints(ScenarioParams)


def _coerce(key: str, value, where: str):
    if key in ("name", "preset", "topology", "mode", "traffic"):
        return str(value)
    try:
        if key == "duration":
            return float(value)
        if key == "seed":
            return int(value)
        if key == "seeds":
            if isinstance(value, str):
                return tuple(int(s) for s in value.replace(",", " ").split())
            if isinstance(value, int):
                return (value,)
            return tuple(int(s) for s in value)
        hint = _PARAM_TYPES[key]
        if isinstance(value, str) and value.strip().lower() in ("none", "null", ""):
            if type(None) in typing.get_args(hint):
                return None
            raise ValueError("value required")
        if value is None:
            if type(None) in typing.get_args(hint):
                return None
            raise ValueError("value required")
        if hint is int:
            f = float(value)
            if f != int(f):
                raise ValueError(f"expected an integer, got {value!r}")
            return int(f)
        if hint is str:
            return str(value)
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}{key}", f"bad value {value!r}: {exc}") from None


def _read_file(path: Path) -> dict:
    if not path.exists():
        raise ConfigError(str(path), "config file not found")
    text = path.read_text()
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(str(path), f"invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(str(path), "top level must be an object")
        if isinstance(data.get("params"), dict):
            nested = data.pop("params")
            data.update(nested)
        return data
    data = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}", f"expected key = value, got {raw!r}")
        k, v = line.split("=", 1)
        data[k.strip()] = v.strip()
    return data


def parse_config(path=None, preset: str | None = None, overrides: dict | None = None
                 ) -> ScenarioConfig:
    """Merge preset, file and inline overrides (in that order) and validate."""
    raw: dict = {}
    where = ""
    if path is not None:
        path = Path(path)
        raw.update(_read_file(path))
        where = f"{path}: "
    for k in raw:
        if k not in _CONFIG_KEYS and k not in _PARAM_TYPES:
            raise ConfigError(f"{where}{k}", "unknown key")
    overrides = dict(overrides or {})
    for k in overrides:
        if k not in _CONFIG_KEYS and k not in _PARAM_TYPES:
            raise ConfigError(f"--set {k}", "unknown key")
    preset = overrides.pop("preset", None) or preset or raw.pop("preset", None)
    raw.pop("preset", None)
    merged = {k: _coerce(k, v, where) for k, v in raw.items()}
    merged.update({k: _coerce(k, v, "--set ") for k, v in overrides.items()})

    if preset is not None:
        if preset not in CASES:
            raise ConfigError("preset", f"unknown preset {preset!r}; expected one of {sorted(CASES)}")
        params = CASES[preset]
        name = preset
    else:
        params = ScenarioParams()
        name = "custom"
    pchanges = {k: v for k, v in merged.items() if k in _PARAM_TYPES}
    try:
        params = dataclasses.replace(params, **pchanges)
    except ParamError as exc:
        raise ConfigError(exc.key, str(exc).split(": ", 1)[1]) from None

    topology = merged.get("topology", "two_path")
    if topology not in TOPOLOGIES and not Path(topology).exists():
        raise ConfigError("topology", f"expected one of {TOPOLOGIES} or an existing file, "
                                      f"got {topology!r}")
    mode = merged.get("mode", "both")
    if mode not in MODES:
        raise ConfigError("mode", f"expected one of {MODES}, got {mode!r}")
    traffic = merged.get("traffic", "deterministic")
    if traffic not in TRAFFIC:
        raise ConfigError("traffic", f"expected one of {TRAFFIC}, got {traffic!r}")
    duration = merged.get("duration", 10.0)
    if duration <= 0:
        raise ConfigError("duration", f"must be > 0, got {duration}")
    seeds = merged.get("seeds")
    if "seed" in merged:
        seeds = (merged["seed"],)
    seeds = tuple(seeds) if seeds else (0,)
    for s in seeds:
        if not 0 <= s < 2**64:
            raise ConfigError("seed", f"must be an unsigned 64-bit integer, got {s}")
    return ScenarioConfig(merged.get("name", name), params, topology, mode, traffic,
                          duration, seeds)


def dump_config(config: ScenarioConfig) -> str:
    data = {"name": config.name, "topology": config.topology, "mode": config.mode,
            "traffic": config.traffic, "duration": config.duration,
            "seeds": list(config.seeds)}
    data.update(config.params.to_dict())
    return json.dumps(data, indent=2) + "\n"


# ---- commands ----------------------------------------------------------------

def build_topology(config: ScenarioConfig):
    p = config.params
    if config.topology == "two_path":
        return build_two_path(p.p_loss, p.distance_km, p.link_capacity)
    if config.topology == "butterfly":
        return build_butterfly(p.link_capacity)
    return load_topology(config.topology)


def simulate(config: ScenarioConfig, seed: int | None = None, with_failures: bool = False,
             trace_csv=None) -> dict:
    seed = config.seeds[0] if seed is None else seed
    modes = ("uncoded", "coded") if config.mode == "both" else (config.mode,)
    out = {}
    for mode in modes:
        topo = build_topology(config)
        ctl = Controller(topo)
        rules = set()
        paths = []
        for d in topo.demands:
            rules |= ctl.install_flow(d.flow, config.params, coded=(mode == "coded"))
            paths += [q for qs in ctl.path_sets(d.flow).values() for q in qs]
        fails = inject_failures(topo, config.params.p_failure, seed, paths) if with_failures else ()
        trace = run(topo, config.params, rules, seed, duration=config.duration,
                    traffic=config.traffic, failures=fails, controller=ctl)
        if trace_csv is not None:
            target = Path(trace_csv)
            if len(modes) > 1:
                target = target.with_name(f"{target.stem}_{mode}{target.suffix}")
            trace.write_csv(target)
        out[mode] = collect_metrics(trace, config.duration)
    return out


def _output_path(out: str | None):
    if out is None:
        return None
    p = Path(out)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _write(data: bytes, out: str | None) -> None:
    p = _output_path(out)
    if p is None:
        sys.stdout.write(data.decode("utf-8"))
        sys.stdout.flush()
    else:
        p.write_bytes(data)


def _overrides(pairs) -> dict:
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise ConfigError(f"--set {item}", "expected key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _parse_cases(text: str) -> tuple:
    cases = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        name = tok if tok.startswith("case") else f"case{tok}"
        if name not in CASES:
            raise ConfigError("--cases", f"unknown case {tok!r}")
        cases.append(name)
    return tuple(cases)


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", help="built-in scenario: case1..case4")
    common.add_argument("--config", help="key=value or JSON scenario file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("--format", choices=FORMATS, default="table")
    common.add_argument("--out", help=f"write the report here (relative to ${OUTPUT_DIR_ENV})")

    parser = argparse.ArgumentParser(prog="ncsdn", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    sub.add_parser("analytic", parents=[common], help="evaluate the closed-form model")

    sim = sub.add_parser("simulate", parents=[common], help="run one seeded simulation")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--mode", choices=MODES)
    sim.add_argument("--duration", type=float)
    sim.add_argument("--with-failures", action="store_true",
                     help="sample path failures for this run")
    sim.add_argument("--trace-csv", help="also write the per-packet trace as CSV")

    suite = sub.add_parser("suite", parents=[common], help="reproduce the four-case table")
    suite.add_argument("--cases", default="1,2,3,4")
    suite.add_argument("--seeds", type=int, default=20, help="number of seeds")
    suite.add_argument("--seed", type=int, default=0, help="first seed")
    suite.add_argument("--duration", type=float, default=100.0)
    suite.add_argument("--failure-trials", type=int, default=250)
    suite.add_argument("--jobs", type=int, default=1)
    return parser


def run_command(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.verb == "suite":
            if args.seeds < 1:
                raise ConfigError("--seeds", "must be >= 1")
            seeds = range(args.seed, args.seed + args.seeds)
            report = run_case_suite(seeds, _parse_cases(args.cases), duration=args.duration,
                                    failure_trials=args.failure_trials, jobs=args.jobs)
            _write(emit_report(report, args.format), args.out)
            return 0 if report.passed else 1

        overrides = _overrides(args.set)
        if args.verb == "simulate":
            if args.mode:
                overrides["mode"] = args.mode
            if args.duration is not None:
                overrides["duration"] = args.duration
            if args.seed is not None:
                overrides["seed"] = args.seed
        config = parse_config(args.config, args.preset, overrides)
        if args.verb == "analytic":
            _write(emit_report(evaluate_scenario(config.params), args.format), args.out)
            return 0
        reports = simulate(config, with_failures=args.with_failures, trace_csv=args.trace_csv)
        _write(emit_report(reports, args.format), args.out)
        return 0
    except ConfigError as exc:
        print(f"ncsdn config: {exc}", file=sys.stderr)
        return 2
    except TopologyError as exc:
        print(f"ncsdn simnet: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"ncsdn {args.verb}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
