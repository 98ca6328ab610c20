import csv
import io
import json

import pytest

from ncsdn.analytic import CASES
from ncsdn.cli import ConfigError, dump_config, parse_config, run_command
from ncsdn.harness import SuiteReport
from ncsdn.report import SUITE_HEADER, emit_report


def test_presets_resolve():
    for name, params in CASES.items():
        cfg = parse_config(preset=name)
        assert cfg.params == params and cfg.name == name


def test_unknown_preset():
    with pytest.raises(ConfigError) as exc:
        parse_config(preset="case9")
    assert exc.value.key == "preset"


def test_range_error_names_key():
    with pytest.raises(ConfigError) as exc:
        parse_config(preset="case1", overrides={"p_loss": "1.5"})
    assert exc.value.key == "p_loss"


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"lam": 10, "bogus": 1}))
    with pytest.raises(ConfigError) as exc:
        parse_config(path)
    assert "bogus" in exc.value.key


def test_key_value_file(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("# scenario\npreset = case2\nlam = 500\nmode = coded\n")
    cfg = parse_config(path)
    assert cfg.params.lam == 500 and cfg.params.p_loss == CASES["case2"].p_loss
    assert cfg.mode == "coded"


def test_config_roundtrip(tmp_path):
    cfg = parse_config(preset="case3", overrides={"seeds": "4,5", "duration": "2"})
    path = tmp_path / "round.json"
    path.write_text(dump_config(cfg))
    assert parse_config(path) == cfg


def test_bad_values():
    with pytest.raises(ConfigError):
        parse_config(overrides={"k": "two"})
    with pytest.raises(ConfigError):
        parse_config(overrides={"mode": "hybrid"})
    with pytest.raises(ConfigError):
        parse_config(overrides={"duration": "-1"})


def test_analytic_csv(capsys):
    assert run_command(["analytic", "--preset", "case1", "--format", "csv"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    thr = next(r for r in rows if r["metric"] == "throughput")
    assert float(thr["without_coding"]) == 700 and float(thr["with_coding"]) == 1000


def test_json_and_csv_agree(capsys):
    run_command(["analytic", "--preset", "case2", "--format", "json"])
    data = json.loads(capsys.readouterr().out)
    run_command(["analytic", "--preset", "case2", "--format", "csv"])
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    for r in rows:
        assert float(r["without_coding"]) == data[r["metric"]]["without_coding"]
        assert float(r["with_coding"]) == data[r["metric"]]["with_coding"]


def test_simulate_is_byte_identical(tmp_path, monkeypatch):
    monkeypatch.setenv("NCSDN_OUTPUT_DIR", str(tmp_path))
    args = ["simulate", "--preset", "case1", "--seed", "9", "--duration", "0.3",
            "--format", "csv"]
    assert run_command(args + ["--out", "a.csv"]) == 0
    assert run_command(args + ["--out", "b.csv"]) == 0
    a, b = (tmp_path / "a.csv").read_bytes(), (tmp_path / "b.csv").read_bytes()
    assert a == b and a.startswith(b"metric,uncoded,coded\n")


def test_simulate_trace_csv(tmp_path):
    trace = tmp_path / "t.csv"
    assert run_command(["simulate", "--preset", "case1", "--mode", "coded", "--duration", "0.05",
                        "--trace-csv", str(trace), "--out", str(tmp_path / "r.txt")]) == 0
    assert trace.read_text().startswith("flow,sink,generation")


def test_simulate_butterfly(capsys):
    code = run_command(["simulate", "--set", "topology=butterfly", "--set", "k=3",
                        "--set", "generation_size=2", "--set", "field=gf2",
                        "--set", "p_loss=0", "--set", "p_failure=0",
                        "--set", "heaviest_path_fraction=0.5", "--duration", "0.1",
                        "--format", "json"])
    assert code == 0
    data = json.loads(capsys.readouterr().out)
    assert data["coded"]["packet_loss"] == 0 and data["uncoded"]["packet_loss"] == 0


def test_errors_exit_2(capsys):
    assert run_command(["analytic", "--set", "p_loss=2"]) == 2
    assert "p_loss" in capsys.readouterr().err
    assert run_command(["suite", "--cases", "9"]) == 2


def test_empty_suite_csv_is_header_only():
    text = emit_report(SuiteReport(), "csv").decode()
    assert text == ",".join(SUITE_HEADER) + "\n"


def test_unknown_format():
    with pytest.raises(ValueError, match="csv, json, table"):
        emit_report(SuiteReport(), "xml")


def test_suite_exit_status(capsys):
    code = run_command(["suite", "--cases", "1", "--seeds", "1", "--duration", "0.2",
                        "--failure-trials", "5", "--format", "csv"])
    out = capsys.readouterr().out
    assert out.startswith(",".join(SUITE_HEADER))
    assert code in (0, 1)
