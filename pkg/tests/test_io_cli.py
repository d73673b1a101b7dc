import csv
import json

import numpy as np
import pytest

from pcflow import cli
from pcflow.config import ENV_OUTPUT_DIR, ConfigError, RunConfig, from_mapping, load_config
from pcflow.field import TorusChart
from pcflow.flow import CSV_FIELDS, FlowState, run
from pcflow.initial_data import DataSpec, make_hermitian_symplectic, make_pluriclosed_rank_one
from pcflow.persist import (HEADER, FormatError, aux_path, build_id, dumps, read_diagnostics_csv,
                            read_snapshot, write_diagnostics_csv, write_snapshot)


@pytest.fixture(autouse=True)
def no_env_output(monkeypatch):
    monkeypatch.delenv(ENV_OUTPUT_DIR, raising=False)


@pytest.fixture(scope="module")
def short_run():
    chart = TorusChart(2, 8)
    hs = make_hermitian_symplectic(chart, DataSpec(kind="hermitian_symplectic", epsilon=0.05))
    return run(FlowState(0.0, hs.omega, hs.phi), 0.002, richardson=False)


# ----------------------------------------------------------------- config

@pytest.mark.parametrize("raw, name", [
    ({"dim": 4}, "dim"),
    ({"dim": 2.0}, "dim"),
    ({"grid": 7}, "grid"),
    ({"grid": 128}, "grid"),
    ({"flow": {"horizon": -1.0}}, "flow.horizon"),
    ({"flow": {"safety": float("nan")}}, "flow.safety"),
    ({"flow": {"probe_times": [0.5]}}, "flow.probe_times"),
    ({"flow": {"dealias": 1}}, "flow.dealias"),
    ({"flow": {"monitor_interval": 0}}, "flow.monitor_interval"),
    ({"data": {"epsilon": 0}}, "data.epsilon"),
    ({"data": {"kind": "spherical"}}, "data.kind"),
    ({"data": {"b": [[1, 0], [0, 1], [0, 0]]}}, "data.b"),
    ({"data": {"k": [1.5, 0]}}, "data.k"),
    ({"data": {"seed": "x"}}, "data.seed"),
    ({"tolerances": {"no_such_case": 1e-3}}, "tolerances.no_such_case"),
    ({"tolerances": {"pluriclosed": -1}}, "tolerances.pluriclosed"),
    ({"report": {"bound": 0}}, "report.bound"),
    ({"verify": {"probe_time": 0}}, "verify.probe_time"),
    ({"colour": 1}, "colour"),
    ({"flow": {"speed": 1}}, "flow.speed"),
    ({"extras": {"x": 1}}, "extras"),
])
def test_config_errors_are_named(raw, name):
    with pytest.raises(ConfigError) as info:
        from_mapping(raw)
    assert info.value.field == name


def test_config_file_round_trip(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("""
dim = 2
grid = 8

[data]
kind = "hs"
epsilon = 0.02
b = [[1.0, 0.0], [0.0, 1.0]]

[flow]
horizon = 0.05
probe_times = [0.01]
monitor_interval = 0.005

[tolerances]
pluriclosed = 1e-9
""")
    cfg = load_config(path)
    assert cfg.data.kind == "hermitian_symplectic"
    assert cfg.data.b == (1 + 0j, 1j)
    assert cfg.probe_times == (0.01,)
    r = cfg.resolved()
    assert r["tolerances"] == {"pluriclosed": 1e-9}
    assert r["data"]["b"] == [[1.0, 0.0], [0.0, 1.0]]
    json.dumps(r)  # plain JSON
    bad = tmp_path / "bad.toml"
    bad.write_text("dim = = 2")
    with pytest.raises(ConfigError, match="invalid TOML"):
        load_config(bad)


def test_overrides_and_env(monkeypatch):
    cfg = RunConfig().with_overrides(grid=8, data_kind="random", data_epsilon=0.1, horizon=None)
    assert cfg.grid == 8 and cfg.data.kind == "random_hermitian" and cfg.horizon == 0.2
    with pytest.raises(ConfigError):
        RunConfig().with_overrides(data_epsilon=-1.0)
    assert cfg.output_path() == "pcflow-out"
    monkeypatch.setenv(ENV_OUTPUT_DIR, "/tmp/elsewhere")
    assert cfg.output_path() == "/tmp/elsewhere"


# ---------------------------------------------------------------- persist

def test_csv_round_trip(tmp_path, short_run):
    path = write_diagnostics_csv(tmp_path / "d.csv", short_run.records)
    with open(path) as fh:
        assert tuple(next(csv.reader(fh))) == CSV_FIELDS
    back = read_diagnostics_csv(path)
    assert len(back) == len(short_run.records)
    for a, b in zip(short_run.records, back):
        assert np.array_equal(np.array(a.row()), np.array(b.row()), equal_nan=True)
        assert a.max_ric_s == b.max_ric_s
    aux_path(path).unlink()
    assert np.isnan(read_diagnostics_csv(path)[0].max_ric_s)


@pytest.mark.parametrize("mutate, msg", [
    (lambda lines: ["t,dt"] + lines[1:], "header"),
    (lambda lines: lines[:1], "no data rows"),
    (lambda lines: lines + ["1,2,3"], "columns"),
    (lambda lines: lines[:1] + [lines[1].replace("0.0", "zero", 1)] + lines[2:], "could not"),
    (lambda lines: lines[:1] + [lines[2], lines[1]] + lines[3:], "strictly increasing"),
    (lambda lines: [], "empty"),
])
def test_malformed_csv(tmp_path, short_run, mutate, msg):
    path = write_diagnostics_csv(tmp_path / "d.csv", short_run.records)
    aux_path(path).unlink()
    lines = path.read_text().splitlines()
    kept = mutate(lines)
    path.write_text("\n".join(kept) + "\n" if kept else "")
    with pytest.raises(FormatError, match=msg):
        read_diagnostics_csv(path)
    assert cli.main(["report", str(path)]) == cli.EXIT_USAGE


def test_snapshot_round_trip(tmp_path, short_run):
    state = short_run.final
    p = write_snapshot(tmp_path / "s.pcf", state)
    back = read_snapshot(p)
    assert back.t == state.t
    assert np.array_equal(back.metric.g.data, state.metric.g.data)
    assert np.array_equal(back.phi.data, state.phi.data)
    assert write_snapshot(tmp_path / "s2.pcf", back).read_bytes() == p.read_bytes()
    plain = read_snapshot(write_snapshot(tmp_path / "p.pcf", FlowState(0.0, state.metric)))
    assert plain.phi is None


def _corrupt(blob, where):
    b = bytearray(blob)
    if where == "magic":
        b[0:8] = b"NOTAPCF!"
    elif where == "version":
        b[8] = 9
    elif where == "flags":
        b[HEADER.size - 4] = 6
    elif where == "payload":
        b[HEADER.size + 5] ^= 0xFF
    elif where == "truncate":
        del b[-10:]
    elif where == "tiny":
        del b[10:]
    return bytes(b)


@pytest.mark.parametrize("where, msg", [("magic", "bad magic"), ("version", "version"),
                                        ("flags", "flags"), ("payload", "checksum"),
                                        ("truncate", "size"), ("tiny", "truncated")])
def test_snapshot_corruption(tmp_path, short_run, where, msg):
    p = write_snapshot(tmp_path / "s.pcf", short_run.final)
    p.write_bytes(_corrupt(p.read_bytes(), where))
    with pytest.raises(FormatError, match=msg):
        read_snapshot(p)


def test_json_helpers():
    assert build_id().startswith("pcflow ")
    text = dumps({"b": float("nan"), "a": [1.0, float("inf")]})
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text)["b"] is None


# -------------------------------------------------------------------- CLI

def test_usage_errors(capsys):
    assert cli.main([]) == cli.EXIT_USAGE
    assert cli.main(["verify", "--case", "nope"]) == cli.EXIT_USAGE
    assert cli.main(["run", "--grid", "7"]) == cli.EXIT_USAGE
    assert cli.main(["run", "--data", "spherical"]) == cli.EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_verify_dimension_guard(tmp_path, capsys):
    code = cli.main(["verify", "--case", "ev_torsion_sq_dim2", "--dim", "3", "--out", str(tmp_path)])
    assert code == cli.EXIT_USAGE
    assert "requires --dim 2" in capsys.readouterr().err


def test_verify_flat(tmp_path, capsys):
    code = cli.main(["verify", "--data", "flat", "--grid", "8", "--out", str(tmp_path)])
    assert code == cli.EXIT_OK
    report = json.loads((tmp_path / "verify.json").read_text())
    assert report["all_pass"] and report["config"]["data"]["kind"] == "flat"
    assert all(c["rel_residual"] < 1e-14 for c in report["cases"])
    assert capsys.readouterr().out.count("PASS") == len(report["cases"])


def test_verify_rank_one_all(tmp_path):
    code = cli.main(["verify", "--dim", "2", "--grid", "12", "--case", "all", "--data", "rank_one",
                     "--out", str(tmp_path)])
    assert code == cli.EXIT_OK


def test_verify_failure_writes_report(tmp_path):
    # a random metric is not pluriclosed
    code = cli.main(["verify", "--data", "random", "--epsilon", "0.1", "--grid", "8",
                     "--case", "pluriclosed", "--out", str(tmp_path)])
    assert code == cli.EXIT_FAIL
    assert not json.loads((tmp_path / "verify.json").read_text())["all_pass"]


def test_verify_tolerance_override(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("grid = 8\n[data]\nkind = \"random\"\nepsilon = 0.1\n"
                   "[tolerances]\npluriclosed = 10.0\n")
    assert cli.main(["verify", "--config", str(cfg), "--case", "pluriclosed",
                     "--out", str(tmp_path)]) == cli.EXIT_OK


def test_run_flat_and_report(tmp_path, capsys):
    out = tmp_path / "flat"
    assert cli.main(["run", "--data", "flat", "--grid", "8", "--horizon", "0.01",
                     "--out", str(out)]) == cli.EXIT_OK
    rows = read_diagnostics_csv(out / "diagnostics.csv")
    for name in ("max_curv", "max_torsion_sq", "max_phi_sq", "d1", "d2", "scaled1", "scaled2"):
        assert all(getattr(r, name) == 0 for r in rows)
    meta = json.loads((out / "run.json").read_text())
    assert meta["status"] == "completed" and meta["snapshots"] == ["final.pcf"]
    capsys.readouterr()
    assert cli.main(["report", str(out / "diagnostics.csv")]) == cli.EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert rep["estimates"]["smoothing"]["status"] == "skipped: K=0"


def test_run_hs_and_report(tmp_path):
    out = tmp_path / "hs"
    assert cli.main(["run", "--data", "hs", "--grid", "8", "--epsilon", "0.02", "--horizon",
                     "0.004", "--monitor-interval", "0.001", "--out", str(out)]) == cli.EXIT_OK
    phi = [r.max_phi_sq for r in read_diagnostics_csv(out / "diagnostics.csv")]
    assert all(b < a for a, b in zip(phi, phi[1:]))
    assert cli.main(["report", str(out / "diagnostics.csv"), "--out",
                     str(out / "report.json")]) == cli.EXIT_OK
    est = json.loads((out / "report.json").read_text())["estimates"]
    assert est["phi_monotone"]["pass"] is True
    assert est["smoothing"]["pass"] is True
    assert est["torsion_bound"]["status"] == "evaluated"


def test_run_breakdown_exit_code(tmp_path):
    out = tmp_path / "boom"
    # the first step is clipped to the horizon; ten halvings cannot make it safe
    code = cli.main(["run", "--data", "rank_one", "--grid", "8", "--safety", "100000",
                     "--horizon", "100", "--out", str(out)])
    assert code == cli.EXIT_BREAKDOWN
    assert json.loads((out / "run.json").read_text())["status"] == "positivity breakdown"
    assert len(read_diagnostics_csv(out / "diagnostics.csv")) == 1


def test_run_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_OUTPUT_DIR, str(tmp_path / "env"))
    assert cli.main(["run", "--data", "flat", "--grid", "4", "--horizon", "0.01",
                     "--out", str(tmp_path / "ignored")]) == cli.EXIT_OK
    assert (tmp_path / "env" / "diagnostics.csv").exists()
    assert not (tmp_path / "ignored").exists()


def test_resume_rejects_mismatch(tmp_path):
    chart = TorusChart(2, 4)
    snap = write_snapshot(tmp_path / "s.pcf", FlowState(0.0, make_pluriclosed_rank_one(chart)))
    assert cli.main(["run", "--grid", "8", "--resume", str(snap), "--out",
                     str(tmp_path / "o")]) == cli.EXIT_USAGE
    (tmp_path / "junk.pcf").write_bytes(b"junk")
    assert cli.main(["run", "--grid", "4", "--resume", str(tmp_path / "junk.pcf"), "--out",
                     str(tmp_path / "o")]) == cli.EXIT_USAGE


def test_backend_flag(tmp_path):
    assert cli.main(["run", "--backend", "python", "--data", "flat", "--grid", "4",
                     "--horizon", "0.01", "--out", str(tmp_path)]) == cli.EXIT_OK
    from pcflow import backend
    backend.use(backend.available()[-1])
