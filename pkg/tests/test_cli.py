import csv
import json
import subprocess
import sys

import pytest

from whype.channel import PackageGeometry
from whype.cli import config_hash, main, parse_range, parse_rx_sweep, resolve_seed


def rows(path):
    with open(path) as f:
        return list(csv.DictReader(f))


def read_all(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


SMALL_EXP = ["--class-count", "120", "--classes", "20", "--episodes", "20", "--rx-count", "4",
             "--capacity", "8", "--shots", "5"]


def test_parse_helpers():
    assert len(parse_range("0:0.5:0.02")) == 26
    assert parse_range("0:0.5:0.02")[-1] == 0.5
    assert parse_rx_sweep("4:64") == [4, 8, 16, 32, 64]
    assert parse_rx_sweep("2:8:3") == [2, 5, 8]
    for bad in ("1:2", "0:1:0", "1:0:1", "a:b:c"):
        with pytest.raises(ValueError):
            parse_range(bad)
    with pytest.raises(ValueError):
        parse_rx_sweep("0:4")
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})


def test_seed_resolution(monkeypatch):
    monkeypatch.delenv("WHYPE_SEED", raising=False)
    assert resolve_seed(None) == 0
    monkeypatch.setenv("WHYPE_SEED", "17")
    assert resolve_seed(None) == 17
    assert resolve_seed(3) == 3
    monkeypatch.setenv("WHYPE_SEED", "x")
    with pytest.raises(ValueError):
        resolve_seed(None)


def test_optimize_with_geometry_file(tmp_path, capsys):
    geom = tmp_path / "g.json"
    PackageGeometry.default(3, 8).save(geom)
    out = tmp_path / "out"
    rc = main(["optimize", "--geometry", str(geom), "--method", "exhaustive", "--tx", "3", "--rx", "8",
               "--out", str(out), "--workers", "2"])
    assert rc == 0
    assert "average BER" in capsys.readouterr().out
    names = set(p.name for p in out.iterdir())
    assert {"assignment.json", "ber.csv", "channel.csv", "ber.csv.meta.json"} <= names
    ber = rows(out / "ber.csv")
    assert len(ber) == 9 and ber[-1]["rx"] == "avg"
    meta = json.loads((out / "ber.csv.meta.json").read_text())
    assert meta["seed"] == 0 and len(meta["config_hash"]) == 16
    assert len(json.loads((out / "assignment.json").read_text())) == 3


def test_optimize_rerun_is_byte_identical(tmp_path):
    args = ["optimize", "--tx", "2", "--rx", "3", "--jitter", "0.5", "--seed", "4"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b"), "--workers", "2"])
    assert read_all(tmp_path / "a") == read_all(tmp_path / "b")


def test_optimize_roundtrip_through_written_files(tmp_path):
    main(["optimize", "--tx", "2", "--rx", "2", "--out", str(tmp_path / "a")])
    rc = main(["optimize", "--channel", str(tmp_path / "a" / "channel.csv"),
               "--assignment", str(tmp_path / "a" / "assignment.json"), "--out", str(tmp_path / "b")])
    assert rc == 0
    assert (tmp_path / "a" / "ber.csv").read_text() == (tmp_path / "b" / "ber.csv").read_text()


def test_exhaustive_refused_for_five_tx(tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["optimize", "--method", "exhaustive", "--tx", "5", "--rx", "2", "--out", str(out)])
    assert rc != 0
    err = capsys.readouterr().err
    assert "greedy" in err and "random" in err
    assert not out.exists()


def test_validation_errors_write_nothing(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["optimize", "--channel", str(tmp_path / "missing.csv"), "--out", str(out)]) != 0
    assert "not found" in capsys.readouterr().err
    assert main(["experiment", "few-shot", "--bundle", "2", "--out", str(out)] + SMALL_EXP) != 0
    assert main(["experiment", "few-shot", "--classes", "100", "--rx-count", "2", "--capacity", "10",
                 "--out", str(out)]) != 0
    assert "100" in capsys.readouterr().err
    assert main(["cost", "--rx", "0", "--out", str(out)]) != 0
    assert not out.exists()


def test_env_seed_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("WHYPE_SEED", "9")
    main(["optimize", "--tx", "2", "--rx", "2", "--jitter", "0.3", "--out", str(tmp_path / "a")])
    meta = json.loads((tmp_path / "a" / "ber.csv.meta.json").read_text())
    assert meta["seed"] == 9
    monkeypatch.delenv("WHYPE_SEED")
    main(["optimize", "--tx", "2", "--rx", "2", "--jitter", "0.3", "--seed", "9", "--out", str(tmp_path / "b")])
    assert read_all(tmp_path / "a") == read_all(tmp_path / "b")


def test_few_shot_permuted(tmp_path):
    out = tmp_path / "out"
    rc = main(["experiment", "few-shot", "--bundle", "3", "--mode", "permuted", "--channel-model", "ideal",
               "--traces", "2", "--out", str(out)] + SMALL_EXP)
    assert rc == 0
    res = rows(out / "few_shot.csv")
    assert len(res) == 1 and res[0]["bundle_size"] == "3" and res[0]["mode"] == "permuted"
    assert float(res[0]["accuracy"]) >= 0.95
    assert len(rows(out / "traces.csv")) == 6


def test_few_shot_bundle_list_and_ber_report(tmp_path):
    ber = tmp_path / "ber.csv"
    ber.write_text("rx,ber\n0,0.01\n1,0.02\n2,0.0\n3,0.1\navg,0.0325\n")
    out = tmp_path / "out"
    rc = main(["experiment", "few-shot", "--bundle", "1,3,5", "--mode", "baseline", "--channel-model", "wireless",
               "--ber-report", str(ber), "--out", str(out)] + SMALL_EXP)
    assert rc == 0
    assert [r["bundle_size"] for r in rows(out / "few_shot.csv")] == ["1", "3", "5"]


def test_sweep_ber_rows(tmp_path):
    out = tmp_path / "out"
    assert main(["experiment", "sweep-ber", "--points", "0:0.5:0.02", "--out", str(out)] + SMALL_EXP) == 0
    res = rows(out / "ber_sweep.csv")
    assert len(res) == 26
    assert float(res[0]["ber"]) == 0.0 and float(res[-1]["ber"]) == 0.5


def test_continual_rows(tmp_path):
    out = tmp_path / "out"
    rc = main(["experiment", "continual", "--sessions", "5", "--initial-classes", "16", "--per-session", "16",
               "--queries", "20", "--rx-count", "4", "--capacity", "32", "--class-count", "120",
               "--out", str(out)])
    assert rc == 0
    assert len(rows(out / "continual.csv")) == 5


def test_cost_outputs(tmp_path):
    out = tmp_path / "a"
    assert main(["cost", "--tx", "3", "--rx", "8", "--out", str(out)]) == 0
    comp = {r["metric"]: r for r in rows(out / "cost_compare.csv")}
    assert float(comp["latency_ns"]["wireless"]) == 51.2
    assert float(comp["throughput_gbps"]["wired"]) == 32.0
    assert "interconnect" in (out / "cost_breakdown.csv").read_text()
    out = tmp_path / "b"
    assert main(["cost", "--tx", "3", "--rx", "64", "--out", str(out)]) == 0
    comp = {r["metric"]: r for r in rows(out / "cost_compare.csv")}
    assert float(comp["throughput_gbps"]["wireless"]) == 1920.0


def test_cost_sweep(tmp_path):
    out = tmp_path / "out"
    assert main(["cost", "--sweep-rx", "4:64", "--out", str(out)]) == 0
    sweep = rows(out / "cost_sweep.csv")
    assert [r["N"] for r in sweep] == ["4", "8", "16", "32", "64"]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "whype", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
