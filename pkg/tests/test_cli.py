import json

import numpy as np
import pytest

from vlcmvr import io
from vlcmvr.cli import AGGREGATE_FIELDS, int_list, main, split_overrides, UsageError
from vlcmvr.compare import check_cap
from vlcmvr.config import ConfigError, config_digest, load_config, resolved
from vlcmvr.oracle import InstanceTooLargeError
from vlcmvr.sim import preset, simulate

SHORT = ["--duration", "1.5"]


def body(path):
    """CSV rows without the wall-time column, which is the only non-deterministic field."""
    _, rows = io.read_csv(path)
    return [{k: v for k, v in r.items() if k != "wall_time_s"} for r in rows]


def test_int_list():
    assert int_list("0-3") == [0, 1, 2, 3]
    assert int_list("5,10, 15") == [5, 10, 15]
    assert int_list("") == []


def test_split_overrides():
    assert split_overrides(["--solver.step", "0.1", "--mobility.v_max=2"]) == {"solver.step": 0.1, "mobility.v_max": 2}
    with pytest.raises(UsageError):
        split_overrides(["--bogus"])
    with pytest.raises(UsageError):
        split_overrides(["--solver.step"])


def test_config_layers(tmp_path):
    f = tmp_path / "s.yaml"
    f.write_text("scenario: room4ap\nusers: 7\nsolver:\n  step: 0.02\nmobility:\n  v_max: 1.5\n")
    cfg = load_config(f, overrides={"solver.max_iterations": 300, "T": 2})
    assert (cfg.users, cfg.T, cfg.room.depth) == (7, 2, 8.0)
    assert cfg.solver.step == 0.02 and cfg.solver.max_iterations == 300
    assert cfg.mobility.v_max == 1.5 and cfg.mobility.v_min == 0.0
    assert load_config(f, scenario="room2ap").room.depth == 4.0
    with pytest.raises(ConfigError):
        load_config(overrides={"colour": "red"})
    with pytest.raises(ConfigError):
        load_config(overrides={"solver.nope": 1})
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


def test_digest_tracks_every_field():
    a = preset("room2ap")
    assert config_digest(a) == config_digest(preset("room2ap"))
    assert config_digest(a) != config_digest(a.replace(seed=1))
    json.dumps(resolved(a))


def test_csv_round_trip(tmp_path):
    res = simulate(preset("room2ap", users=3, duration=1.5, seed=9))
    path = io.write_metrics(tmp_path / "m.csv", res)
    meta, rows = io.read_csv(path)
    assert meta["seed"] == 9 and meta["config"]["users"] == 3
    assert meta["config_digest"] == config_digest(res.config)
    assert [float(r["throughput_bps"]) for r in rows] == [r.throughput_bps for r in res.records]


def test_run_writes_files_deterministically(tmp_path, capsys):
    args = ["run", "--scenario", "room2ap", "--users", "4", "--T", "2", "--seed", "7", *SHORT]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a, b = tmp_path / "a" / "u4_T2_s7.csv", tmp_path / "b" / "u4_T2_s7.csv"
    assert body(a) == body(b)
    summary = json.loads((tmp_path / "a" / "u4_T2_s7.json").read_text())
    for key in ("total_objective", "mean_throughput_bps", "handovers", "steps", "config_digest"):
        assert key in summary
    assert summary["config"]["seed"] == 7
    assert "u4_T2_s7" in capsys.readouterr().out


def test_run_override_reaches_config(tmp_path):
    assert main(["run", *SHORT, "--users", "2", "--out", str(tmp_path), "--solver.max_iterations", "5"]) == 0
    summary = json.loads(next(tmp_path.glob("*.json")).read_text())
    assert summary["config"]["solver"]["max_iterations"] == 5
    assert summary["mean_iterations"] <= 5


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("VLCMVR_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["run", *SHORT, "--users", "2"]) == 0
    assert (tmp_path / "env" / "u2_T1_s0.csv").exists()


def test_usage_errors(tmp_path, capsys):
    missing = tmp_path / "nowhere.yaml"
    assert main(["run", "--config", str(missing), "--out", str(tmp_path)]) == 2
    assert str(missing) in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["run", "--T", "0"])
    assert exc.value.code == 2
    assert main(["run", "--out", str(tmp_path), "--whatever", "1"]) == 2
    assert main(["run", "--out", str(tmp_path), "--beta", "0.5"]) == 2
    assert main(["run", "--out", str(tmp_path), "--beta=0.5"]) == 2
    assert main(["run", "--out", str(tmp_path), "--solver.step", "-1"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_sweep_aggregate_matches_per_run_files(tmp_path):
    out = tmp_path / "sw"
    rc = main(["sweep", *SHORT, "--users", "2,3", "--T", "1-2", "--seeds", "0-1", "--out", str(out)])
    assert rc == 0
    runs = sorted(out.glob("u*_T*_s*.json"))
    assert len(runs) == 8 and len(list(out.glob("u*_T*_s*.csv"))) == 8
    meta, rows = io.read_csv(out / "aggregate.csv")
    assert tuple(rows[0]) == AGGREGATE_FIELDS and len(rows) == 4
    assert meta["sweep"] == {"users": [2, 3], "T": [1, 2], "seeds": [0, 1]}
    for row in rows:
        group = [json.loads((out / f"u{row['users']}_T{row['T']}_s{s}.json").read_text()) for s in (0, 1)]
        assert float(row["mean_throughput"]) == pytest.approx(np.mean([g["mean_throughput_bps"] for g in group]))
        assert float(row["mean_objective"]) == pytest.approx(np.mean([g["total_objective"] for g in group]))
        assert int(row["total_handovers"]) == sum(g["handovers"] for g in group)
        assert int(row["runs"]) == 2 and int(row["failures"]) == 0


def test_sweep_empty_seed_list(tmp_path):
    assert main(["sweep", "--users", "2", "--T", "1", "--seeds", "", "--out", str(tmp_path)]) == 2


def test_oracle_compare_single_user_gap_zero(tmp_path):
    assert main(["oracle-compare", "--users", "1", "--steps", "20", "--out", str(tmp_path), "--max-gap", "0"]) == 0
    meta, rows = io.read_csv(tmp_path / "oracle_u1_T1_s0.csv")
    assert len(rows) == 20 and all(float(r["gap"]) == 0.0 for r in rows)
    assert meta["max_gap"] == 0.0
    assert set(rows[0]) == {"instance_id", "U_oracle", "U_mvr", "gap", "enumerated_count", "wall_time"}


def test_oracle_compare_refuses_over_cap(tmp_path, capsys):
    assert main(["oracle-compare", "--users", "5", "--T", "3", "--cap", "1000", "--out", str(tmp_path)]) == 2
    assert "cap" in capsys.readouterr().err
    # per-step cap arithmetic: 3 APs, 4 users, T = 3 is 3^12 per step, under 1e7
    cfg = preset("room2ap", users=4, T=3, ap_positions=[[2, 2], [4, 2], [6, 2]])
    assert check_cap(cfg) == 3**12
    with pytest.raises(InstanceTooLargeError):
        check_cap(cfg.replace(users=5))


def test_verify_quick(capsys):
    assert main(["verify", "--quick"]) == 0
    out = capsys.readouterr().out
    assert "expected counterexample" in out and "FAIL" not in out
    assert main(["verify", "--quick", "--solver.step", "1"]) == 2
