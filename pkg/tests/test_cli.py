import csv
import json
import math

import pytest

from xxz_tba import cli
from xxz_tba.errors import ConfigError
from xxz_tba.report import CheckReport


def rows(path):
    with open(path) as fh:
        head = fh.readline()
        assert head == "#schema=1\n"
        return list(csv.DictReader(fh))


def test_minimal_config_defaults():
    cfg = cli.parse_config('{"mode": "free-energy", "p0": "5", "J": 1.0, "beta": 2.0}')
    assert cfg.grid_extent == 40.0 and cfg.grid_points is None and cfg.k == (2, 3) and cfg.N == 8
    assert cfg.betas() == [2.0]


@pytest.mark.parametrize("text, field", [
    ('{"mode": "correlation", "p0": "2", "J": 1, "beta": 1}', "p0"),
    ('{"mode": "free-energy", "p0": "24/0", "J": 1, "beta": 1}', "p0"),
    ('{"mode": "free-energy", "p0": "5", "J": 1, "beta": 1, "colour": 3}', "unknown keys"),
    ('{"mode": "correlation", "p0": "24/5", "J": 1, "beta": 1}', "p0"),
    ('{"mode": "correlation", "p0": "5", "J": -1, "beta": 1}', "J"),
    ('{"mode": "free-energy", "p0": "5", "J": 1, "beta": -1}', "beta"),
    ('{"mode": "free-energy", "p0": "5", "J": 1}', "beta"),
    ('{"mode": "sweep", "p0": "5", "J": 1, "beta": 1}', "beta_range"),
    ('{"mode": "tea", "p0": "5"}', "mode"),
    ('{"mode": "free-energy", "p0": "5", "J": 1, "beta": 1, "grid_points": 100}', "grid_points"),
    ('{"mode": "free-energy", "p0": "5", "J": 1, "beta_range": "1:2"}', "beta_range"),
    ('{"mode": "free-energy", "p0": "5", "J": 1, "beta": 1, "N": "eight"}', "N"),
])
def test_rejections_name_the_field(text, field):
    with pytest.raises(ConfigError) as e:
        cli.parse_config(text)
    assert field in str(e.value)


def test_json_error_location():
    with pytest.raises(ConfigError) as e:
        cli.parse_config('{"mode": "free-energy",\n "p0": }')
    assert "line 2" in str(e.value)


def test_beta_range_forms():
    r = cli.parse_beta_range("0.5:50:12:geom")
    vals = r.values()
    assert len(vals) == 12 and vals[0] == 0.5 and math.isclose(vals[-1], 50.0)
    assert math.isclose(vals[1] / vals[0], vals[2] / vals[1])
    lin = cli.parse_beta_range({"start": 1, "stop": 3, "count": 3})
    assert lin.values() == [1.0, 2.0, 3.0]


def test_free_fermion_row(tmp_path, capsys):
    out = tmp_path / "ff.csv"
    rc = cli.main(["--mode", "free-fermion", "--p0", "2", "--J", "1", "--beta", repr(math.pi), "--out", str(out)])
    assert rc == 0
    (row,) = rows(out)
    assert abs(float(row["inv_xi3"]) - 2 * math.asinh(1.0)) < 1e-15
    assert "inv_xi3=" in capsys.readouterr().out


def test_ts_check(tmp_path):
    out = tmp_path / "ts.csv"
    assert cli.main(["--mode", "ts-check", "--p0", "24/5", "--out", str(out)]) == 0
    assert all(r["status"] == "pass" for r in rows(out))


def test_finite_check(tmp_path):
    out = tmp_path / "fc.csv"
    assert cli.main(["--mode", "finite-check", "--p0", "5", "--N", "8", "--u", "-0.05", "--k", "1,2",
                     "--out", str(out)]) == 0
    names = [r["check"] for r in rows(out)]
    assert "k1:tsystem1" in names and "k2:inversion" in names


def test_config_file_with_flag_override(tmp_path):
    conf = tmp_path / "run.json"
    conf.write_text(json.dumps({"mode": "free-energy", "p0": "5", "J": 1.0, "beta": 0.5, "out": str(tmp_path / "a.csv")}))
    out = tmp_path / "b.csv"
    assert cli.main([str(conf), "--beta", "1.0", "--out", str(out)]) == 0
    (row,) = rows(out)
    assert float(row["beta"]) == 1.0
    assert abs(float(row["f"]) + 0.9855497450152) < 1e-10
    assert int(row["iterations"]) > 0 and float(row["residual"]) < 1e-12


def test_exit_code_config(tmp_path, capsys):
    assert cli.main(["--mode", "correlation", "--p0", "2", "--J", "1", "--beta", "1"]) == 1
    assert "p0" in capsys.readouterr().err
    assert cli.main([str(tmp_path / "missing.json")]) == 1


def test_exit_code_solver(tmp_path, capsys):
    rc = cli.main(["--mode", "free-energy", "--p0", "5", "--J", "1", "--beta", "1", "--tol", "1e-30",
                   "--grid-points", "201", "--out", str(tmp_path / "x.csv")])
    assert rc == 2
    assert "last residuals" in capsys.readouterr().err


def test_exit_code_verification(tmp_path, monkeypatch):
    def failing(ts, raise_on_failure=True):
        rep = CheckReport()
        rep.add("forced", [], 1.0, 0.5)
        return rep

    monkeypatch.setattr("xxz_tba.rational_ts.validate_sequences", failing)
    assert cli.main(["--mode", "ts-check", "--p0", "5", "--out", str(tmp_path / "t.csv")]) == 3


def test_correlation_is_deterministic(tmp_path):
    args = ["--mode", "correlation", "--p0", "4", "--J", "1", "--beta", "2", "--k", "2,3"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    got = rows(a)
    assert [r["k"] for r in got] == ["2", "3"]
    assert all(float(r["residual"]) < 1e-10 for r in got)


def test_sweep_pool_matches_serial(tmp_path):
    base = ["--mode", "sweep", "--p0", "3", "--J", "1", "--beta-range", "1:3:3"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(base + ["--out", str(a)]) == 0
    assert cli.main(base + ["--workers", "2", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.slow
def test_sweep_spec_example(tmp_path):
    out = tmp_path / "sweep.csv"
    assert cli.main(["--mode", "sweep", "--p0", "5", "--J", "1", "--beta-range", "0.5:50:12:geom",
                     "--out", str(out)]) == 0
    got = rows(out)
    assert len(got) == 24
    assert list(got[0]) == ["beta", "J", "p0", "k", "f", "xi_k", "xi_k_over_beta", "zeta_1", "zeta_2", "zeta_3",
                            "iterations", "residual"]
    for k in ("2", "3"):
        curve = [float(r["xi_k_over_beta"]) for r in got if r["k"] == k]
        assert len(curve) == 12
        assert all(b < a for a, b in zip(curve, curve[1:]))
    assert all(float(r["residual"]) < 1e-10 for r in got)
