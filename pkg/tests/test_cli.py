import csv
import json
import math

import numpy as np
import pytest

from rabi_limit import cli


def _read(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _run(args, tmp_path, name="out"):
    out = tmp_path / name
    code = cli.main(list(args) + ["--out", str(out)])
    return code, out


def test_evolve_zero_coupling(tmp_path):
    code, out = _run(["evolve", "--lam", "0", "--alpha", "3"], tmp_path)
    assert code == 0
    raw = (out / "evolve.csv").read_bytes()
    assert b"\r" not in raw
    assert raw.splitlines()[0] == b"t,W_q,W_sc,W_fbrwa,S,q,p"
    rows = _read(out / "evolve.csv")
    assert all(float(r["W_q"]) == 1.0 for r in rows)


def test_evolve_vacuum(tmp_path):
    code, out = _run(["evolve", "--lam", "0.1", "--alpha", "0", "--n", "0"], tmp_path)
    assert code == 0
    d = np.loadtxt(out / "evolve.csv", delimiter=",", skiprows=1)
    np.testing.assert_allclose(d[:, 1], np.cos(0.2 * d[:, 0]), atol=1e-12)


def test_evolve_envelope(tmp_path):
    code, out = _run(["evolve", "--lam", "0.0005", "--n", "1", "--route", "displaced"], tmp_path)
    assert code == 0
    d = np.loadtxt(out / "evolve.csv", delimiter=",", skiprows=1)
    assert np.max(np.abs(d[:, 1] - d[:, 3])) < 1e-3
    # quadratures of the drive field: q = sqrt(2) |alpha| at t = 0
    assert d[0, 5] == pytest.approx(math.sqrt(2) * 0.2 / 0.0005, rel=1e-9)
    assert np.all(d[:, 4] >= 0) and np.all(d[:, 4] <= math.log(2) + 1e-12)


def test_sweep_fan_out_and_determinism(tmp_path):
    code, out = _run(["sweep", "--lambda-points", "20"], tmp_path, "a")
    assert code == 0
    files = sorted(p.name for p in out.iterdir())
    curves = [f for f in files if f.endswith(".csv")]
    assert len(curves) == 16 and "manifest.json" in files
    code, out2 = _run(["sweep", "--lambda-points", "20"], tmp_path, "b")
    for f in curves:
        assert (out / f).read_bytes() == (out2 / f).read_bytes()
    rows = _read(out / "spin_td_analytic_n0.csv")
    assert list(rows[0]) == ["lambda", "value", "valid"]
    assert float(rows[0]["lambda"]) == 1e-3
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["A"] == 0.2 and man["config"]["periods"] == 10


def test_sweep_paired_and_svg(tmp_path):
    code, out = _run(["sweep", "--metrics", "spin_td", "--n", "1", "--variant", "paired",
                      "--lambda-points", "5", "--lambda-max", "0.02", "--workers", "1", "--svg"], tmp_path)
    assert code == 0
    rows = _read(out / "spin_td_paired_n1.csv")
    assert list(rows[0]) == ["lambda", "value", "valid", "analytic", "abs_difference"]
    for r in rows:
        assert abs(float(r["value"]) - float(r["analytic"])) == pytest.approx(float(r["abs_difference"]))
    svg = (out / "spin_td_paired.svg").read_text()
    assert svg.lstrip().startswith("<?xml") and "<svg" in svg


def test_sweep_invalid_points_marked(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"A": 0.2, "metrics": ["field_td"], "n": [0], "variant": "numeric",
                               "route": "lab", "lambda_grid": {"min": 1e-4, "max": 0.05, "points": 3, "log": True}}))
    # the lab route at lam = 1e-4 needs ~4e6 levels; the point is expected to fail cleanly
    code, out = _run(["sweep", "--config", str(cfg), "--workers", "1"], tmp_path)
    assert code == 0
    rows = _read(out / "field_td_numeric_n0.csv")
    assert [r["valid"] for r in rows][1:] == ["1", "1"]


def test_manifest_round_trip(tmp_path):
    code, out = _run(["sweep", "--metrics", "correlation", "--n", "2", "--lambda-points", "6"], tmp_path, "a")
    assert code == 0
    code, out2 = _run(["sweep", "--config", str(out / "manifest.json")], tmp_path, "b")
    assert code == 0
    a = json.loads((out / "manifest.json").read_text())["config"]
    b = json.loads((out2 / "manifest.json").read_text())["config"]
    a.pop("out"), b.pop("out")
    assert a == b
    assert (out / "correlation_analytic_n2.csv").read_bytes() == (out2 / "correlation_analytic_n2.csv").read_bytes()


def test_inflection_table(tmp_path):
    code, out = _run(["inflection"], tmp_path)
    assert code == 0
    rows = {int(r["n"]): r for r in _read(out / "inflection.csv")}
    assert rows[0]["lambda_star_taylor"] == "" and rows[0]["lambda_star_large_n"] == ""
    assert float(rows[0]["lambda_star_numeric"]) == pytest.approx(0.2 / (10 * math.pi), rel=2e-3)
    assert abs(float(rows[100]["taylor_over_large_n"]) - 1) < 0.05


def test_scaling_summary(tmp_path):
    code, out = _run(["scaling"], tmp_path)
    assert code == 0
    doc = json.loads((out / "scaling.json").read_text())
    assert abs(doc["exponent"] + 0.5) < 0.1
    assert {"exponent", "prefactor", "residual"} <= set(doc)
    assert [p["n"] for p in doc["points"]] == list(range(4, 17))


def test_validate(tmp_path, capsys):
    code, out = _run(["validate"], tmp_path)
    assert code == 0
    doc = json.loads((out / "validate.json").read_text())
    assert doc["all_pass"] and len(doc["checks"]) >= 3
    assert "PASS" in capsys.readouterr().out


def test_exit_codes(tmp_path):
    assert _run(["sweep", "--A", "-1"], tmp_path)[0] == 1
    with pytest.raises(SystemExit) as exc:
        _run(["sweep", "--route", "teleport"], tmp_path)
    assert exc.value.code == 1
    assert _run(["sweep", "--config", str(tmp_path / "missing.json")], tmp_path)[0] == 1
    bad = tmp_path / "bad.json"
    bad.write_text('{"colour": "blue"}')
    assert _run(["sweep", "--config", str(bad)], tmp_path)[0] == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 1
    # too few grid points for an inflection fit is a numeric failure
    assert _run(["scaling", "--lambda-points", "5"], tmp_path)[0] == 2


def test_worker_precedence(monkeypatch):
    cfg = cli.RunConfig()
    monkeypatch.setenv("RABI_LIMIT_WORKERS", "3")
    assert cfg.resolved_workers() == 3
    cfg.workers = 2
    assert cfg.resolved_workers() == 2
    monkeypatch.setenv("RABI_LIMIT_WORKERS", "zero")
    with pytest.raises(cli.ConfigError):
        cli.RunConfig().resolved_workers()


def test_csv_number_format():
    assert cli.fmt(0.1) == "0.1"
    assert float(cli.fmt(1 / 3)) == 1 / 3
    assert cli.fmt(None) == ""
    assert cli.fmt(True) == "1"
