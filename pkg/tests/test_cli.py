import json
import re
from pathlib import Path

import pytest

from pseudoabel.cli import JobConfig, main, parse_t_grid, render_portrait
from pseudoabel.io import fixture_path, load_schema
from pseudoabel.model import model_system

ROOT = Path(__file__).resolve().parents[1]


def write_spec(tmp_path, **changes):
    doc = json.loads(fixture_path("model").read_text())
    doc.update(changes)
    p = tmp_path / "sys.json"
    p.write_text(json.dumps(doc))
    return str(p)


# configuration -------------------------------------------------------------


def test_t_grid_parsing():
    assert parse_t_grid("0.1:0.5:5") == pytest.approx((0.1, 0.2, 0.3, 0.4, 0.5))
    assert parse_t_grid("0.3, 0.5") == (0.3, 0.5)
    assert parse_t_grid("  ") == ()
    for bad in ("0.1:0.5", "0.1:0.5:0", "a,b"):
        with pytest.raises(ValueError):
            parse_t_grid(bad)


def test_job_config_invariants():
    with pytest.raises(ValueError):
        JobConfig(None, None, (0.5,), tol=0)
    with pytest.raises(ValueError):
        JobConfig(None, (), (0.5,))
    with pytest.raises(ValueError):
        JobConfig(None, None, (1.2,))
    with pytest.raises(ValueError):
        JobConfig(None, None, (0.5,), jobs=0)


def test_shipped_schema_matches_docs():
    assert json.loads((ROOT / "docs" / "system.schema.json").read_text()) == load_schema()


# system files --------------------------------------------------------------


def test_negative_exponent_is_a_schema_error(tmp_path, capsys):
    path = write_spec(tmp_path, factors=[{"poly": "1 - y", "exponent": -1}])
    assert main(["verify", "--system", path]) == 2
    err = capsys.readouterr().err
    assert "factors/0/exponent" in err


def test_bad_polynomial_reports_path(tmp_path, capsys):
    path = write_spec(tmp_path, eta={"dx": "0", "dy": "x +* y"})
    assert main(["integrate", "--system", path]) == 2
    assert "eta/dy" in capsys.readouterr().err


def test_not_json(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text("{")
    assert main(["blowup", "--system", str(p)]) == 2
    assert "not valid JSON" in capsys.readouterr().err


def test_empty_grid_rejected(capsys):
    assert main(["integrate", "--t-grid", ""]) == 2


# commands ------------------------------------------------------------------


def test_verify_model(capsys):
    assert main(["verify", "--t-grid", "0.5"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "pullback U3" in out


def test_verify_eps_zero_skips_variation(tmp_path, capsys):
    out_json = tmp_path / "v.json"
    assert main(["verify", "--epsilon", "0", "--out", str(out_json)]) == 0
    doc = json.loads(out_json.read_text())
    assert doc["ok"]
    skipped = [c for c in doc["checks"] if c["status"] == "skip"]
    assert any("degenerate foliation" in c["detail"] for c in skipped)
    assert any(c["check"].startswith("pullback") and c["status"] == "pass" for c in doc["checks"])


def test_blowup_prints_all_charts(capsys):
    assert main(["blowup"]) == 0
    out = capsys.readouterr().out
    assert out.count("order 5") == 3


def test_integrate_csv_header(capsys):
    assert main(["integrate", "--t-grid", "0.5"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "epsilon,t,re_I,im_I,error_estimate,nodes"
    assert len(lines) == 2


def test_variation_command(capsys):
    assert main(["variation", "--t-grid", "0.5"]) == 0
    row = capsys.readouterr().out.splitlines()[1].split(",")
    assert float(row[-1]) <= 1e-5


def test_eight_rejects_eps_zero(capsys):
    assert main(["eight", "--epsilon", "0", "--t-grid", "0.5"]) == 2


def count_elements(svg):
    return (len(re.findall(r'class="level"', svg)), len(re.findall(r'class="curve"', svg)),
            len(re.findall(r'class="marker"', svg)))


def test_portrait_counts():
    svg, warns = render_portrait(model_system(0.5), [0.1 * k for k in range(1, 9)])
    assert count_elements(svg) == (8, 2, 2) and not warns
    svg, _ = render_portrait(model_system(0.5), [])
    assert count_elements(svg) == (0, 2, 2)


def test_portrait_deterministic(tmp_path):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    for p in (a, b):
        assert main(["portrait", "--epsilon", "0.5", "--t-grid", "0.2:0.8:4", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_scan_cache_and_determinism(tmp_path):
    cache = tmp_path / "cache"
    args = ["scan", "--epsilon", "0.2", "--t-grid", "0.3:0.9:8", "--forced-zero", "0.5"]
    assert main(args + ["--out", str(tmp_path / "fresh")]) == 0
    assert main(args + ["--out", str(tmp_path / "cold"), "--cache", str(cache)]) == 0
    assert main(args + ["--out", str(tmp_path / "warm"), "--cache", str(cache)]) == 0
    assert any((cache / "integrals").iterdir())
    fresh = (tmp_path / "fresh.csv").read_bytes()
    assert (tmp_path / "cold.csv").read_bytes() == fresh == (tmp_path / "warm.csv").read_bytes()
    doc = json.loads((tmp_path / "warm.json").read_text())
    assert doc["counts"] == [1] and doc["forced_zero"] == 0.5


def test_scan_exact_eta(tmp_path):
    out = tmp_path / "ex"
    path = str(fixture_path("model_exact"))
    assert main(["scan", "--system", path, "--t-grid", "0.3:0.9:8", "--out", str(out)]) == 0
    rep, = json.loads((tmp_path / "ex.json").read_text())["reports"]
    assert rep["identically_zero"] and rep["count"] == 0


def test_scan_forced_zero_validated(capsys):
    assert main(["scan", "--forced-zero", "1.5"]) == 2


def test_env_override(monkeypatch, capsys):
    monkeypatch.setenv("PSEUDOABEL_T_GRID", "0.4")
    monkeypatch.setenv("PSEUDOABEL_EPSILON", "0.3")
    assert main(["integrate"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2 and lines[1].startswith("0.3,")
    # explicit flags win
    assert main(["integrate", "--t-grid", "0.4,0.5"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 3
