import json
import math
import subprocess
import sys

import pytest

import waistkit.stability
import waistkit.sweepout
from waistkit.cli import emit_plots, run


def report(capsys, argv):
    code = run(argv)
    return code, json.loads(capsys.readouterr().out)


def test_info(capsys):
    code, r = report(capsys, ["info", "builtin:icosphere:2"])
    assert code == 0
    assert r["mesh"]["genus"] == 0 and r["mesh"]["V"] - r["mesh"]["E"] + r["mesh"]["F"] == 2
    assert r["mesh"]["area"] == pytest.approx(4 * math.pi, rel=0.02)


def test_corrupted_mesh_names_simplex(tmp_path, capsys):
    p = tmp_path / "corrupted.off"
    p.write_text("OFF\n5 3 0\n0 0 0\n1 0 0\n0 1 0\n0 -1 0\n0 0 1\n3 0 1 2\n3 0 1 3\n3 0 1 4\n")
    code, r = report(capsys, ["sweep", str(p)])
    assert code == 1
    assert r["error"]["simplex"] == [0, 1]


@pytest.mark.parametrize("argv", [["bogus"], ["info"], ["info", "x.off", "--no-such-flag"], ["sweep", "builtin:torus:4", "--delta", "-1"], ["ode-check", "--phi", "const:1"]])
def test_input_errors(argv, capsys):
    code, r = report(capsys, argv)
    assert code == 1 and r["ok"] is False and r["error"]["message"]


def test_sweep_torus_within_bound(tmp_path, capsys):
    out = tmp_path / "c.json"
    assert run(["sweep", "builtin:torus:12", "--out", str(out), "--format", "svg"]) == 0
    r = json.loads(out.read_text())
    c = r["certificate"]
    assert c["max_fiber"] <= 616 * math.sqrt(2) * math.sqrt(c["area"]) + c["delta"]
    assert r["bounds"][0]["ok"]
    svg = (tmp_path / "c.svg").read_text()
    assert svg.startswith("<svg") and "polyline" in svg


def test_reports_are_byte_identical(tmp_path, monkeypatch):
    for argv in (["sweep", "builtin:icosphere:1"], ["ode-check", "--falsify", "20", "--seed", "7"]):
        for d in ("a", "b"):
            (tmp_path / d).mkdir(exist_ok=True)
            monkeypatch.chdir(tmp_path / d)
            assert run(argv + ["--out", "r.json"]) == 0
        assert (tmp_path / "a" / "r.json").read_bytes() == (tmp_path / "b" / "r.json").read_bytes()


def test_injected_sweep_violation(monkeypatch, capsys):
    # a bound too small for any sweepout
    monkeypatch.setattr(waistkit.sweepout, "sweep_bound", lambda *a: 1e-3)
    code, r = report(capsys, ["sweep", "builtin:icosphere:1"])
    assert code == 2
    assert r["ok"] is False


def test_injected_ode_violation(monkeypatch, capsys):
    monkeypatch.setattr(waistkit.stability, "infradius_bound", lambda lam: 1.0)
    code, r = report(capsys, ["ode-check", "--phi", "const:1", "--lambda", "1", "--length", "3"])
    assert code == 2
    assert not r["instances"][0]["verdict"]["consistent"]


def test_ode_manifest_and_convergence_csv(tmp_path, capsys):
    w = tmp_path / "w.json"
    w.write_text(json.dumps({"x": [0, 1.5, 3], "y": [1, 1.1, 1]}))
    m = tmp_path / "m.json"
    m.write_text(json.dumps([{"phi": "w.json", "lambda": 1, "length": 3}, {"phi": "const:1", "lambda": 1, "length": math.pi / 2, "n": 128}]))
    out = tmp_path / "r.json"
    assert run(["ode-check", "--manifest", str(m), "--format", "csv", "--out", str(out), "--workers", "2"]) == 0
    r = json.loads(out.read_text())
    assert r["instances"][1]["verdict"]["first_eigenvalue"] == pytest.approx(3.0, abs=1e-3)
    rows = (tmp_path / "r.csv").read_text().splitlines()
    assert rows[0] == "series,n,first eigenvalue" and len(rows) == 1 + 4 + 4


def test_homotopy_heatmap_csv(tmp_path):
    out = tmp_path / "h.json"
    assert run(["homotopy", "builtin:icosphere:2", "--grid", "16", "--format", "csv", "--out", str(out)]) == 0
    r = json.loads(out.read_text())
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0].startswith("# s by x; max=")
    assert len(lines) == 17
    assert r["path"]["fiber_bound"] <= r["path"]["bound"]


def test_minmax_and_gamma(capsys):
    code, r = report(capsys, ["minmax", "builtin:icosphere:3"])
    assert code == 0
    assert abs(r["trace"]["length"] - 2 * math.pi) <= 0.02 * 2 * math.pi
    code, r = report(capsys, ["gamma-dist", "builtin:icosphere:2", "--at", "0.5", "0.5"])
    assert code == 0 and r["distance"] == 0.0 and r["degree"] == pytest.approx(1.0)


def test_workers_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("WAISTKIT_WORKERS", "0")
    code, r = report(capsys, ["ode-check", "--phi", "const:1", "--lambda", "1", "--length", "1"])
    assert code == 1 and "workers" in r["error"]["message"]


def test_empty_plot_skipped(tmp_path, capsys):
    assert emit_plots({"kind": "lines", "series": []}, "svg", tmp_path / "p.svg") is None
    assert "notice" in capsys.readouterr().err
    assert not (tmp_path / "p.svg").exists()


def test_module_entry_point():
    p = subprocess.run([sys.executable, "-m", "waistkit", "info", "builtin:tetrahedron"], capture_output=True, text=True)
    assert p.returncode == 0
    assert json.loads(p.stdout)["mesh"]["F"] == 4
