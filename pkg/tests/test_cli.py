import io
import json
import re
import subprocess
import sys

import pytest

from ipll_lab.cli import run
from ipll_lab.output import SWEEP_HEADER, TRAJECTORY_HEADER


def _run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out=out, err=err)
    return code, out.getvalue(), err.getvalue()


def _config_echo(text):
    first = text.splitlines()[0]
    assert first.startswith("# config: ")
    return json.loads(first[len("# config: "):])


def test_map_gains():
    code, out, _ = _run("map-gains", "--j", "20", "--d", "2", "--lg", "4.1e-3")
    assert code == 0
    assert "K_ppll = 0.1305" in out and "K_ipll = 19.144" in out
    cfg = _config_echo(out)
    assert cfg["l_g_henry"] == 4.1e-3 and cfg["r_g_ohm"] == 0.0


def test_find_critical():
    code, out, _ = _run("find-critical")
    assert code == 0
    l = float(re.search(r"l_g\* = (\S+) H", out).group(1))
    assert l == pytest.approx(1.121e-2, abs=1e-5)


def test_find_critical_ipll_outside_existence():
    code, out, _ = _run("find-critical", "--ipll", "--lg-min", "1e-3", "--lg-max", "0.04")
    assert code == 0 and "no equilibrium" in out


def test_analyze_no_equilibrium():
    code, out, err = _run("analyze", "--lg", "13e-3")
    assert code == 2 and "NoEquilibrium" in err


def test_analyze_report():
    code, out, _ = _run("analyze")
    assert code == 0 and "[eigenvalues]" in out and "SCR" in out


def test_validation_exit_status():
    assert _run("analyze", "--lg", "-1")[0] == 1
    assert _run("analyze", "--bogus")[0] == 1
    assert _run("nonsense")[0] == 1
    assert _run("simulate", "--dt", "3e-5", "--duration", "0.0001")[0] == 1


def test_config_file_and_override(tmp_path):
    p = tmp_path / "study.json"
    p.write_text(json.dumps({"l_g_henry": 0.0088, "d_ipll": 3.0}))
    code, out, _ = _run("map-gains", "--config", str(p), "--d", "2")
    cfg = _config_echo(out)
    assert code == 0 and cfg["l_g_henry"] == 0.0088 and cfg["d_ipll"] == 2.0
    bad = tmp_path / "bad.json"
    bad.write_text('{\n "lg": 1}')
    code, _, err = _run("analyze", "--config", str(bad))
    assert code == 1 and "line 2" in err
    assert _run("analyze", "--config", str(tmp_path / "missing.json"))[0] == 1


def test_sweep_outputs(tmp_path):
    csv = tmp_path / "s.csv"
    svg = tmp_path / "s.svg"
    code, out, _ = _run("sweep", "--points", "12", "--csv", str(csv), "--svg", str(svg))
    assert code == 0
    lines = csv.read_text().splitlines()
    assert lines[0] == SWEEP_HEADER and len(lines) == 13
    assert svg.read_text().startswith("<?xml")
    meta = json.loads((tmp_path / "s.csv.meta.json").read_text())
    assert meta["sweep_points"] == 12 and meta == _config_echo(out)


def test_sweep_to_stdout():
    code, out, _ = _run("sweep", "--points", "3")
    assert code == 0 and out.splitlines()[1] == SWEEP_HEADER and len(out.splitlines()) == 5


def test_simulate_diverged_is_success(tmp_path):
    csv = tmp_path / "t.csv"
    code, out, _ = _run("simulate", "--model", "pll_reduced", "--lg", "11.25e-3",
                        "--duration", "3", "--csv", str(csv))
    assert code == 0 and "verdict: Diverged" in out
    assert csv.read_text().splitlines()[0] == TRAJECTORY_HEADER


def test_simulate_step_event():
    code, out, _ = _run("simulate", "--step-lg", "8.8e-3", "--step-time", "0.1",
                        "--duration", "0.2", "--offset", "0")
    assert code == 0
    assert _config_echo(out)["events"] == [{"time_s": 0.1, "target": "l_g", "value": 0.0088}]
    rows = [l for l in out.splitlines() if l and l[0].isdigit()]
    assert float(rows[0].split(",")[4]) == 4.1e-3
    assert float(rows[-1].split(",")[4]) == 8.8e-3


def test_fig6_table():
    code, out, _ = _run("fig6")
    assert code == 0
    table = dict(((l, m), v) for l, m, v in (
        line.split(",") for line in out.splitlines()[2:] if line.count(",") == 2))
    assert table[("0.01125", "pll_reduced")] == "Diverged"
    assert table[("0.0103", "pll_reduced")] == "Settled"
    assert sum(v == "Settled" for v in table.values()) == 7


def test_fig5(tmp_path):
    code, out, _ = _run("fig5", "--svg", str(tmp_path / "f5.svg"))
    pct = float(re.search(r"\(([\d.]+) % of peak", out).group(1))
    assert code == 0 and pct < 2.0
    assert (tmp_path / "f5.svg.meta.json").exists()


def test_design_damping():
    code, out, _ = _run("design-damping", "--envelope-lg", "4.1e-3", "12.374e-3")
    assert code == 0
    assert "lower_exact        = 0.98992" in out
    assert "recommended D      = 1.97989" in out


def test_console_script_module():
    r = subprocess.run([sys.executable, "-m", "ipll_lab.cli", "map-gains"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "K_ppll = 0.1305" in r.stdout
