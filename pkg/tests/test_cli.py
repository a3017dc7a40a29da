from __future__ import annotations

import csv
import json
import statistics
import subprocess
import sys

import pytest

from tfacpp.analysis import quadrant_of
from tfacpp.cli import main

SMALL = ["--stations", "4", "--legs-per-month", "10", "--months", "3"]


@pytest.fixture(scope="module")
def inst_path(tmp_path_factory):
    p = tmp_path_factory.mktemp("cli") / "inst.json"
    assert main(["generate", "--seed", "1", "--out", str(p), *SMALL]) == 0
    return p


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def test_generate_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["generate", "--seed", "5", "--out", str(a), *SMALL]) == 0
    assert main(["generate", "--seed", "5", "--out", str(b), *SMALL]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_generate_without_out_is_usage_error():
    assert main(["generate", "--seed", "1"]) == 2


def test_unknown_mode_is_usage_error(inst_path, tmp_path):
    assert main(["solve", "--instance", str(inst_path), "--out", str(tmp_path), "--mode", "magic"]) == 2


def test_missing_instance_is_usage_error(tmp_path):
    assert main(["solve", "--instance", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2


def test_colgen_and_monolithic_agree(inst_path, tmp_path):
    cg, mono = tmp_path / "cg", tmp_path / "mono"
    assert main(["solve", "--instance", str(inst_path), "--out", str(cg), "--mode", "colgen"]) == 0
    assert main(["solve", "--instance", str(inst_path), "--out", str(mono), "--mode", "monolithic",
                 "--cover", "le"]) == 0
    a = json.loads((cg / "solution.json").read_text())["lp_objective"]
    b = json.loads((mono / "solution.json").read_text())["lp_objective"]
    assert a == pytest.approx(b, rel=1e-6)
    for name in ("allocation.csv", "convergence.csv", "finish.csv", "duals.json"):
        assert (cg / name).exists()
    finish = read_csv(cg / "finish.csv")
    assert all(float(r["mon_int_gap"]) <= 1e-12 for r in finish)


def test_analyze_needs_duals(inst_path, tmp_path):
    assert main(["solve", "--instance", str(inst_path), "--out", str(tmp_path), "--mode", "monolithic",
                 "--mip-only"]) == 0
    assert not (tmp_path / "duals.json").exists()
    assert main(["analyze", "--instance", str(inst_path), "--out", str(tmp_path)]) == 2


def test_analyze_pipeline(inst_path, tmp_path):
    assert main(["solve", "--instance", str(inst_path), "--out", str(tmp_path)]) == 0
    assert main(["analyze", "--instance", str(inst_path), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "quadrant.csv")
    g0 = statistics.median(float(r["gamma"]) for r in rows)
    crew = [r for r in read_csv(tmp_path / "marginal.csv") if r["kind"] == "crew"]
    b0 = statistics.median(float(r["yearly_marginal"]) for r in crew)
    for r in rows:
        assert r["quadrant"] == quadrant_of(float(r["gamma"]), float(r["beta"]), g0, b0)
    lines = (tmp_path / "eam.csv").read_text().splitlines()
    idx = next(i for i, l in enumerate(lines) if l.startswith("cgmp_profit"))
    cg, eam, growth = map(float, lines[idx + 1].split(","))
    assert growth == pytest.approx((cg - eam) / eam * 100)
    assert cg >= eam - 1e-6 * abs(cg)


def test_eam_command(inst_path, tmp_path):
    assert main(["eam", "--instance", str(inst_path), "--out", str(tmp_path)]) == 0
    assert "growth_rate_pct" in (tmp_path / "eam.csv").read_text()


def test_benders_trace_tiny(tmp_path):
    p = tmp_path / "tiny.json"
    assert main(["generate", "--seed", "0", "--out", str(p), "--stations", "3", "--legs-per-month", "6",
                 "--months", "2"]) == 0
    assert main(["benders-trace", "--instance", str(p), "--out", str(tmp_path), "--tol", "1e-9"]) == 0
    trace = read_csv(tmp_path / "benders_trace.csv")
    assert trace and all(float(r["lower_bound"]) <= float(r["upper_bound"]) * (1 + 1e-6) for r in trace)


def test_iteration_cap_exit_code(inst_path, tmp_path):
    assert main(["solve", "--instance", str(inst_path), "--out", str(tmp_path), "--max-iter", "0"]) == 3


def test_dump_network(inst_path, tmp_path):
    assert main(["solve", "--instance", str(inst_path), "--out", str(tmp_path), "--dump-network"]) == 0
    dots = list((tmp_path / "networks").glob("*.dot"))
    assert dots and dots[0].read_text().startswith("digraph")


def test_module_entry_point(tmp_path):
    out = tmp_path / "i.json"
    proc = subprocess.run([sys.executable, "-m", "tfacpp", "generate", "--seed", "2", "--out", str(out), *SMALL],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and out.exists()
