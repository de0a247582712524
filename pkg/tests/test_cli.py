import json
import subprocess
import sys

import numpy as np
import pytest

from mepstab.cli import main
from mepstab.geometry import DiscretePath
from mepstab.io import write_path_csv

FAST = ["--solver.n=51", "--solver.tol=1e-9"]


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_mep_writes_outputs(tmp_path, capsys):
    assert main(["mep", "-o", str(tmp_path), *FAST]) == 0
    assert set(_files(tmp_path)) == {"path.csv", "solution.json", "residual_history.svg", "path.svg"}
    doc = json.loads((tmp_path / "solution.json").read_text())
    assert doc["schema_version"] == 1
    assert doc["sbar"] == pytest.approx(0.5, abs=1e-6)
    assert "converged" in capsys.readouterr().out


def test_mep_is_byte_identical_across_runs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["mep", "-o", str(a), *FAST]) == 0
    assert main(["mep", "-o", str(b), *FAST]) == 0
    assert _files(a) == _files(b)


def test_config_file_and_format_selection(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": {"name": "dw", "params": {"kappa": 12}},
                               "solver": {"n": 41}, "output": {"formats": ["csv"]}}))
    assert main(["mep", "-c", str(cfg), "-o", str(tmp_path / "o")]) == 0
    assert set(_files(tmp_path / "o")) == {"path.csv"}


@pytest.mark.parametrize("argv", [
    ["mep", "--solver.tol=-1"],
    ["mep", "--set", "solver.bogus=1"],
    ["perturb", "--perturbation.deltas=[]"],
    ["counterexample", "foo"],
    ["nonsense"],
    [],
])
def test_usage_errors_exit_2_without_output(tmp_path, argv):
    out = tmp_path / "o"
    assert main([*argv, "-o", str(out)]) == 2
    assert not out.exists()


def test_certify_exact_double_well_mep(tmp_path):
    p = tmp_path / "seg.csv"
    write_path_csv(DiscretePath.straight([-1.0, 0.0], [1.0, 0.0], 51), p)
    # the straight segment is the exact double-well MEP, so certification succeeds
    assert main(["certify", str(p), "-o", str(tmp_path / "r"), "--stability.trials=3"]) == 0
    rep = json.loads((tmp_path / "r" / "report.json").read_text())
    assert rep["assumptions"]["a_holds"] and rep["assumptions"]["b_holds"]
    assert rep["gamma_hat"] > 0
    assert rep["roundtrip_defect"] < 1e-3
    assert {"lambda.csv", "lambda.svg", "residual.svg", "path.svg", "report.json"} <= set(_files(tmp_path / "r"))


def test_certify_bent_path_skips_gamma(tmp_path):
    a = np.linspace(0, 1, 51)
    nodes = np.column_stack([2 * a - 1, 0.2 * np.sin(np.pi * a)])
    nodes[[0, -1], 1] = 0.0
    p = tmp_path / "bent.csv"
    write_path_csv(DiscretePath(a, nodes), p)
    assert main(["certify", str(p), "-o", str(tmp_path / "r")]) == 0
    rep = json.loads((tmp_path / "r" / "report.json").read_text())
    assert rep["gamma_hat"] is None and "gamma_skipped" in rep
    assert rep["residual_ynorm"] > 1.0


def test_certify_rejects_non_critical_endpoints(tmp_path):
    p = tmp_path / "off.csv"
    write_path_csv(DiscretePath.straight([-0.5, 0.0], [1.0, 0.0], 21), p)
    assert main(["certify", str(p), "-o", str(tmp_path / "r")]) == 1
    assert main(["certify", str(tmp_path / "missing.csv"), "-o", str(tmp_path / "r")]) == 1


def test_perturb(tmp_path):
    argv = ["perturb", "-o", str(tmp_path), *FAST, "--perturbation.deltas=[0, 1e-4, 1e-3, 1e-2]"]
    assert main(argv) == 0
    lines = (tmp_path / "study.csv").read_text().splitlines()
    assert lines[0] == "delta,model_error_c1,subspace_error,mep_error_c1,minA_shift,minB_shift,converged"
    assert len(lines) == 5
    doc = json.loads((tmp_path / "study.json").read_text())
    assert doc["slope"] == pytest.approx(1.0, abs=0.2)


@pytest.mark.parametrize("kind,files", [("degenerate", {"degenerate.csv", "degenerate.json", "degenerate.svg"}),
                                        ("swapped", {"swapped.csv", "swapped.json"})])
def test_counterexample(tmp_path, kind, files):
    assert main(["counterexample", kind, "-o", str(tmp_path)]) == 0
    assert set(_files(tmp_path)) == files


def test_selftest(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 5 and all(line.startswith("PASS") for line in out)


def test_console_entry_point_runs_as_module():
    r = subprocess.run([sys.executable, "-m", "mepstab.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "mepstab" in r.stdout
