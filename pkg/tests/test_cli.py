import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from bivtoda.cli import RunConfig, main
from bivtoda.errors import ParameterError
from bivtoda.weights import WeightSpec

SQUARE = {"family": "product-jacobi-square"}
TRIANGLE = {"family": "jacobi-triangle"}


def run(tmp_path, command, config, capsys=None):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(config))
    out = tmp_path / "out"
    code = main([command, "--config", str(path), "--out", str(out)])
    err = capsys.readouterr().err if capsys else ""
    return code, out, err


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_moments(tmp_path):
    code, out, _ = run(tmp_path, "moments", {"weight": SQUARE, "N": 2})
    assert code == 0
    table = {(int(r["h"]), int(r["k"])): float(r["value"]) for r in rows(out / "moments.csv")}
    assert table[2, 0] == pytest.approx(0.3333333333333333, abs=1e-14)
    doc = json.loads((out / "moments.json").read_text())
    assert doc["max_degree"] == 6


def test_moments_deformed(tmp_path):
    cfg = {"weight": dict(SQUARE, t=1), "N": 2}
    code, out, _ = run(tmp_path, "moments", cfg)
    table = {(int(r["h"]), int(r["k"])): float(r["value"]) for r in rows(out / "moments.csv")}
    assert table[1, 0] == pytest.approx(1 - 1 / math.tanh(1), abs=1e-13)


def test_bad_exponent(tmp_path, capsys):
    cfg = {"weight": dict(SQUARE, params={"alpha": -1.5})}
    code, _, err = run(tmp_path, "moments", cfg, capsys)
    assert code == 2
    assert json.loads(err)["kind"] == "parameter"


def test_recur(tmp_path):
    code, out, _ = run(tmp_path, "recur", {"weight": SQUARE, "N": 2})
    assert code == 0
    doc = json.loads((out / "recurrence.json").read_text())
    assert np.allclose(doc["C1"][1], [[1 / 3], [0]], atol=1e-14)
    assert json.loads((out / "rank_report.json").read_text())["passed"]
    code, out, _ = run(tmp_path, "recur", {"weight": TRIANGLE, "N": 2})
    doc = json.loads((out / "recurrence.json").read_text())
    assert np.allclose(doc["D1"][0], [[1 / 3]], atol=1e-14)


def test_recur_insufficient_degree(tmp_path, capsys):
    code, _, err = run(tmp_path, "recur", {"weight": SQUARE, "N": 4, "M": 8}, capsys)
    assert code == 2
    assert "insufficient moment degree" in json.loads(err)["message"]


def test_verify_passes(tmp_path):
    code, out, _ = run(tmp_path, "verify", {"weight": SQUARE})
    doc = json.loads((out / "verify.json").read_text())
    assert code == 0 and doc["passed"]
    for check in doc["checks"]:
        assert set(check) == {"name", "value", "gate", "pass"}
        assert check["pass"]


def test_verify_single_failure(tmp_path):
    cfg = {"weight": SQUARE, "N": 4, "times": [0, 0.25],
           "gates": {"lax_residual": 1e-15}}
    code, out, _ = run(tmp_path, "verify", cfg)
    doc = json.loads((out / "verify.json").read_text())
    assert code == 4
    assert [c["name"] for c in doc["checks"] if not c["pass"]] == ["lax_residual"]


def test_verify_exit_status_matches_flags(tmp_path):
    cfg = {"weight": TRIANGLE, "N": 3, "times": [0, 0.2]}
    code, out, _ = run(tmp_path, "verify", cfg)
    doc = json.loads((out / "verify.json").read_text())
    assert (code == 0) == all(c["pass"] for c in doc["checks"])


def test_empty_time_grid(tmp_path, capsys):
    code, _, err = run(tmp_path, "verify", {"weight": SQUARE, "times": []}, capsys)
    assert code == 2 and json.loads(err)["kind"] == "parameter"


def test_evolve(tmp_path):
    cfg = {"weight": SQUARE, "N": 10, "times": [0, 0.25, 0.5], "dt": 1e-3}
    code, out, _ = run(tmp_path, "evolve", cfg)
    assert code == 0
    lines = (out / "flow.jsonl").read_text().splitlines()
    assert len(lines) == 501
    last = json.loads(lines[-1])
    assert last["D01"] == pytest.approx(-0.1639534, abs=1e-7)
    spectra = rows(out / "spectra.csv")
    assert {float(r["t"]) for r in spectra} == {0.0, 0.25, 0.5}
    assert len(spectra) == 3 * 66


def test_evolve_zero_span(tmp_path):
    cfg = {"weight": SQUARE, "N": 4, "times": [0], "t_end": 0}
    code, out, _ = run(tmp_path, "evolve", cfg)
    lines = (out / "flow.jsonl").read_text().splitlines()
    assert code == 0 and len(lines) == 1
    assert json.loads(lines[0])["t"] == 0.0


def test_evolve_bad_dt(tmp_path, capsys):
    code, _, _ = run(tmp_path, "evolve", {"weight": SQUARE, "dt": 0}, capsys)
    assert code == 2


def test_evolve_divergence_exit(tmp_path, capsys, monkeypatch):
    from bivtoda import toda
    from bivtoda.errors import DivergenceError

    def boom(*args, **kwargs):
        raise DivergenceError("integration diverged", "toda")

    monkeypatch.setattr(toda, "integrate_toda", boom)
    code, _, err = run(tmp_path, "evolve", {"weight": SQUARE, "N": 3}, capsys)
    assert code == 5 and json.loads(err)["kind"] == "divergence"


def test_stieltjes(tmp_path, capsys):
    cfg = {"weight": SQUARE, "points": [[3, 3], [3, -3]]}
    code, out, _ = run(tmp_path, "stieltjes", cfg)
    assert code == 0
    grid = rows(out / "stieltjes.csv")
    assert float(grid[0]["re(S)"]) == pytest.approx(math.log(2) ** 2 / 4, abs=1e-8)
    assert float(grid[1]["re(S)"]) == pytest.approx(-math.log(2) ** 2 / 4, abs=1e-8)
    code, _, err = run(tmp_path, "stieltjes", {"weight": SQUARE, "points": [[0.5, 3]]}, capsys)
    assert code == 2 and json.loads(err)["kind"] == "convergence-domain"


def test_malformed_config(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["moments", "--config", str(path)]) == 2
    assert json.loads(capsys.readouterr().err)["module"] == "cli"
    code, _, _ = run(tmp_path, "moments", {"weight": SQUARE, "bogus": 1}, capsys)
    assert code == 2


def test_run_config_invariants():
    spec = WeightSpec("product-jacobi-square")
    with pytest.raises(ParameterError):
        RunConfig(spec, times=[0.1, 0.2])
    with pytest.raises(ParameterError):
        RunConfig(spec, times=[0, 0.3, 0.2])
    with pytest.raises(ParameterError):
        RunConfig(spec, gates={"lax_residual": 0})
    with pytest.raises(ParameterError):
        RunConfig(spec, gates={"nonsense": 1e-3})
    assert RunConfig(spec, N=3).M == 8


def test_console_entry_point(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"weight": TRIANGLE, "N": 1}))
    proc = subprocess.run([sys.executable, "-m", "bivtoda.cli", "moments", "--config",
                           str(path), "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o" / "moments.csv").exists()
