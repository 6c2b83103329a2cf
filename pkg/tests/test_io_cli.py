import json

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from infobstacle import io
from infobstacle.cli import main
from infobstacle.experiments import ExperimentConfig, run_experiment
from infobstacle.geometry import DomainSpec, ScalarField, build_grid
from infobstacle.solver_p import Mask

GRID = build_grid(DomainSpec.disk((0.1, -0.2), 0.6), 0.1)


@settings(suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(vals=st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=GRID.kind.size,
                     max_size=GRID.kind.size))
def test_field_round_trip_is_exact(tmp_path, vals):
    f = ScalarField(GRID, np.array(vals).reshape(GRID.shape))
    io.write_field(tmp_path / "f.csv", f)
    back = io.read_field(tmp_path / "f.csv")
    np.testing.assert_array_equal(back.values[GRID.active], f.values[GRID.active])
    assert back.grid.shape == GRID.shape


def test_mask_written_as_zero_one(tmp_path):
    m = Mask(GRID, GRID.interior)
    io.write_field(tmp_path / "m.csv", m)
    back = io.read_field(tmp_path / "m.csv")
    np.testing.assert_array_equal(back.values[GRID.active] == 1.0, GRID.interior[GRID.active])


def test_read_field_rejects_bad_files(tmp_path):
    io.write_field(tmp_path / "f.csv", ScalarField(GRID, np.zeros(GRID.shape)))
    lines = (tmp_path / "f.csv").read_text().splitlines()
    (tmp_path / "f.csv").write_text("\n".join(lines[:-3]) + "\n")
    with pytest.raises(ValueError):
        io.read_field(tmp_path / "f.csv")
    (tmp_path / "g.csv").write_text("a,b\n")
    with pytest.raises(ValueError):
        io.read_field(tmp_path / "g.csv", GRID)


def test_config_validation_and_hash():
    a = ExperimentConfig(experiment="radial_solve", out="x")
    b = ExperimentConfig(experiment="radial_solve", out="y")
    assert a.hash() == b.hash()
    assert a.hash() != ExperimentConfig(experiment="radial_solve", spacing=0.05).hash()
    assert ExperimentConfig.from_dict(a.to_dict()) == a
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="bogus")
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"experiment": "radial_solve", "spacng": 0.1})
    with pytest.raises(ValueError):
        ExperimentConfig(domain={"shape": "hexagon"})


def test_run_experiment_manifest(tmp_path):
    m = run_experiment(ExperimentConfig(experiment="radial_profile", out=str(tmp_path)))
    assert m["status"] == "pass"
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk["config_hash"] == m["config_hash"]
    names = {f["path"] for f in m["files"]}
    assert {"radial_profile.csv", "radial_curves.csv"} <= names
    assert all(len(f["sha256"]) == 64 for f in m["files"])


def test_cli_pipeline(tmp_path, capsys):
    sol = tmp_path / "inf"
    assert main(["solve-inf", "--spacing", "0.1", "--out", str(sol)]) == 0
    assert (sol / "solution.csv").exists() and (sol / "residuals.json").exists()
    assert main(["cones", "--spacing", "0.1", "--solution", str(sol / "solution.csv"),
                 "--tol", "0.05", "--out", str(tmp_path / "cones")]) == 0
    assert main(["analyze", "--solution", str(sol / "solution.csv"), "--psi", str(sol / "psi.csv"),
                 "--r-min", "0.3", "--r-max", "0.8", "--out", str(tmp_path / "an")]) == 0
    assert (tmp_path / "an" / "growth_fits.csv").exists()
    assert main(["solve-p", "--spacing", "0.1", "--p", "5", "--out", str(tmp_path / "p")]) == 0
    assert main(["radial", "--out", str(tmp_path / "radial")]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out


def test_cli_bad_input_exits_nonzero(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"spacing": -1}))
    assert main(["solve-inf", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["solve-inf", "--method", "newton"])
