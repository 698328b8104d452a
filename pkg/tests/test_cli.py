"""Command line interface tests via click's runner."""

from __future__ import annotations

import json

import numpy as np
import pytest
from click.testing import CliRunner

from eigenvol.cli import main
from eigenvol.fixtures import icosphere
from eigenvol.mesh import save_off


@pytest.fixture()
def runner():
    return CliRunner()


def test_constants_json(runner):
    result = runner.invoke(main, ["constants", "-n", "2", "-m", "2"])
    assert result.exit_code == 0
    data = json.loads(result.output)
    assert data["covering_number"] == 81
    assert data["mass_fraction"].startswith("1/")
    assert data["floats"]["higher_eigenvalue"] > 1e25


def test_constants_reject_odd_dimension(runner):
    result = runner.invoke(main, ["constants", "-n", "3"])
    assert result.exit_code != 0
    assert "odd n" in result.output


def test_spectrum_fixture_json(runner):
    result = runner.invoke(
        main, ["spectrum", "--fixture", "icosphere:2", "--count", "5"]
    )
    assert result.exit_code == 0
    data = json.loads(result.output)
    assert data["num_zero"] == 1
    assert data["eigenvalues"][1] == pytest.approx(2.0, rel=0.01)
    assert data["genus"] == 0


def test_spectrum_csv(runner):
    result = runner.invoke(
        main,
        ["spectrum", "--fixture", "flat:6.283,6.283,12", "--count", "4",
         "--format", "csv"],
    )
    assert result.exit_code == 0
    lines = result.output.strip().splitlines()
    assert lines[0] == "k,eigenvalue,residual"
    assert len(lines) == 5


def test_spectrum_from_off_file(runner, tmp_path):
    path = tmp_path / "sphere.off"
    save_off(icosphere(2), path)
    result = runner.invoke(main, ["spectrum", "--mesh", str(path), "--count", "3"])
    assert result.exit_code == 0
    data = json.loads(result.output)
    assert data["volume"] == pytest.approx(4 * np.pi, rel=0.03)


def test_mesh_and_fixture_are_exclusive(runner, tmp_path):
    path = tmp_path / "sphere.off"
    save_off(icosphere(1), path)
    result = runner.invoke(
        main, ["spectrum", "--fixture", "icosphere:1", "--mesh", str(path)]
    )
    assert result.exit_code != 0
    assert "exactly one" in result.output
    result = runner.invoke(main, ["spectrum"])
    assert result.exit_code != 0


def test_unknown_fixture_rejected(runner):
    result = runner.invoke(main, ["spectrum", "--fixture", "klein:3"])
    assert result.exit_code != 0
    assert "unknown fixture" in result.output


def test_gny_reports_verified_family(runner):
    result = runner.invoke(main, ["gny", "--fixture", "icosphere:2", "-k", "3"])
    assert result.exit_code == 0
    data = json.loads(result.output)
    assert data["ok"] is True
    assert data["disjoint_doubles"] is True
    assert len(data["masses"]) == 3
    assert min(data["masses"]) >= data["target_mass"]


def test_confvol_identity_sphere(runner):
    result = runner.invoke(
        main, ["confvol", "--fixture", "icosphere:2", "--starts", "1"]
    )
    assert result.exit_code == 0
    data = json.loads(result.output)
    assert data["value"] == pytest.approx(4 * np.pi, rel=0.03)
    assert data["diverged"] is False


def test_index_clifford(runner):
    result = runner.invoke(
        main,
        ["index", "--fixture", "clifford:24", "--shape-squared", "2.0",
         "--reference", "5"],
    )
    assert result.exit_code == 0
    assert "index = 5" in result.output


def test_verify_section_and_report(runner, tmp_path):
    out = tmp_path / "report.json"
    result = runner.invoke(main, ["verify", "constants", "--out", str(out)])
    assert result.exit_code == 0
    assert "== constants ==" in result.output
    assert "0 fail" in result.output
    report = json.loads(out.read_text())
    assert report["schema_version"] == 1
    assert report["all_ok"] is True
    # timestamps live in the side file, never in the report itself
    assert "written_at" not in json.dumps(report)
    meta = json.loads((tmp_path / "report.run_meta.json").read_text())
    assert "written_at" in meta


def test_verify_unknown_battery(runner):
    result = runner.invoke(main, ["verify", "nonsense"])
    assert result.exit_code != 0
    assert "unknown battery" in result.output


def test_plot_data_csv(runner, tmp_path):
    out = tmp_path / "stair.csv"
    result = runner.invoke(
        main,
        ["plot-data", "--fixture", "icosphere:2", "--count", "30",
         "--k-range", "5", "25", "--out", str(out)],
    )
    assert result.exit_code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "k,eigenvalue,weyl_line,fit_line"
    assert len(lines) == 31
