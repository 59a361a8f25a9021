"""
Tests for the marchenko command line.
"""
import json

import numpy as np
import pytest
from typer.testing import CliRunner

from cli.marchenko.main import app
from libs.scattering.models import PhaseRecord
from marchenko_lab.ingest import write_records
from marchenko_lab.kinematics import lab_energy
from marchenko_lab.synth import bargmann_phase

M_P = 938.272
M_N = 939.565

runner = CliRunner()


@pytest.fixture(autouse=True)
def isolated_home(tmp_path, monkeypatch):
    """Keep user config files out of the runs."""
    monkeypatch.setenv("HOME", str(tmp_path))
    monkeypatch.chdir(tmp_path)


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "channel.json"
    path.write_text(json.dumps({"name": "test", "m1": M_P, "m2": M_N, "l": 0, "nodes": 2,
                                "q_max": 2.1}))
    return path


@pytest.fixture
def zero_data(tmp_path):
    path = tmp_path / "zero.csv"
    path.write_text("T_lab_MeV,delta_deg\n5,0\n20,0\n60,0\n100,0\n")
    return path


@pytest.fixture
def bargmann_data(tmp_path):
    records = [
        PhaseRecord(q=q, delta=float(bargmann_phase(q, 0.5, 1.5)), delta_err=0.01,
                    t_lab=float(lab_energy(q, M_P, M_N)))
        for q in np.linspace(0.1, 2.0, 24)
    ]
    return write_records(records, tmp_path / "bargmann.csv")


def test_version():
    """version prints the package version."""
    result = runner.invoke(app, ["version"])
    assert result.exit_code == 0
    assert "marchenko version" in result.output


def test_run_zero_data(tmp_path, config_file, zero_data):
    """Vanishing phases run through and write both outputs."""
    out = tmp_path / "results"
    result = runner.invoke(app, ["run", "-c", str(config_file), "-i", str(zero_data),
                                 "-o", str(out), "--grid", "200"])
    assert result.exit_code == 0, result.output
    assert (out / "test_potential.csv").exists()
    report = json.loads((out / "test_report.json").read_text())
    assert report["gate_passed"]
    assert report["poles"] == []


def test_fit_lists_no_poles(config_file, zero_data):
    """A zero fit has an empty spectrum."""
    result = runner.invoke(app, ["fit", "-c", str(config_file), "-i", str(zero_data)])
    assert result.exit_code == 0, result.output
    assert "no poles" in result.output


def test_missing_column_is_input_error(tmp_path, config_file):
    """Schema problems exit with code 3."""
    data = tmp_path / "bad.csv"
    data.write_text("T_lab_MeV,phase\n5,0\n")
    result = runner.invoke(app, ["run", "-c", str(config_file), "-i", str(data)])
    assert result.exit_code == 3


def test_qmax_inside_data_is_input_error(config_file, zero_data):
    """A Q_max below the data range exits with code 3."""
    result = runner.invoke(app, ["invert", "-c", str(config_file), "-i", str(zero_data),
                                 "--qmax", "0.2", "--grid", "200"])
    assert result.exit_code == 3


def test_missing_config_is_input_error(tmp_path, zero_data):
    """Unreadable configs exit with code 3."""
    result = runner.invoke(app, ["run", "-c", str(tmp_path / "nope.json"), "-i", str(zero_data)])
    assert result.exit_code == 3


def test_gate_failure_exit_code(tmp_path, config_file, bargmann_data):
    """A residual above the gate exits with code 2 after writing outputs."""
    out = tmp_path / "gated"
    result = runner.invoke(app, ["invert", "-c", str(config_file), "-i", str(bargmann_data),
                                 "-o", str(out), "--grid", "400", "--rmax", "10",
                                 "--gate", "1e-14"])
    assert result.exit_code == 2, result.output
    assert (out / "test_potential.csv").exists()


def test_forward_on_written_potential(tmp_path, config_file, zero_data):
    """forward reads a potential table and prints phases."""
    out = tmp_path / "results"
    runner.invoke(app, ["invert", "-c", str(config_file), "-i", str(zero_data), "-o", str(out),
                        "--grid", "200"])
    table = tmp_path / "phases.csv"
    result = runner.invoke(app, ["forward", "-p", str(out / "test_potential.csv"),
                                 "--q", "0.5", "--q", "1.0", "-o", str(table)])
    assert result.exit_code == 0, result.output
    assert table.read_text().startswith("q,delta_deg")


def test_synth_writes_records(tmp_path):
    """synth writes forward-solved data for a built-in potential."""
    out = tmp_path / "synthetic.csv"
    result = runner.invoke(app, ["synth", "--potential", "exponential", "--points", "3",
                                 "--t-max", "50", "-o", str(out)])
    assert result.exit_code == 0, result.output
    assert len(out.read_text().strip().splitlines()) == 4


def test_synth_unknown_potential():
    """Unknown built-in names exit with code 3."""
    result = runner.invoke(app, ["synth", "--potential", "square"])
    assert result.exit_code == 3
