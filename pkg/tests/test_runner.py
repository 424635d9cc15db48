"""Tests for runner module."""

import json
from unittest.mock import patch

import numpy as np
import pytest

from frachk.config import DEFAULT_CONFIG
from frachk.errors import SolverError
from frachk.output import read_csv
from frachk.runner import run
from frachk.scenario import load_bundled
from frachk.sweep import SweepConfig

FAST_SWEEP = SweepConfig(relaxation=0.5, max_iterations=500, tolerance=1e-5, min_relaxation=1e-3)


def small(name="example1", n=64):
    return load_bundled(name).replace(n=n, sweep=FAST_SWEEP)


def serial_config():
    config = dict(DEFAULT_CONFIG)
    config["parallel_compare"] = False
    return config


class TestRunModes:
    """Test the artifacts written by each run mode."""

    def test_compare_writes_everything(self, tmp_path):
        artifacts = run(small(), "compare", tmp_path)
        names = sorted(p.name for p in tmp_path.iterdir())
        assert names == [
            "control.csv",
            "costate.csv",
            "state.csv",
            "summary.json",
            "uncontrolled_state.csv",
        ]
        summary = json.loads(artifacts.summary_path.read_text(encoding="utf-8"))
        assert summary["scenario"] == "example1"
        assert summary["mode"] == "compare"
        assert summary["n"] == 64
        assert summary["cost"] <= summary["cost_zero_control"]
        assert summary["diameter_ratio"] == pytest.approx(
            summary["terminal_diameter_controlled"] / summary["terminal_diameter_uncontrolled"]
        )
        assert len(summary["singular_coefficients"]) == 5

    def test_uncontrolled_only(self, tmp_path):
        artifacts = run(small(), "uncontrolled", tmp_path)
        assert sorted(p.name for p in tmp_path.iterdir()) == ["summary.json", "uncontrolled_state.csv"]
        assert artifacts.state is None
        summary = artifacts.summary
        assert summary["cost"] is None
        assert summary["diameter_ratio"] is None
        assert summary["terminal_diameter_uncontrolled"] > 0

    def test_controlled_only(self, tmp_path):
        artifacts = run(small(), "controlled", tmp_path)
        assert artifacts.uncontrolled_state is None
        header, times, values = read_csv(artifacts.control)
        assert header == ["t", "u_1"]
        assert len(times) == 64
        assert np.all(np.abs(values) <= 1.0 + 1e-12)
        assert artifacts.summary["terminal_residual"] == 0.0

    def test_unknown_mode(self, tmp_path):
        with pytest.raises(ValueError, match="Unknown mode"):
            run(small(), "both", tmp_path)


class TestRunOverwrite:
    """Test collision handling."""

    def test_refuses_existing_artifacts(self, tmp_path):
        (tmp_path / "summary.json").write_text("{}", encoding="utf-8")
        with pytest.raises(FileExistsError, match="--force"):
            run(small(), "uncontrolled", tmp_path)
        assert (tmp_path / "summary.json").read_text(encoding="utf-8") == "{}"

    def test_force_overwrites(self, tmp_path):
        (tmp_path / "summary.json").write_text("{}", encoding="utf-8")
        run(small(), "uncontrolled", tmp_path, force=True)
        assert json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))["mode"] == "uncontrolled"

    def test_unrelated_files_are_ignored(self, tmp_path):
        (tmp_path / "state.csv").write_text("keep\n", encoding="utf-8")
        run(small(), "uncontrolled", tmp_path)
        assert (tmp_path / "state.csv").read_text(encoding="utf-8") == "keep\n"


class TestRunResults:
    """Test numerical properties of run output."""

    def test_deterministic(self, tmp_path):
        first = run(small(), "compare", tmp_path / "a")
        second = run(small(), "compare", tmp_path / "b", config=serial_config())
        for name in ("state.csv", "costate.csv", "control.csv", "uncontrolled_state.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert first.summary == second.summary

    def test_compare_matches_single_modes(self, tmp_path):
        run(small(), "compare", tmp_path / "both")
        run(small(), "controlled", tmp_path / "controlled")
        run(small(), "uncontrolled", tmp_path / "free")
        for name in ("state.csv", "control.csv"):
            assert (tmp_path / "both" / name).read_bytes() == (tmp_path / "controlled" / name).read_bytes()
        assert (tmp_path / "both" / "uncontrolled_state.csv").read_bytes() == (
            tmp_path / "free" / "uncontrolled_state.csv"
        ).read_bytes()

    def test_consensus_needs_no_control(self, tmp_path):
        scenario = small().replace(x0=np.full((5, 1), 0.25))
        artifacts = run(scenario, "controlled", tmp_path)
        _, _, control = read_csv(artifacts.control)
        assert np.all(control == 0)
        assert artifacts.summary["iterations"] == 1
        assert artifacts.summary["converged"] is True

    def test_solver_error_names_scenario(self, tmp_path):
        with patch("frachk.runner.sweep", side_effect=SolverError("Cost is not finite at sweep iteration 0")):
            with pytest.raises(SolverError, match="scenario 'example1': Cost is not finite"):
                run(small(), "controlled", tmp_path)
        assert not (tmp_path / "summary.json").exists()

    def test_solver_value_error_becomes_solver_error(self, tmp_path):
        with patch("frachk.runner.sweep", side_effect=ValueError("Control sample at node 3 exceeds the bound")):
            with pytest.raises(SolverError, match="scenario 'example1': Control sample at node 3"):
                run(small(), "controlled", tmp_path)
        assert not (tmp_path / "summary.json").exists()

    def test_example1_control_beats_free_dynamics(self, tmp_path):
        artifacts = run(small(n=256), "compare", tmp_path)
        summary = artifacts.summary
        assert summary["converged"] is True
        assert summary["diameter_ratio"] < 1
        assert summary["pmp_violation"] <= 1e-4
