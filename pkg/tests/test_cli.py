"""Tests for the command line."""

import json
from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np
import pytest

from stochadjoint.core.events import EventBus
from stochadjoint.main import EXIT_FAILED, EXIT_INVALID, EXIT_OK, main
from stochadjoint.spaces import Process, build_wiener_tree


class TestSpaceCommand:
    """Test cases for `stochadjoint space`."""

    def setup_method(self):
        """Reset event bus before each test."""
        EventBus.reset_instance()

    def test_prints_level_sizes(self, capsys):
        """Test the level listing of a Wiener tree."""
        assert main(["space", "--n-steps", "3"]) == EXIT_OK

        out = capsys.readouterr().out
        assert "level 0 (t=0): 1 atoms" in out
        assert "level 3 (t=1): 8 atoms" in out

    def test_writes_tree_json(self):
        """Test the tree JSON of a joint model."""
        with TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "tree.json"

            args = ["--model", "joint", "--n-steps", "2", "--mark", "y=0.5", "--output", str(path)]
            code = main(["space", *args])
            data = json.loads(path.read_text(encoding="utf-8"))

        assert code == EXIT_OK
        assert data["space"] == {
            "model": "joint",
            "n_steps": 2,
            "marks": [{"label": "y", "pi": 0.5}],
        }
        assert data["branching"] == 4
        assert len(data["levels"]) == 3

    def test_inadmissible_intensity(self, capsys):
        """Test that pi * dt >= 1 is a validation error."""
        code = main(["space", "--model", "poisson", "--n-steps", "1", "--mark", "a=1"])

        assert code == EXIT_INVALID
        assert "increase n_steps" in capsys.readouterr().err

    def test_atom_cap(self):
        """Test that an exact tree beyond the cap is refused."""
        assert main(["space", "--n-steps", "12", "--max-atoms", "1000"]) == EXIT_INVALID

    @pytest.mark.parametrize(
        "argv",
        [
            ["space", "--n-steps", "0"],
            ["space", "--mark", "nonumber"],
            ["space", "--mark", "a=x"],
            ["space", "--workers", "0"],
        ],
    )
    def test_invalid_flags(self, argv, capsys):
        """Test that bad overrides exit with the validation code."""
        assert main(argv) == EXIT_INVALID
        assert "error:" in capsys.readouterr().err

    def test_corrupted_config(self):
        """Test that an unreadable config file is a validation error."""
        with TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "config.json"
            path.write_text("{not json", encoding="utf-8")

            assert main(["space", "--config", str(path)]) == EXIT_INVALID


class TestCheckAndReportCommands:
    """Test cases for `stochadjoint check` and `stochadjoint report`."""

    def setup_method(self):
        """Reset event bus before each test."""
        EventBus.reset_instance()

    def test_check_writes_report(self, capsys):
        """Test a small exact run and re-reading its report."""
        with TemporaryDirectory() as tmpdir:
            json_path = Path(tmpdir) / "report.json"
            csv_path = Path(tmpdir) / "report.csv"

            code = main(
                [
                    "check", "--checks", "doob,polarization", "--mc-paths", "0",
                    "--json", str(json_path), "--csv", str(csv_path),
                ]
            )
            data = json.loads(json_path.read_text(encoding="utf-8"))
            assert csv_path.exists()

            assert code == EXIT_OK
            assert {e["id"].split(".")[0] for e in data["entries"]} == {"doob", "polarization"}
            assert data["config"]["checks"] == ["doob", "polarization"]

            assert main(["report", str(json_path)]) == EXIT_OK
        assert "0 failed" in capsys.readouterr().out

    def test_unknown_check_id(self):
        """Test that an unknown id is a validation error."""
        assert main(["check", "--checks", "nope"]) == EXIT_INVALID

    def test_report_detects_tampering(self, capsys):
        """Test that a pass flag that disagrees with the values fails the re-check."""
        with TemporaryDirectory() as tmpdir:
            json_path = Path(tmpdir) / "report.json"
            main(["check", "--checks", "doob", "--mc-paths", "0", "--json", str(json_path)])
            data = json.loads(json_path.read_text(encoding="utf-8"))
            data["entries"][0]["passed"] = False
            json_path.write_text(json.dumps(data), encoding="utf-8")

            code = main(["report", str(json_path)])

        assert code == EXIT_FAILED
        assert "pass flags disagree" in capsys.readouterr().out

    def test_report_hard_failure(self):
        """Test that a consistent hard failure exits with 1."""
        with TemporaryDirectory() as tmpdir:
            json_path = Path(tmpdir) / "report.json"
            main(["check", "--checks", "doob", "--mc-paths", "0", "--json", str(json_path)])
            data = json.loads(json_path.read_text(encoding="utf-8"))
            entry = next(e for e in data["entries"] if e["id"] == "doob.p2")
            entry["lhs"] = entry["rhs"] + 1.0
            entry["passed"] = False
            json_path.write_text(json.dumps(data), encoding="utf-8")

            assert main(["report", str(json_path)]) == EXIT_FAILED

    def test_missing_report(self):
        """Test that a missing report file is a validation error."""
        assert main(["report", "/nonexistent/report.json"]) == EXIT_INVALID


class TestKernelAndAdjointCommands:
    """Test cases for `stochadjoint kernel` and `stochadjoint adjoint`."""

    def setup_method(self):
        """Reset event bus before each test."""
        EventBus.reset_instance()

    def test_clark_kernel_of_named_variable(self, capsys):
        """Test the kernel of w(1)^2 printed to stdout."""
        assert main(["kernel", "--input-name", "w1_squared", "--n-steps", "4"]) == EXIT_OK

        captured = capsys.readouterr()
        data = json.loads(captured.out)
        assert data["kind"] == "clark_decomposition"
        assert data["mean"] == pytest.approx(1.0)
        assert "reconstruction error" in captured.err

    def test_kernel_of_process_file(self, capsys):
        """Test extract_K on a process read from a JSON file."""
        tree = build_wiener_tree(3)
        with TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "w.json"
            path.write_text(
                json.dumps(Process.wiener(tree).with_terminal(None).to_dict()), encoding="utf-8"
            )

            assert main(["kernel", "--input", str(path)]) == EXIT_OK

        data = json.loads(capsys.readouterr().out)
        assert data["kind"] == "kernel"
        np.testing.assert_allclose(data["mean"], 0.0, atol=1e-15)
        np.testing.assert_allclose([e[-1] for e in data["entries"]], 1.0, atol=1e-12)

    def test_adjoint_L_of_one(self, capsys):
        """Test L*(1)(t_j) = 1 - t_{j+1}."""
        assert main(["adjoint", "--which", "L", "--input-name", "one", "--n-steps", "4"]) == EXIT_OK

        data = json.loads(capsys.readouterr().out)
        assert data["kind"] == "process"
        assert [level[0] for level in data["levels"]] == pytest.approx([0.75, 0.5, 0.25, 0.0])

    def test_adjoint_with_oracle_and_csv(self, capsys):
        """Test the oracle comparison and the CSV table."""
        with TemporaryDirectory() as tmpdir:
            output = Path(tmpdir) / "adjoint.json"
            csv_path = Path(tmpdir) / "adjoint.csv"

            code = main(
                [
                    "adjoint", "--which", "P", "--input-name", "count", "--model", "poisson",
                    "--n-steps", "3", "--mark", "y=0.5", "--compare-oracle",
                    "--output", str(output), "--csv", str(csv_path),
                ]
            )
            data = json.loads(output.read_text(encoding="utf-8"))
            header = csv_path.read_bytes().split(b"\r\n")[0]

        assert code == EXIT_OK
        assert data["kind"] == "marked_process"
        assert header == b"level,t,atom,mark,value"
        delta = float(capsys.readouterr().out.split("max oracle delta:")[1])
        assert delta < 1e-12

    def test_poisson_adjoint_on_wiener_tree(self, capsys):
        """Test that P* needs marks."""
        assert main(["adjoint", "--which", "P", "--input-name", "one"]) == EXIT_INVALID
        assert "no marks" in capsys.readouterr().err

    def test_input_errors(self):
        """Test unknown names and missing inputs."""
        assert main(["adjoint", "--which", "L", "--input-name", "nope"]) == EXIT_INVALID
        assert main(["adjoint", "--which", "L"]) == EXIT_INVALID

    def test_input_file_carries_its_space(self):
        """Test that a file written for another tree is read on that tree."""
        tree = build_wiener_tree(2)
        with TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "one.json"
            path.write_text(json.dumps(Process.constant(tree, 1.0).to_dict()), encoding="utf-8")

            args = ["adjoint", "--which", "J", "--input", str(path), "--n-steps", "5"]
            assert main(args) == EXIT_OK
