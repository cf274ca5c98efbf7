"""Tests for SuiteConfig."""

import json
from pathlib import Path
from tempfile import TemporaryDirectory

import pytest

from stochadjoint.core.errors import ConfigError
from stochadjoint.core.settings import MarkSpec, SuiteConfig


class TestSuiteConfig:
    """Test cases for the SuiteConfig dataclass."""

    def test_default_values(self):
        """Test that default values are set correctly."""
        config = SuiteConfig()

        assert config.model == "wiener"
        assert config.n_steps == 4
        assert config.seed == 0
        assert config.mc_paths == 100_000
        assert config.p_values == [2.0, 4.0]
        assert config.tolerances.exact == 1e-10
        assert config.tolerances.mc_sigmas == 4.0
        assert config.checks is None
        assert config.max_atoms == 2**20
        assert [m.pi for m in config.marks] == [1.0, 0.5]

    def test_save_and_load(self):
        """Test saving and loading a configuration file."""
        with TemporaryDirectory() as tmpdir:
            config_file = Path(tmpdir) / "config.json"

            config = SuiteConfig(
                model="joint",
                n_steps=3,
                marks=[MarkSpec("a", 0.25)],
                checks=["doob"],
                _config_file=config_file,
            )
            config.save()
            assert config_file.exists()

            loaded = SuiteConfig.load(config_file)

            assert loaded.model == "joint"
            assert loaded.n_steps == 3
            assert loaded.marks == [MarkSpec("a", 0.25)]
            assert loaded.checks == ["doob"]
            assert loaded.to_dict() == config.to_dict()

    def test_update_method(self):
        """Test that update overrides fields and skips None values."""
        config = SuiteConfig()

        config.update(n_steps=6, seed=None, mc_paths=0)

        assert config.n_steps == 6
        assert config.seed == 0
        assert config.mc_paths == 0

    def test_update_revalidates(self):
        """Test that an invalid override is rejected."""
        config = SuiteConfig()

        with pytest.raises(ConfigError) as excinfo:
            config.update(n_steps=0)

        assert excinfo.value.field_path == "n_steps"

    def test_load_nonexistent_file(self):
        """Test loading from nonexistent file returns defaults."""
        with TemporaryDirectory() as tmpdir:
            config = SuiteConfig.load(Path(tmpdir) / "nonexistent.json")

            assert config.n_steps == 4
            assert config.model == "wiener"

    def test_load_corrupted_file(self):
        """Test that a corrupted file is an error, not silently the defaults."""
        with TemporaryDirectory() as tmpdir:
            config_file = Path(tmpdir) / "config.json"
            config_file.write_text("not valid json {{{", encoding="utf-8")

            with pytest.raises(ConfigError) as excinfo:
                SuiteConfig.load(config_file)

            assert excinfo.value.field_path == "<root>"

    def test_error_names_the_field_path(self):
        """Test that validation errors point at the offending field."""
        with TemporaryDirectory() as tmpdir:
            config_file = Path(tmpdir) / "config.json"
            data = {
                "model": "poisson",
                "marks": [{"label": "a", "pi": 1.0}, {"label": "b", "pi": -1.0}],
            }
            config_file.write_text(json.dumps(data), encoding="utf-8")

            with pytest.raises(ConfigError) as excinfo:
                SuiteConfig.load(config_file)

            assert excinfo.value.field_path == "marks[1].pi"

    def test_unknown_key_rejected(self):
        """Test that unknown settings are reported by name."""
        with pytest.raises(ConfigError) as excinfo:
            SuiteConfig.from_dict({"n_step": 4})

        assert excinfo.value.field_path == "n_step"

    def test_unknown_check_id(self):
        """Test that check ids are validated against the registry when given."""
        config = SuiteConfig(checks=["doob", "nope"])

        with pytest.raises(ConfigError) as excinfo:
            config.validate(known_checks=["doob", "bdg"])

        assert excinfo.value.field_path == "checks[1]"

    def test_marked_model_needs_marks(self):
        """Test that poisson and joint models require a mark set."""
        with pytest.raises(ConfigError) as excinfo:
            SuiteConfig(model="joint", marks=[]).validate()

        assert excinfo.value.field_path == "marks"

    def test_tolerance_override_and_hard_fail(self):
        """Test per-check tolerance and hard-fail overrides."""
        config = SuiteConfig.from_dict(
            {"tolerances": {"overrides": {"doob": 1e-6}}, "hard_fail": {"bdg": False}}
        )

        assert config.tolerance_for("doob", 1e-10) == 1e-6
        assert config.tolerance_for("bdg", 1e-10) == 1e-10
        assert config.is_hard("bdg", True) is False
        assert config.is_hard("doob", True) is True
