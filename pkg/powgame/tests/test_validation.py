"""
Tests for the scenario schema and override handling.
"""

from typing import Any, Dict

import pytest

from powgame.exceptions import ConfigError
from powgame.utils.validation import (
    AgentsSection,
    SweepSection,
    apply_overrides,
    normalize_scenario,
    parse_override,
    validate_scenario,
)


def _raw(**extra: Any) -> Dict[str, Any]:
    raw: Dict[str, Any] = {"model": {"m": 2, "n": 2, "d": 100}, "reward": {"R": 40}}
    raw.update(extra)
    return raw


class TestValidateScenario:
    """Tests for validate_scenario function."""

    def test_minimal_scenario(self) -> None:
        """Test model and reward alone are enough; run gets defaults."""
        # Act
        cfg = validate_scenario(_raw())

        # Assert
        assert cfg.params().d == 100.0
        assert cfg.reward.R == 40.0
        assert cfg.run.x1_init == 0.1
        assert cfg.sweep is None

    def test_raw_economics_give_effective_difficulty(self) -> None:
        """Test (h, c, v) in place of d."""
        cfg = validate_scenario(_raw(model={"m": 2, "n": 2, "h": 10, "c": 1.0, "v": 8.0}))
        assert cfg.params().d == 128.0

    @pytest.mark.parametrize("model", [
        {"m": 2, "n": 2},
        {"m": 2, "n": 2, "d": 100, "h": 10, "c": 1.0, "v": 8.0},
        {"m": 2, "n": 2, "h": 10},
    ])
    def test_exactly_one_difficulty_source(self, model: Dict[str, Any]) -> None:
        """Test missing or doubled difficulty inputs."""
        with pytest.raises(ConfigError, match="model"):
            validate_scenario(_raw(model=model))

    def test_exactly_one_reward_variant(self) -> None:
        """Test R and controller together are rejected."""
        with pytest.raises(ConfigError, match="reward"):
            validate_scenario(_raw(reward={"R": 40, "controller": {"R_star": 40}}))

    def test_unknown_key_reports_field_path(self) -> None:
        """Test extra keys are rejected with their dotted path."""
        # Act
        with pytest.raises(ConfigError) as excinfo:
            validate_scenario(_raw(run={"x1_init": 0.5, "typo": 1}))

        # Assert
        assert "run.typo" in str(excinfo.value)

    def test_one_line_per_failing_field(self) -> None:
        """Test several failures are listed separately."""
        # Act
        with pytest.raises(ConfigError) as excinfo:
            validate_scenario(_raw(run={"x1_init": 2.0, "dt": -1.0}))

        # Assert
        lines = str(excinfo.value).splitlines()
        assert any(line.startswith("run.x1_init:") for line in lines)
        assert any(line.startswith("run.dt:") for line in lines)

    def test_non_mapping_rejected(self) -> None:
        """Test a YAML list at top level."""
        with pytest.raises(ConfigError):
            validate_scenario(["model"])  # type: ignore[arg-type]

    def test_digest_tracks_content(self) -> None:
        """Test equal configs share a digest and any change alters it."""
        first = validate_scenario(_raw()).digest()
        assert validate_scenario(_raw()).digest() == first
        assert validate_scenario(_raw(reward={"R": 41})).digest() != first


class TestOverrides:
    """Tests for parse_override and apply_overrides."""

    def test_parse_yaml_values(self) -> None:
        """Test values are parsed as YAML scalars and lists."""
        assert parse_override("run.dt=0.01") == (["run", "dt"], 0.01)
        assert parse_override("agents.n_strategic=[10, 20]") == (["agents", "n_strategic"], [10, 20])
        assert parse_override("sweep.direction=down") == (["sweep", "direction"], "down")

    @pytest.mark.parametrize("text", ["run.dt", "=3"])
    def test_malformed_override(self, text: str) -> None:
        """Test a missing '=' or empty key."""
        with pytest.raises(ConfigError):
            parse_override(text)

    def test_apply_creates_sections_and_keeps_original(self) -> None:
        """Test nested assignment on a copy."""
        # Arrange
        raw = _raw()

        # Act
        result = apply_overrides(raw, ["reward.R=60", "sweep.step=2.5"])

        # Assert
        assert result["reward"]["R"] == 60
        assert result["sweep"] == {"step": 2.5}
        assert raw["reward"]["R"] == 40

    def test_override_through_scalar_raises(self) -> None:
        """Test a path that descends into a scalar."""
        with pytest.raises(ConfigError):
            apply_overrides(_raw(), ["reward.R.value=3"])

    def test_normalize_fills_missing_run_keys_only(self) -> None:
        """Test global numerics never overwrite scenario values."""
        result = normalize_scenario(_raw(run={"dt": 0.01}), {"dt": 0.001, "tol": 1e-6})
        assert result["run"] == {"dt": 0.01, "tol": 1e-6}


class TestSections:
    """Tests for section helpers."""

    def test_sweep_paths(self) -> None:
        """Test ascending up-sweeps, descending down-sweeps and default seeds."""
        # Arrange
        up = SweepSection(R_from=10.0, R_to=12.0, step=0.5)
        down = SweepSection(R_from=10.0, R_to=12.0, step=0.5, direction="down")

        # Assert
        assert up.path() == [10.0, 10.5, 11.0, 11.5, 12.0]
        assert down.path() == [12.0, 11.5, 11.0, 10.5, 10.0]
        assert up.seed() == 0.0
        assert down.seed() == 1.0

    def test_agents_accepts_single_size(self) -> None:
        """Test a scalar population size becomes a list."""
        assert AgentsSection(n_strategic=100).n_strategic == [100]

    def test_agents_rejects_tiny_population(self) -> None:
        """Test sizes below two are rejected."""
        with pytest.raises(ValueError):
            AgentsSection(n_strategic=[1])
