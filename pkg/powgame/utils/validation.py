"""
Validation utilities for powgame.

Schema of scenario YAML files, command-line overrides and conversion of
validation failures into one-line-per-field diagnostics.
"""

from __future__ import annotations

import hashlib
import json
from copy import deepcopy
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from powgame.exceptions import ConfigError
from powgame.game_core import MiningEnvironment, ModelParams


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(_Section):
    """Population counts plus either d or the raw (h, c, v) economics."""

    m: int = Field(ge=1)
    n: int = Field(ge=1)
    d: Optional[float] = Field(default=None, gt=0)
    h: Optional[int] = Field(default=None, ge=0)
    c: Optional[float] = Field(default=None, gt=0)
    v: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _one_difficulty_source(self) -> "ModelSection":
        raw = [self.h, self.c, self.v]
        if self.d is not None and any(x is not None for x in raw):
            raise ValueError("give either d or (h, c, v), not both")
        if self.d is None and not all(x is not None for x in raw):
            raise ValueError("give d or all of h, c, v")
        return self

    def to_params(self) -> ModelParams:
        if self.d is not None:
            return ModelParams(m=self.m, n=self.n, d=self.d)
        return MiningEnvironment(h=self.h, c=self.c, v=self.v).to_params(self.m, self.n)


class ControllerSection(_Section):
    R_star: float = Field(gt=0)
    x_bar: float = Field(default=1.0, gt=0, le=1)
    K: Optional[float] = None
    eps: Optional[float] = None
    gain_margin: float = Field(default=0.01, ge=0)
    eps_fraction: float = Field(default=1.0, gt=0, le=1)


class RewardSection(_Section):
    R: Optional[float] = Field(default=None, gt=0)
    controller: Optional[ControllerSection] = None

    @model_validator(mode="after")
    def _one_variant(self) -> "RewardSection":
        if (self.R is None) == (self.controller is None):
            raise ValueError("give exactly one of R or controller")
        return self


class RunSection(_Section):
    x1_init: float = Field(default=0.1, ge=0, le=1)
    t_end: float = Field(default=50.0, gt=0)
    dt: float = Field(default=1e-3, gt=0)
    tol: float = Field(default=1e-6, gt=0)
    t_max: float = Field(default=1000.0, gt=0)
    max_steps: int = Field(default=10_000_000, ge=1)


class SweepSection(_Section):
    R_from: float = Field(gt=0)
    R_to: float = Field(gt=0)
    step: float = Field(gt=0)
    direction: Literal["up", "down"] = "up"
    x1_seed: Optional[float] = Field(default=None, ge=0, le=1)

    def path(self) -> List[float]:
        """Rewards visited, ascending for up-sweeps and descending for down-sweeps."""
        lo, hi = sorted((self.R_from, self.R_to))
        count = int(np.floor((hi - lo) / self.step + 1e-9)) + 1
        values = [lo + i * self.step for i in range(count)]
        return values if self.direction == "up" else values[::-1]

    def seed(self) -> float:
        if self.x1_seed is not None:
            return self.x1_seed
        return 0.0 if self.direction == "up" else 1.0


class BifurcationSection(_Section):
    R_from: float = Field(gt=0)
    R_to: float = Field(gt=0)
    samples: int = Field(default=201, ge=2)


class RegionMapSection(_Section):
    m_from: int = Field(default=1, ge=1)
    m_to: int = Field(default=10, ge=1)
    rd_from: float = Field(default=0.01, gt=0)
    rd_to: float = Field(default=1.0, gt=0)
    resolution: int = Field(default=100, ge=1)


class AgentsSection(_Section):
    n_strategic: List[int] = Field(default_factory=lambda: [100, 1000, 10000])
    seeds: int = Field(default=50, ge=1)
    base_seed: int = Field(default=0, ge=0)
    revision_rate: Optional[float] = Field(default=None, gt=0)
    horizon: float = Field(default=10.0, gt=0)
    sample_dt: float = Field(default=0.1, gt=0)

    @field_validator("n_strategic", mode="before")
    @classmethod
    def _as_list(cls, value: Any) -> Any:
        return [value] if isinstance(value, int) else value

    @field_validator("n_strategic")
    @classmethod
    def _at_least_two(cls, value: List[int]) -> List[int]:
        if not value or any(n < 2 for n in value):
            raise ValueError("every population size must be >= 2")
        return value


class ScenarioConfig(_Section):
    """A complete, validated run description."""

    model: ModelSection
    reward: RewardSection
    run: RunSection = Field(default_factory=RunSection)
    sweep: Optional[SweepSection] = None
    bifurcation: Optional[BifurcationSection] = None
    region_map: Optional[RegionMapSection] = None
    agents: Optional[AgentsSection] = None

    def params(self) -> ModelParams:
        return self.model.to_params()

    def digest(self) -> str:
        """SHA-256 of the normalized config; identical configs share a digest."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def validate_scenario(raw: Dict[str, Any]) -> ScenarioConfig:
    """Validate a raw scenario mapping.

    Raises:
        ConfigError: One line per failing field path.

    Examples:
        >>> cfg = validate_scenario({"model": {"m": 2, "n": 2, "d": 100}, "reward": {"R": 40}})
        >>> cfg.params().d
        100.0
    """
    if not isinstance(raw, dict):
        raise ConfigError("Scenario must be a mapping at top level")
    try:
        return ScenarioConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(format_validation_error(e)) from e


def format_validation_error(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        path = ".".join(str(p) for p in item["loc"]) or "<root>"
        lines.append(f"{path}: {item['msg']}")
    return "\n".join(lines)


def parse_override(text: str) -> Tuple[List[str], Any]:
    """Split 'section.key=value' into a key path and a YAML-parsed value.

    Examples:
        >>> parse_override("run.dt=0.01")
        (['run', 'dt'], 0.01)
    """
    if "=" not in text:
        raise ConfigError(f"Override must look like section.key=value, got: {text}")
    key, value = text.split("=", 1)
    path = [p for p in key.strip().split(".") if p]
    if not path:
        raise ConfigError(f"Override has an empty key: {text}")
    try:
        parsed = yaml.safe_load(value)
    except yaml.YAMLError as e:
        raise ConfigError(f"Override value is not valid YAML: {text} ({e})") from e
    return path, parsed


def apply_overrides(raw: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Return a copy of raw with each override applied (original unchanged)."""
    result = deepcopy(raw)
    for text in overrides:
        path, value = parse_override(text)
        node = result
        for part in path[:-1]:
            child = node.get(part)
            if child is None:
                child = node[part] = {}
            if not isinstance(child, dict):
                raise ConfigError(f"Override {text}: '{part}' is not a section")
            node = child
        node[path[-1]] = value
    return result


def normalize_scenario(raw: Dict[str, Any], defaults: Dict[str, Any]) -> Dict[str, Any]:
    """Fill missing run settings from the global numerics defaults."""
    result = deepcopy(raw)
    run = result.get("run")
    if run is None:
        run = result["run"] = {}
    if isinstance(run, dict):
        for key, value in defaults.items():
            run.setdefault(key, value)
    return result
