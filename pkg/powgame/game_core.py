"""
Game core for powgame.

Model symbols and closed-form functions of the mining participation game:
difficulty, Poisson mining rates, expected reward and cost, utilities,
the replicator vector field and its derivative.

Every function here is pure. The closed forms accept numpy arrays as well
as floats, so grids are evaluated without Python loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from powgame.exceptions import ParameterError

ArrayLike = Union[float, np.ndarray]

STRATEGY_ABSTAIN = 0
STRATEGY_MINE = 1


@dataclass(frozen=True)
class MiningEnvironment:
    """Raw protocol/economics inputs.

    Attributes:
        h: Leading zero bits required of a block hash.
        c: Operating cost per unit time.
        v: Hash queries per unit cost (w = v * c).
    """

    h: int
    c: float
    v: float

    def __post_init__(self) -> None:
        if isinstance(self.h, bool) or not isinstance(self.h, (int, np.integer)) or self.h < 0:
            raise ParameterError(f"h must be a nonnegative integer, got: {self.h}")
        if not self.c > 0:
            raise ParameterError(f"c must be positive, got: {self.c}")
        if not self.v > 0:
            raise ParameterError(f"v must be positive, got: {self.v}")

    @property
    def hash_rate(self) -> float:
        """Hash queries per unit operating time, w = v * c."""
        return self.v * self.c

    def to_params(self, m: int, n: int) -> "ModelParams":
        """Build model parameters for m always-on and n strategic miners."""
        _, d = difficulty(self)
        return ModelParams(m=m, n=n, d=d)


@dataclass(frozen=True)
class ModelParams:
    """Population counts and effective difficulty d = D / v."""

    m: int
    n: int
    d: float

    def __post_init__(self) -> None:
        for name in ("m", "n"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ParameterError(f"{name} must be an integer >= 1, got: {value}")
        if not (math.isfinite(self.d) and self.d > 0):
            raise ParameterError(f"d must be positive and finite, got: {self.d}")

    @property
    def lower_threshold(self) -> float:
        """Reward d/(m+n) below which full participation is unstable."""
        return self.d / (self.m + self.n)

    @property
    def upper_threshold(self) -> float:
        """Reward d/m above which abstention is unstable."""
        return self.d / self.m


@dataclass(frozen=True)
class PopulationState:
    """Share of strategic miners choosing to mine."""

    x1: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.x1 <= 1.0:
            raise ParameterError(f"x1 must lie in [0, 1], got: {self.x1}")

    @property
    def x0(self) -> float:
        return 1.0 - self.x1


def difficulty(env: MiningEnvironment) -> Tuple[float, float]:
    """Return the difficulty D = 2^h and effective difficulty d = D / v.

    Raises:
        ParameterError: If 2^h or D / v leaves the double-precision range.

    Examples:
        >>> difficulty(MiningEnvironment(h=10, c=1.0, v=8.0))
        (1024.0, 128.0)
    """
    try:
        D = math.ldexp(1.0, env.h)
    except OverflowError as e:
        raise ParameterError(f"2^{env.h} exceeds the floating-point range") from e
    d = D / env.v
    if not math.isfinite(d):
        raise ParameterError(f"D/v = 2^{env.h}/{env.v} exceeds the floating-point range")
    return D, d


def poisson_rate(env: MiningEnvironment, s: int) -> float:
    """Block-discovery rate s * c / d of a miner playing strategy s."""
    _check_strategy(s)
    _, d = difficulty(env)
    return s * env.c / d


def expected_reward(params: ModelParams, R: float, s: int, x1: ArrayLike) -> ArrayLike:
    """Expected reward R * s / (m + n * x1)."""
    _check_strategy(s)
    return R * s / _pool(params, x1)


def expected_cost(params: ModelParams, s: int, x1: ArrayLike) -> ArrayLike:
    """Expected cost d * s / (m + n * x1)^2."""
    _check_strategy(s)
    pool = _pool(params, x1)
    return params.d * s / (pool * pool)


def utility(params: ModelParams, R: ArrayLike, strategy: int, x1: ArrayLike) -> ArrayLike:
    """Utility of a strategic miner playing `strategy` at participation x1.

    Abstaining earns 0; mining earns (R - d/(m+n*x1)) / (m+n*x1), which is
    expected_reward - expected_cost.
    """
    _check_strategy(strategy)
    pool = _pool(params, x1)
    if strategy == STRATEGY_ABSTAIN:
        return pool * 0.0
    return (R - params.d / pool) / pool


def average_utility(params: ModelParams, R: ArrayLike, x1: ArrayLike) -> ArrayLike:
    """Population-average utility x0*u0 + x1*u1 = x1*u1."""
    return x1 * utility(params, R, STRATEGY_MINE, x1)


def phi(params: ModelParams, R: ArrayLike, x1: ArrayLike) -> ArrayLike:
    """Replicator vector field dx1/dt.

    x1 (1 - x1) / (m + n x1) * (R - d / (m + n x1)). Defined for any real x1
    so derivatives can be taken across the boundary; callers integrating the
    model clamp to [0, 1].

    Examples:
        >>> phi(ModelParams(2, 2, 100.0), 40.0, 0.25)
        0.0
    """
    pool = _pool(params, x1)
    return x1 * (1.0 - x1) / pool * (R - params.d / pool)


def x0_rate(params: ModelParams, R: ArrayLike, x0: ArrayLike) -> ArrayLike:
    """Rate of the abstaining share, dx0/dt = -phi(1 - x0)."""
    return -phi(params, R, 1.0 - x0)


def phi_derivative(params: ModelParams, R: ArrayLike, x1: ArrayLike) -> ArrayLike:
    """Closed-form d(phi)/d(x1)."""
    m, n, d = params.m, params.n, params.d
    pool = _pool(params, x1)
    bracket = -x1 / pool + (1.0 - x1) / pool - n * x1 * (1.0 - x1) / (pool * pool)
    return bracket * (R - d / pool) + d * n * x1 * (1.0 - x1) / pool**3


def slope_at_zero(params: ModelParams, R: ArrayLike) -> ArrayLike:
    """phi'(0) = (R - d/m) / m."""
    return (R - params.d / params.m) / params.m


def slope_at_one(params: ModelParams, R: ArrayLike) -> ArrayLike:
    """phi'(1) = -(R - d/(m+n)) / (m+n)."""
    total = params.m + params.n
    return -(R - params.d / total) / total


def slope_at_interior(params: ModelParams, R: ArrayLike) -> ArrayLike:
    """phi'(x1*) = R^3/(n d^2) * (d/R - m) * ((m+n) - d/R)."""
    m, n, d = params.m, params.n, params.d
    ratio = d / R
    return R**3 / (n * d * d) * (ratio - m) * ((m + n) - ratio)


def _pool(params: ModelParams, x1: ArrayLike) -> ArrayLike:
    return params.m + params.n * x1


def _check_strategy(s: int) -> None:
    if s not in (STRATEGY_ABSTAIN, STRATEGY_MINE):
        raise ParameterError(f"strategy must be 0 or 1, got: {s}")
