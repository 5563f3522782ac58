"""
Controller design for powgame.

Reward-feedback stabilization of full participation:
    R(x1) = R* + K (x_bar - x1)   while x1 < x1* + eps,
    R(x1) = R*                    otherwise.

Covers the impossibility check for R* < d/(m+n), the zeta quadratic and its
roots, the gain and switch-offset bounds, synthesis, validation and the
settling/recovery trade-off metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Tuple

import numpy as np

from powgame.equilibrium import MARGINAL_BAND, Interval
from powgame.exceptions import InfeasibleControllerError, ParameterError
from powgame.game_core import ArrayLike, ModelParams, phi
from powgame.utils.logger import get_logger

if TYPE_CHECKING:
    from powgame.dynamics import Trajectory

logger = get_logger(__name__)

OPEN_ENDPOINT_SHRINK = 1e-9
POSITIVITY_GRID = (1e-4, 1.0 - 1e-4, 1000)
CONTINUITY_TOL = 1e-12


@dataclass(frozen=True)
class ControllerSpec:
    """Nominal reward R*, anchor x_bar, gain K and switch offset eps.

    Construction never checks feasibility, so an infeasible spec can still be
    loaded and passed to validate().
    """

    params: ModelParams
    R_star: float
    x_bar: float
    K: float
    eps: float

    def __post_init__(self) -> None:
        for name in ("R_star", "x_bar", "K", "eps"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite, got: {getattr(self, name)}")
        if not self.R_star > 0:
            raise ParameterError(f"R_star must be positive, got: {self.R_star}")

    @property
    def x1_star(self) -> float:
        return (self.params.d / self.R_star - self.params.m) / self.params.n

    @property
    def switch_threshold(self) -> float:
        return self.x1_star + self.eps

    @property
    def K_min(self) -> float:
        return (self.params.d - self.R_star * self.params.m) / (self.params.m * self.x_bar)

    @property
    def alpha(self) -> float:
        return zeta_roots(self)[0]

    @property
    def beta(self) -> float:
        return zeta_roots(self)[1]

    @property
    def eps_max(self) -> float:
        return eps_interval(self.params, self.R_star, self.x_bar, self.K).hi

    @property
    def is_continuous(self) -> bool:
        """Whether the reward has no jump at the switching threshold."""
        return abs(self.eps - (self.x_bar - self.x1_star)) < CONTINUITY_TOL

    def to_dict(self) -> Dict[str, Any]:
        return {
            "m": self.params.m,
            "n": self.params.n,
            "d": self.params.d,
            "R_star": self.R_star,
            "x_bar": self.x_bar,
            "K": self.K,
            "eps": self.eps,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ControllerSpec":
        params = ModelParams(m=int(data["m"]), n=int(data["n"]), d=float(data["d"]))
        return cls(
            params=params,
            R_star=float(data["R_star"]),
            x_bar=float(data["x_bar"]),
            K=float(data["K"]),
            eps=float(data["eps"]),
        )


@dataclass(frozen=True)
class InfeasibilityReport:
    R_star: float
    boundary_derivative: float
    conclusion: str = "unstabilizable"


@dataclass(frozen=True)
class Violation:
    code: str  # reward_range | anchor_range | gain_positive | gain_bound | switch_offset | closed_loop_positivity
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


@dataclass
class ValidationReport:
    spec: ControllerSpec
    violations: List[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return len(self.violations) == 0

    def lines(self) -> List[str]:
        return [str(v) for v in self.violations]


@dataclass(frozen=True)
class TradeOffMetrics:
    """None marks a quantity that never settles within the trajectory."""

    state_settle_time: Optional[float]
    reward_recovery_time: Optional[float]


def boundary_derivative(params: ModelParams, R_star: float) -> float:
    """Slope at x1 = 1 of the field under any law with R1(1) = R*."""
    total = params.m + params.n
    return -(R_star - params.d / total) / total


def check_unstabilizable(params: ModelParams, R_star: float) -> Optional[InfeasibilityReport]:
    """Report when no feedback law with R1(1) = R* can stabilize x1 = 1.

    The slope of the closed loop at x1 = 1 depends only on R1(1), so it is
    positive for every such law once R* < d/(m+n). At R* = d/(m+n) nothing
    is returned; is_marginal_anchor flags that case.
    """
    if not R_star > 0:
        raise ParameterError(f"R_star must be positive, got: {R_star}")
    slope = boundary_derivative(params, R_star)
    if R_star < params.lower_threshold:
        logger.info(f"[CONTROLLER] R*={R_star} < d/(m+n)={params.lower_threshold}: unstabilizable")
        return InfeasibilityReport(R_star=R_star, boundary_derivative=slope)
    if is_marginal_anchor(params, R_star):
        logger.warning(f"[CONTROLLER] R*={R_star} equals d/(m+n); x1=1 is non-hyperbolic")
    return None


def is_marginal_anchor(params: ModelParams, R_star: float) -> bool:
    """True when R* sits on d/(m+n), where x1 = 1 is non-hyperbolic."""
    return abs(R_star - params.lower_threshold) <= MARGINAL_BAND * params.d


def zeta_coefficients(spec: ControllerSpec) -> Tuple[float, float, float]:
    """(a, b, c) of zeta(x1) = a x1^2 + b x1 + c."""
    m, n, d = spec.params.m, spec.params.n, spec.params.d
    K, R, xb = spec.K, spec.R_star, spec.x_bar
    return -K * n, K * n * xb - K * m + R * n, R * m + K * m * xb - d


def zeta(spec: ControllerSpec, x1: ArrayLike) -> ArrayLike:
    """Numerator quadratic of the active-branch closed-loop field.

    eta(x1) = x1 (1 - x1) zeta(x1) / (m + n x1)^2.
    """
    a, b, c = zeta_coefficients(spec)
    return (a * x1 + b) * x1 + c


def zeta_roots(spec: ControllerSpec) -> Tuple[float, float]:
    """Real roots alpha < beta of zeta, computed without cancellation.

    Raises:
        ParameterError: If K <= 0 (zeta is not a quadratic).
        InfeasibleControllerError: If the roots are not real.
    """
    if not spec.K > 0:
        raise ParameterError(f"K must be positive, got: {spec.K}")
    a, b, c = zeta_coefficients(spec)
    disc = b * b - 4.0 * a * c
    if disc < 0:
        raise InfeasibleControllerError(f"zeta has no real roots (discriminant {disc:.6g})")
    sign_b = 1.0 if b >= 0 else -1.0
    q = -0.5 * (b + sign_b * math.sqrt(disc))
    if q == 0.0:
        return 0.0, 0.0
    r1, r2 = q / a, c / q
    return (r1, r2) if r1 < r2 else (r2, r1)


def gain_lower_bound(params: ModelParams, R_star: float, x_bar: float) -> float:
    """Smallest admissible gain, (d - R* m) / (m x_bar); K must exceed it.

    Raises:
        InfeasibleControllerError: If R* is outside (d/(m+n), d/m) or x_bar
            is outside (x1*, 1].
    """
    _check_design_domain(params, R_star, x_bar)
    return (params.d - R_star * params.m) / (params.m * x_bar)


def eps_interval(params: ModelParams, R_star: float, x_bar: float, K: float) -> Interval:
    """Admissible switch offsets for a gain K.

    (0, beta - x1*) when beta < 1, otherwise (0, 1 - x1*].

    Raises:
        InfeasibleControllerError: If K does not exceed the gain bound.
    """
    K_min = gain_lower_bound(params, R_star, x_bar)
    if not K > K_min:
        raise InfeasibleControllerError(f"K={K} must exceed the gain bound {K_min:.12g}")
    probe = ControllerSpec(params=params, R_star=R_star, x_bar=x_bar, K=K, eps=0.0)
    _, beta = zeta_roots(probe)
    x_star = probe.x1_star
    if beta < 1.0:
        return Interval(0.0, beta - x_star, lo_closed=False, hi_closed=False)
    return Interval(0.0, 1.0 - x_star, lo_closed=False, hi_closed=True)


def synthesize(
    params: ModelParams,
    R_star: float,
    x_bar: float = 1.0,
    gain_margin: float = 0.01,
    eps_fraction: float = 1.0,
) -> ControllerSpec:
    """Build a spec with K = K_min (1 + gain_margin) and eps a fraction of its bound.

    An open upper endpoint is pulled in by 1e-9 before scaling.

    Raises:
        InfeasibleControllerError: If the inputs admit no valid controller,
            including gain_margin = 0 (the gain bound is strict).
    """
    if gain_margin < 0:
        raise ParameterError(f"gain_margin must be >= 0, got: {gain_margin}")
    if not 0.0 < eps_fraction <= 1.0:
        raise ParameterError(f"eps_fraction must lie in (0, 1], got: {eps_fraction}")

    K = gain_lower_bound(params, R_star, x_bar) * (1.0 + gain_margin)
    interval = eps_interval(params, R_star, x_bar, K)
    upper = interval.hi if interval.hi_closed else interval.hi - OPEN_ENDPOINT_SHRINK
    spec = ControllerSpec(params=params, R_star=R_star, x_bar=x_bar, K=K, eps=eps_fraction * upper)

    report = validate(spec)
    if not report.valid:
        raise InfeasibleControllerError("; ".join(report.lines()))
    logger.info(f"[CONTROLLER] synthesized K={K:.6g}, eps={spec.eps:.6g} (interval {interval})")
    return spec


def validate(spec: ControllerSpec) -> ValidationReport:
    """Check every design condition and report violations without raising.

    Besides the symbolic conditions, the closed-loop field is checked to be
    positive on a 1000-point grid over [1e-4, 1 - 1e-4].
    """
    params = spec.params
    report = ValidationReport(spec=spec)
    add = report.violations.append

    hypothesis = params.lower_threshold < spec.R_star < params.upper_threshold
    if not hypothesis:
        add(Violation(
            "reward_range",
            f"R*={spec.R_star} must lie in (d/(m+n), d/m) = "
            f"({params.lower_threshold:.6g}, {params.upper_threshold:.6g})",
        ))
    anchor_ok = hypothesis and spec.x1_star < spec.x_bar <= 1.0
    if hypothesis and not anchor_ok:
        add(Violation("anchor_range", f"x_bar={spec.x_bar} must lie in (x1*={spec.x1_star:.6g}, 1]"))
    if not spec.K > 0:
        add(Violation("gain_positive", f"K={spec.K} must be positive"))

    if anchor_ok and spec.K > 0:
        K_min = spec.K_min
        if not spec.K > K_min:
            add(Violation("gain_bound", f"K={spec.K} must exceed K_min={K_min:.12g}"))
        else:
            interval = eps_interval(params, spec.R_star, spec.x_bar, spec.K)
            if spec.eps not in interval:
                add(Violation("switch_offset", f"eps={spec.eps} must lie in {interval}"))

    if spec.K > 0:
        lo, hi, count = POSITIVITY_GRID
        grid = np.linspace(lo, hi, count)
        values = closed_loop_field(spec, grid)
        failing = np.nonzero(~(values > 0))[0]
        if failing.size:
            x_fail = float(grid[failing[0]])
            add(Violation(
                "closed_loop_positivity",
                f"closed-loop field is not positive at x1={x_fail:.6g} ({failing.size} grid points)",
            ))

    if report.valid:
        logger.debug(f"[CONTROLLER] spec valid: K={spec.K}, eps={spec.eps}")
    else:
        logger.info(f"[CONTROLLER] spec invalid: {len(report.violations)} violation(s)")
    return report


def reward(spec: ControllerSpec, x1: ArrayLike) -> ArrayLike:
    """Reward paid at state x1; the feedback term is dropped from x1* + eps on."""
    threshold = spec.switch_threshold
    if isinstance(x1, np.ndarray):
        return np.where(x1 < threshold, spec.R_star + spec.K * (spec.x_bar - x1), spec.R_star)
    if x1 < threshold:
        return spec.R_star + spec.K * (spec.x_bar - x1)
    return spec.R_star


def closed_loop_field(spec: ControllerSpec, x1: ArrayLike) -> ArrayLike:
    """Replicator field with the switching reward applied."""
    return phi(spec.params, reward(spec, x1), x1)


def trade_off_metrics(
    trajectory: "Trajectory",
    spec: ControllerSpec,
    state_tol: float = 1e-3,
    reward_tol: float = 1e-3,
) -> TradeOffMetrics:
    """Time for x1 to settle at 1 and for the reward to return to R*.

    Both use "enters and remains" semantics over the sampled trajectory.
    """
    times = np.asarray(trajectory.times)
    state_ok = np.abs(np.asarray(trajectory.states) - 1.0) <= state_tol
    reward_ok = np.abs(np.asarray(trajectory.rewards) - spec.R_star) <= reward_tol
    return TradeOffMetrics(
        state_settle_time=_enters_and_remains(times, state_ok),
        reward_recovery_time=_enters_and_remains(times, reward_ok),
    )


def _enters_and_remains(times: np.ndarray, ok: np.ndarray) -> Optional[float]:
    if ok.size == 0 or not ok[-1]:
        return None
    bad = np.nonzero(~ok)[0]
    return float(times[bad[-1] + 1]) if bad.size else float(times[0])


def _check_design_domain(params: ModelParams, R_star: float, x_bar: float) -> None:
    if not params.lower_threshold < R_star < params.upper_threshold:
        raise InfeasibleControllerError(
            f"R*={R_star} must lie in (d/(m+n), d/m) = "
            f"({params.lower_threshold:.6g}, {params.upper_threshold:.6g})"
        )
    x_star = (params.d / R_star - params.m) / params.n
    if not x_star < x_bar <= 1.0:
        raise InfeasibleControllerError(f"x_bar={x_bar} must lie in (x1*={x_star:.6g}, 1]")
