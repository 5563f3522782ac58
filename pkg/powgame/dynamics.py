"""
Dynamics engine for powgame.

Fixed-step fourth-order Runge-Kutta integration of dx1/dt = phi_R(x1) under
a reward policy, with bisection location of the controller's switching
threshold, convergence detection and quasi-static hysteresis sweeps.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from powgame.controller import ControllerSpec, reward as feedback_reward, zeta_roots
from powgame.equilibrium import interior_equilibrium
from powgame.exceptions import (
    InfeasibleControllerError,
    IntegrationError,
    ParameterError,
    StepLimitError,
    SweepError,
)
from powgame.game_core import ArrayLike, ModelParams, phi
from powgame.utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_DT = 1e-3
DEFAULT_TOL = 1e-6
DEFAULT_T_MAX = 1000.0
DEFAULT_MAX_STEPS = 10_000_000

SWITCH_STATE_TOL = 1e-10
CLAMP_TOL = 1e-12
CONVERGED_FIELD_TOL = 1e-12
BOUNDARY_NUDGE = 1e-6
# slopes above this count as unstable when deciding whether a run has settled
UNSTABLE_SLOPE_TOL = 1e-7
_SLOPE_STEP = 1e-6
_MAX_BISECTIONS = 200


class EventKind(str, Enum):
    SWITCH_CROSSED = "switch_crossed"
    CONVERGED = "converged"
    STEP_CLAMPED = "step_clamped"


class RewardPolicy(ABC):
    """Reward as a function of the participating share x1."""

    #: state at which the policy switches branch, if any
    switch_threshold: Optional[float] = None

    @abstractmethod
    def reward(self, x1: ArrayLike) -> ArrayLike:
        """Reward paid at state x1."""

    def reward_on_branch(self, x1: ArrayLike, active: Optional[bool]) -> ArrayLike:
        """Reward with the switching branch frozen (None lets the state decide)."""
        return self.reward(x1)

    def equilibria(self, params: ModelParams) -> List[float]:
        """Candidate equilibria of the closed-loop field inside [0, 1]."""
        return [0.0, 1.0]


class ConstantReward(RewardPolicy):
    """Open-loop reward R."""

    def __init__(self, R: float):
        if not (math.isfinite(R) and R > 0):
            raise ParameterError(f"R must be positive and finite, got: {R}")
        self.R = float(R)

    def reward(self, x1: ArrayLike) -> ArrayLike:
        if isinstance(x1, np.ndarray):
            return np.full_like(x1, self.R, dtype=float)
        return self.R

    def equilibria(self, params: ModelParams) -> List[float]:
        x_star, interior = interior_equilibrium(params, self.R)
        return [0.0, 1.0, x_star] if interior else [0.0, 1.0]

    def __repr__(self) -> str:
        return f"ConstantReward(R={self.R})"


class FeedbackReward(RewardPolicy):
    """Switching state-feedback law R* + K (x_bar - x1) below x1* + eps."""

    def __init__(self, spec: ControllerSpec):
        self.spec = spec
        self.switch_threshold = spec.switch_threshold

    def reward(self, x1: ArrayLike) -> ArrayLike:
        return feedback_reward(self.spec, x1)

    def reward_on_branch(self, x1: ArrayLike, active: Optional[bool]) -> ArrayLike:
        if active is None:
            return self.reward(x1)
        spec = self.spec
        if active:
            return spec.R_star + spec.K * (spec.x_bar - x1)
        return spec.R_star + 0.0 * x1

    def equilibria(self, params: ModelParams) -> List[float]:
        candidates = [0.0, 1.0]
        try:
            alpha, beta = zeta_roots(self.spec)
        except InfeasibleControllerError:
            return candidates
        candidates.extend(r for r in (alpha, beta) if 0.0 < r < self.switch_threshold)
        return candidates

    def __repr__(self) -> str:
        s = self.spec
        return f"FeedbackReward(R_star={s.R_star}, x_bar={s.x_bar}, K={s.K}, eps={s.eps})"


class FunctionReward(RewardPolicy):
    """Arbitrary feedback law R1(x1), used to probe stabilizability."""

    def __init__(self, law: Callable[[ArrayLike], ArrayLike], name: str = "custom"):
        self.law = law
        self.name = name

    def reward(self, x1: ArrayLike) -> ArrayLike:
        return self.law(x1)

    def __repr__(self) -> str:
        return f"FunctionReward({self.name})"


@dataclass(frozen=True)
class TrajectoryEvent:
    time: float
    kind: EventKind


@dataclass
class Trajectory:
    """Time-stamped path of x1 with the reward applied at each sample."""

    times: np.ndarray
    states: np.ndarray
    rewards: np.ndarray
    events: List[TrajectoryEvent] = field(default_factory=list)

    @property
    def final_state(self) -> float:
        return float(self.states[-1])

    def events_of(self, kind: EventKind) -> List[TrajectoryEvent]:
        return [e for e in self.events if e.kind is kind]


@dataclass(frozen=True)
class SettleResult:
    limit: float
    settled: bool
    settle_time: Optional[float]
    final_state: float
    elapsed: float


@dataclass(frozen=True)
class SweepPoint:
    leg: int
    R: float
    x1_settled: float
    limit: float
    settle_time: Optional[float]


def field_value(
    params: ModelParams,
    policy: RewardPolicy,
    x1: ArrayLike,
    active: Optional[bool] = None,
) -> ArrayLike:
    """Closed-loop vector field phi evaluated at the policy's reward."""
    return phi(params, policy.reward_on_branch(x1, active), x1)


def step(
    params: ModelParams,
    policy: RewardPolicy,
    x1: float,
    dt: float,
    events: Optional[List[TrajectoryEvent]] = None,
    t: float = 0.0,
) -> float:
    """One RK4 step with the policy evaluated at every stage; clamped to [0, 1].

    A switching policy gets the same crossing treatment as in integrate.
    When events is given, a switch crossing and a clamp are appended to it,
    stamped relative to the step's start time t.
    """
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got: {dt}")
    if not 0.0 <= x1 <= 1.0:
        raise ParameterError(f"x1 must lie in [0, 1], got: {x1}")
    x_new, crossing, clamped = _advance(params, policy, x1, dt)
    if events is not None:
        if crossing is not None:
            events.append(TrajectoryEvent(t + crossing[0], EventKind.SWITCH_CROSSED))
        if clamped:
            events.append(TrajectoryEvent(t + dt, EventKind.STEP_CLAMPED))
    return x_new


def integrate(
    params: ModelParams,
    policy: RewardPolicy,
    x1_init: float,
    t_end: float,
    dt: float = DEFAULT_DT,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> Trajectory:
    """Integrate from x1_init to t_end on a grid of step dt.

    The last step is shortened to land on t_end. A step that carries the
    state across the policy's switching threshold is bisected; the crossing
    is recorded as its own sample and the reward branch changes only after it.

    Raises:
        StepLimitError: If more than max_steps steps would be needed.
        IntegrationError: If the field produces a non-finite value.
    """
    _check_run(x1_init, dt)
    if not t_end > 0:
        raise ParameterError(f"t_end must be positive, got: {t_end}")

    n_full = int(math.floor(t_end / dt + 1e-9))
    has_partial = t_end - n_full * dt > 1e-9 * dt
    n_steps = n_full + (1 if has_partial else 0)
    if n_steps > max_steps:
        raise StepLimitError(f"{n_steps} steps needed for t_end={t_end}, dt={dt}; limit is {max_steps}")

    x = float(x1_init)
    t = 0.0
    times = [t]
    states = [x]
    rewards = [float(policy.reward(x))]
    events: List[TrajectoryEvent] = []
    converged = abs(field_value(params, policy, x)) < CONVERGED_FIELD_TOL
    if converged:
        events.append(TrajectoryEvent(0.0, EventKind.CONVERGED))

    for i in range(1, n_steps + 1):
        t_next = i * dt if i <= n_full else t_end
        x_new, crossing, clamped = _advance(params, policy, x, t_next - t)

        if crossing is not None:
            t_cross = t + crossing[0]
            if t < t_cross < t_next:
                times.append(t_cross)
                states.append(crossing[1])
                rewards.append(float(policy.reward(crossing[1])))
            events.append(TrajectoryEvent(t_cross, EventKind.SWITCH_CROSSED))
            logger.debug(f"[DYNAMICS] switch crossed at t={t_cross:.6f}")
        if clamped:
            events.append(TrajectoryEvent(t_next, EventKind.STEP_CLAMPED))

        times.append(t_next)
        states.append(x_new)
        rewards.append(float(policy.reward(x_new)))
        if not converged and abs(field_value(params, policy, x_new)) < CONVERGED_FIELD_TOL:
            converged = True
            events.append(TrajectoryEvent(t_next, EventKind.CONVERGED))

        t, x = t_next, x_new

    logger.debug(f"[DYNAMICS] {policy!r}: x1 {x1_init} -> {x:.12g} over t={t_end}")
    return Trajectory(
        times=np.asarray(times),
        states=np.asarray(states),
        rewards=np.asarray(rewards),
        events=events,
    )


def settle(
    params: ModelParams,
    policy: RewardPolicy,
    x1_init: float,
    tol: float = DEFAULT_TOL,
    t_max: float = DEFAULT_T_MAX,
    dt: float = DEFAULT_DT,
) -> SettleResult:
    """Integrate until the state rests at an equilibrium of the closed loop.

    A run has settled once |field| < tol * max(1, |x1|) and the state is
    within tol of a candidate equilibrium. Unstable equilibria only count
    when the field vanishes exactly there. settle_time is the first time
    after which the state stays within tol of the limit.
    """
    if not tol > 0:
        raise ParameterError(f"tol must be positive, got: {tol}")
    _check_run(x1_init, dt)

    candidates = [(c, _is_unstable(params, policy, c)) for c in policy.equilibria(params)]
    max_steps = int(math.ceil(t_max / dt))

    x = float(x1_init)
    times = [0.0]
    states = [x]
    limit = _settled_at(params, policy, x, tol, candidates)
    i = 0
    while limit is None and i < max_steps:
        x, _, _ = _advance(params, policy, x, dt)
        i += 1
        times.append(i * dt)
        states.append(x)
        limit = _settled_at(params, policy, x, tol, candidates)

    elapsed = times[-1]
    if limit is None:
        logger.warning(f"[DYNAMICS] {policy!r} from x1={x1_init} not settled by t={t_max}; last x1={x}")
        return SettleResult(limit=x, settled=False, settle_time=None, final_state=x, elapsed=elapsed)

    outside = np.nonzero(np.abs(np.asarray(states) - limit) > tol)[0]
    settle_time = times[outside[-1] + 1] if outside.size else 0.0
    return SettleResult(limit=limit, settled=True, settle_time=settle_time, final_state=x, elapsed=elapsed)


def hysteresis_sweep(
    params: ModelParams,
    R_path: Sequence[float],
    x1_seed: float,
    settle_tol: float = DEFAULT_TOL,
    t_max: float = DEFAULT_T_MAX,
    dt: float = DEFAULT_DT,
) -> List[SweepPoint]:
    """Quasi-static sweep: each leg settles from the previous leg's state.

    A carried-over state sitting exactly on 0 or 1 is nudged by 1e-6 into
    the interior, otherwise the boundary fixed points would never let go.

    Raises:
        SweepError: If a leg does not settle within t_max.
    """
    if len(R_path) == 0:
        raise ParameterError("R_path must not be empty")
    if not 0.0 <= x1_seed <= 1.0:
        raise ParameterError(f"x1_seed must lie in [0, 1], got: {x1_seed}")

    points: List[SweepPoint] = []
    x = float(x1_seed)
    for leg, R in enumerate(R_path):
        if x == 0.0:
            x = BOUNDARY_NUDGE
        elif x == 1.0:
            x = 1.0 - BOUNDARY_NUDGE
        result = settle(params, ConstantReward(R), x, tol=settle_tol, t_max=t_max, dt=dt)
        if not result.settled:
            raise SweepError(
                f"Sweep leg {leg} at R={R} did not settle by t={t_max} (last x1={result.final_state})",
                leg=leg,
                reward=float(R),
                last_state=result.final_state,
            )
        x = result.final_state
        points.append(SweepPoint(leg, float(R), x, result.limit, result.settle_time))
        logger.debug(f"[SWEEP] leg {leg}: R={R} -> x1={x:.6g} (limit {result.limit})")

    logger.info(f"[SWEEP] {len(points)} legs from R={R_path[0]} to R={R_path[-1]}")
    return points


def boundary_slope(params: ModelParams, policy: RewardPolicy, h: float = 1e-5) -> float:
    """Slope of the closed-loop field at x1 = 1 from the left.

    One-sided difference refined by Richardson extrapolation; only needs the
    policy on [1 - h, 1].
    """
    def one_sided(step_size: float) -> float:
        return (field_value(params, policy, 1.0) - field_value(params, policy, 1.0 - step_size)) / step_size

    return 2.0 * one_sided(h / 2) - one_sided(h)


def trajectory_to_table(trajectory: Trajectory) -> List[List[float]]:
    """Rows in the (t, x1, R) CSV column order."""
    return [
        [float(t), float(x), float(r)]
        for t, x, r in zip(trajectory.times, trajectory.states, trajectory.rewards)
    ]


def sweep_to_table(points: Sequence[SweepPoint]) -> List[List[object]]:
    """Rows in the (leg, R, x1_settled, settle_time) CSV column order."""
    return [
        [p.leg, p.R, p.x1_settled, "" if p.settle_time is None else p.settle_time]
        for p in points
    ]


def _rk4(params: ModelParams, policy: RewardPolicy, x: float, h: float, active: Optional[bool]) -> float:
    k1 = field_value(params, policy, x, active)
    k2 = field_value(params, policy, x + 0.5 * h * k1, active)
    k3 = field_value(params, policy, x + 0.5 * h * k2, active)
    k4 = field_value(params, policy, x + h * k3, active)
    x_new = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not math.isfinite(x_new):
        raise IntegrationError(f"Non-finite state after step from x1={x} with h={h}")
    return float(x_new)


def _advance(
    params: ModelParams,
    policy: RewardPolicy,
    x: float,
    h: float,
) -> Tuple[float, Optional[Tuple[float, float]], bool]:
    """Advance one step; returns (state, (h_cross, x_cross) or None, clamped)."""
    threshold = policy.switch_threshold
    crossing = None
    if threshold is None:
        raw = _rk4(params, policy, x, h, None)
    else:
        active = x < threshold
        raw = _rk4(params, policy, x, h, active)
        if (raw < threshold) != active:
            h_cross = _locate_switch(params, policy, x, h, threshold, active)
            crossing = (h_cross, threshold)
            remaining = h - h_cross
            raw = _rk4(params, policy, threshold, remaining, not active) if remaining > 0 else threshold

    clamped_value = min(1.0, max(0.0, raw))
    clamped = abs(clamped_value - raw) > CLAMP_TOL
    return clamped_value, crossing, clamped


def _locate_switch(
    params: ModelParams,
    policy: RewardPolicy,
    x: float,
    h: float,
    threshold: float,
    active: bool,
) -> float:
    lo, hi = 0.0, h
    mid = h
    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        x_mid = _rk4(params, policy, x, mid, active)
        if abs(x_mid - threshold) < SWITCH_STATE_TOL:
            break
        if (x_mid < threshold) == active:
            lo = mid
        else:
            hi = mid
    return mid


def _settled_at(
    params: ModelParams,
    policy: RewardPolicy,
    x: float,
    tol: float,
    candidates: Sequence[Tuple[float, bool]],
) -> Optional[float]:
    f = field_value(params, policy, x)
    if abs(f) >= tol * max(1.0, abs(x)):
        return None
    best = None
    for c, unstable in candidates:
        if abs(x - c) <= tol and (not unstable or f == 0.0):
            if best is None or abs(x - c) < abs(x - best):
                best = c
    return best


def _is_unstable(params: ModelParams, policy: RewardPolicy, c: float) -> bool:
    slope = (
        field_value(params, policy, c + _SLOPE_STEP) - field_value(params, policy, c - _SLOPE_STEP)
    ) / (2 * _SLOPE_STEP)
    return slope > UNSTABLE_SLOPE_TOL


def _check_run(x1_init: float, dt: float) -> None:
    if not 0.0 <= x1_init <= 1.0:
        raise ParameterError(f"x1_init must lie in [0, 1], got: {x1_init}")
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got: {dt}")
