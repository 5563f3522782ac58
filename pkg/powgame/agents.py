"""
Finite-population validation for powgame.

Strategic miners revise their strategy by pairwise proportional imitation:
at exponential revision epochs a random agent looks at a random peer and
copies the peer's strategy with probability max(0, u_peer - u_own) / M.
Always-on miners are not agents; they only enter the utility denominators.

Agents are exchangeable, so the simulation runs the count of mining agents
as an exact continuous-time jump process. With revision rate M per agent the
expected drift of the mining share is n/(n-1) * phi(x1), so the empirical
path tracks the replicator ODE as the population grows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from powgame.dynamics import DEFAULT_DT, DEFAULT_MAX_STEPS, RewardPolicy, Trajectory, integrate
from powgame.exceptions import ParameterError, PopulationConfigError
from powgame.game_core import STRATEGY_MINE, ModelParams, utility
from powgame.utils.logger import get_logger

logger = get_logger(__name__)

GAP_SLACK = 1e-12


@dataclass
class AgentPopulation:
    """Strategies of the simulated strategic miners and the run's RNG seed.

    revision_rate of None aligns the time scale with the replicator ODE.
    """

    n_strategic: int
    strategies: np.ndarray
    rng_seed: int
    revision_rate: Optional[float] = None

    def __post_init__(self) -> None:
        if self.n_strategic < 2:
            raise ParameterError(f"n_strategic must be >= 2, got: {self.n_strategic}")
        self.strategies = np.asarray(self.strategies, dtype=np.int8)
        if self.strategies.shape != (self.n_strategic,):
            raise ParameterError(
                f"strategies must have length {self.n_strategic}, got shape {self.strategies.shape}"
            )
        if not np.isin(self.strategies, (0, 1)).all():
            raise ParameterError("strategies must be 0 or 1")
        if self.revision_rate is not None and not self.revision_rate > 0:
            raise ParameterError(f"revision_rate must be positive, got: {self.revision_rate}")

    @classmethod
    def from_fraction(
        cls,
        n_strategic: int,
        x1: float,
        rng_seed: int,
        revision_rate: Optional[float] = None,
    ) -> "AgentPopulation":
        """Population with round(x1 * n) miners."""
        if not 0.0 <= x1 <= 1.0:
            raise ParameterError(f"x1 must lie in [0, 1], got: {x1}")
        ones = int(round(x1 * n_strategic))
        strategies = np.zeros(n_strategic, dtype=np.int8)
        strategies[:ones] = 1
        return cls(n_strategic, strategies, rng_seed, revision_rate)

    @property
    def mining_count(self) -> int:
        return int(self.strategies.sum())

    @property
    def x1(self) -> float:
        return self.mining_count / self.n_strategic


@dataclass
class EmpiricalTrajectory:
    seed: int
    n_strategic: int
    times: np.ndarray
    x1: np.ndarray


@dataclass(frozen=True)
class AggregateRow:
    t: float
    mean_x1: float
    std_x1: float
    n_seeds: int


@dataclass(frozen=True)
class MeanFieldGap:
    n_strategic: int
    n_seeds: int
    sup_norm: float
    aggregate: List[AggregateRow] = field(default_factory=list, compare=False)
    runs: List[EmpiricalTrajectory] = field(default_factory=list, compare=False)


def utility_bound(params: ModelParams, policy: RewardPolicy, n_strategic: int) -> float:
    """Largest |u1 - u0| over the reachable shares k / n_strategic."""
    shares = np.arange(n_strategic + 1) / n_strategic
    gaps = utility(params, policy.reward(shares), STRATEGY_MINE, shares)
    return float(np.max(np.abs(gaps)))


def simulate_population(
    params: ModelParams,
    policy: RewardPolicy,
    pop: AgentPopulation,
    horizon: float,
    sample_dt: float,
    normalization: Optional[float] = None,
) -> EmpiricalTrajectory:
    """Run one seeded imitation process and sample x1 every sample_dt.

    Utilities use params.n in their denominators, so each agent stands for a
    1/n_strategic share of the strategic miners. The generator is Philox,
    seeded with pop.rng_seed; equal seeds give identical paths.

    Raises:
        PopulationConfigError: If normalization is below an observed utility gap.
    """
    if not horizon > 0:
        raise ParameterError(f"horizon must be positive, got: {horizon}")
    if not sample_dt > 0:
        raise ParameterError(f"sample_dt must be positive, got: {sample_dt}")

    n = pop.n_strategic
    bound = utility_bound(params, policy, n) if normalization is None else float(normalization)
    rate = bound if pop.revision_rate is None else pop.revision_rate
    rng = np.random.Generator(np.random.Philox(pop.rng_seed))

    sample_times = np.arange(0.0, horizon + 0.5 * sample_dt, sample_dt)
    samples = np.empty(sample_times.size)

    k = pop.mining_count
    t = 0.0
    next_sample = 0
    while next_sample < sample_times.size:
        share = k / n
        gap = float(utility(params, policy.reward(share), STRATEGY_MINE, share))
        if abs(gap) > bound * (1.0 + GAP_SLACK):
            raise PopulationConfigError(
                f"Imitation normalization {bound:.6g} is below the utility gap {abs(gap):.6g} at x1={share}"
            )
        # a revision changes the count only when agent and peer disagree
        meet = (n - k) * k / (n - 1)
        total_rate = rate * meet * abs(gap) / bound if bound > 0 else 0.0
        t_next = t + rng.exponential(1.0 / total_rate) if total_rate > 0 else np.inf

        while next_sample < sample_times.size and sample_times[next_sample] < t_next:
            samples[next_sample] = share
            next_sample += 1
        if t_next == np.inf:
            break
        t = t_next
        k += 1 if gap > 0 else -1

    return EmpiricalTrajectory(seed=pop.rng_seed, n_strategic=n, times=sample_times, x1=samples)


def aggregate_runs(runs: Sequence[EmpiricalTrajectory]) -> List[AggregateRow]:
    """Per-sample mean and standard deviation across seeds."""
    if not runs:
        raise ParameterError("aggregate_runs needs at least one run")
    stacked = np.vstack([r.x1 for r in runs])
    means = stacked.mean(axis=0)
    stds = stacked.std(axis=0)
    return [
        AggregateRow(float(t), float(mu), float(sd), len(runs))
        for t, mu, sd in zip(runs[0].times, means, stds)
    ]


def run_seeds(
    params: ModelParams,
    policy: RewardPolicy,
    n_strategic: int,
    seeds: Sequence[int],
    x1_init: float,
    horizon: float,
    sample_dt: float,
    revision_rate: Optional[float] = None,
) -> List[EmpiricalTrajectory]:
    """One independent run per seed, all from the same initial share."""
    runs = []
    for seed in seeds:
        pop = AgentPopulation.from_fraction(n_strategic, x1_init, seed, revision_rate)
        runs.append(simulate_population(params, policy, pop, horizon, sample_dt))
        logger.debug(f"[AGENTS] n={n_strategic} seed={seed}: final x1={runs[-1].x1[-1]:.6g}")
    return runs


def ode_gap(rows: Sequence[AggregateRow], ode: Trajectory) -> float:
    """Sup-norm distance between seed-averaged shares and the ODE path."""
    times = np.array([r.t for r in rows])
    means = np.array([r.mean_x1 for r in rows])
    reference = np.interp(times, ode.times, ode.states)
    return float(np.max(np.abs(means - reference)))


def mean_field_gap(
    params: ModelParams,
    policy: RewardPolicy,
    n_values: Sequence[int],
    seeds: Sequence[int],
    x1_init: float,
    horizon: float,
    sample_dt: float,
    ode_dt: float = DEFAULT_DT,
    revision_rate: Optional[float] = None,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> Dict[int, MeanFieldGap]:
    """Sup-norm distance between the seed-averaged path and the ODE, per population size."""
    ode = integrate(params, policy, x1_init, horizon, dt=ode_dt, max_steps=max_steps)
    gaps: Dict[int, MeanFieldGap] = {}
    for n_strategic in n_values:
        runs = run_seeds(params, policy, n_strategic, seeds, x1_init, horizon, sample_dt, revision_rate)
        rows = aggregate_runs(runs)
        sup = ode_gap(rows, ode)
        gaps[n_strategic] = MeanFieldGap(n_strategic, len(seeds), sup, rows, runs)
        logger.info(f"[AGENTS] n={n_strategic}: sup-norm gap {sup:.4g} over {len(seeds)} seeds")
    return gaps


def empirical_to_table(runs: Sequence[EmpiricalTrajectory]) -> List[List[float]]:
    """Rows in the (n_strategic, t, seed, x1_empirical) CSV column order."""
    return [[r.n_strategic, float(t), r.seed, float(x)] for r in runs for t, x in zip(r.times, r.x1)]


def aggregate_to_table(n_strategic: int, rows: Sequence[AggregateRow]) -> List[List[float]]:
    """Rows in the (n_strategic, t, mean_x1, std_x1, n_seeds) CSV column order."""
    return [[n_strategic, r.t, r.mean_x1, r.std_x1, r.n_seeds] for r in rows]
