"""
Equilibrium analysis for powgame.

Closed-form equilibria of the replicator field, stability labels, the
A/B/C regions of the (m, R/d) plane, bifurcation branch tables and a
finite-difference check of the transcritical-bifurcation conditions at
both crossing points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from powgame.exceptions import ParameterError
from powgame.game_core import ModelParams, phi, slope_at_interior, slope_at_one, slope_at_zero, x0_rate
from powgame.utils.logger import get_logger

logger = get_logger(__name__)

# |R - threshold| below MARGINAL_BAND * d counts as non-hyperbolic
MARGINAL_BAND = 1e-9
FD_RELATIVE_STEP = 1e-5


class Stability(str, Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"


class Region(str, Enum):
    """A: everyone ends up mining. B: bistable. C: strategic miners drop out."""

    A = "A"
    B = "B"
    C = "C"
    BOUNDARY = "boundary"


class BifurcationPoint(str, Enum):
    AT_ZERO = "at_zero"
    AT_ONE = "at_one"


@dataclass(frozen=True)
class Interval:
    """Real interval with independently open or closed endpoints."""

    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def __contains__(self, x: float) -> bool:
        above = x >= self.lo if self.lo_closed else x > self.lo
        below = x <= self.hi if self.hi_closed else x < self.hi
        return above and below

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __str__(self) -> str:
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{self.lo:.6g}, {self.hi:.6g}{right}"


@dataclass(frozen=True)
class EquilibriumPoint:
    value: float
    stability: Stability
    in_unit_interval: bool = True


@dataclass(frozen=True)
class EquilibriumReport:
    """The three equilibria of the uncontrolled field at one reward.

    Basins are only reported for asymptotically stable equilibria; a basin
    of None means the equilibrium attracts nothing beyond itself.
    """

    R: float
    eq_zero: EquilibriumPoint
    eq_one: EquilibriumPoint
    eq_interior: Optional[EquilibriumPoint]
    region: Region
    basin_zero: Optional[Interval]
    basin_one: Optional[Interval]


@dataclass(frozen=True)
class BranchRow:
    R: float
    x1_eq: float
    stability: Stability
    branch_id: str  # zero | one | interior | exterior


@dataclass(frozen=True)
class RegionCell:
    m: int
    R_over_d: float
    region: Region


@dataclass(frozen=True)
class TranscriticalCheck:
    point: BifurcationPoint
    f00: float
    dfdx: float
    dfdmu: float
    d2f_dxdmu: float
    d2f_dx2: float
    closed_form_expected: Tuple[float, float]
    passed: bool


def interior_equilibrium(params: ModelParams, R: float) -> Tuple[float, bool]:
    """Return x1* = (d/R - m) / n and whether it lies strictly inside (0, 1).

    Examples:
        >>> interior_equilibrium(ModelParams(2, 2, 100.0), 40.0)
        (0.25, True)
    """
    _check_reward(R)
    x_star = (params.d / R - params.m) / params.n
    return x_star, 0.0 < x_star < 1.0


def region_of(params: ModelParams, R: float) -> Region:
    """Region tag of (m, R/d); BOUNDARY inside the marginal band."""
    _check_reward(R)
    band = MARGINAL_BAND * params.d
    if abs(R - params.upper_threshold) < band or abs(R - params.lower_threshold) < band:
        return Region.BOUNDARY
    if R > params.upper_threshold:
        return Region.A
    if R > params.lower_threshold:
        return Region.B
    return Region.C


def classify_equilibria(params: ModelParams, R: float) -> EquilibriumReport:
    """Stability labels, region and basins of the uncontrolled dynamics.

    Labels follow the sign of the field's slope at each equilibrium
    (negative: stable). Inside the marginal band around R = d/m or
    R = d/(m+n) the coinciding equilibria are labelled marginal.
    """
    x_star, interior = interior_equilibrium(params, R)
    region = region_of(params, R)
    band = MARGINAL_BAND * params.d
    at_upper = abs(R - params.upper_threshold) < band
    at_lower = abs(R - params.lower_threshold) < band

    zero_label = Stability.MARGINAL if at_upper else _label(slope_at_zero(params, R))
    one_label = Stability.MARGINAL if at_lower else _label(slope_at_one(params, R))
    if at_upper or at_lower:
        star_label = Stability.MARGINAL
    else:
        star_label = _label(slope_at_interior(params, R))

    eq_zero = EquilibriumPoint(0.0, zero_label)
    eq_one = EquilibriumPoint(1.0, one_label)
    eq_interior = EquilibriumPoint(x_star, star_label, in_unit_interval=interior)

    basin_zero: Optional[Interval] = None
    basin_one: Optional[Interval] = None
    if region is Region.A:
        basin_one = Interval(0.0, 1.0, lo_closed=False, hi_closed=True)
    elif region is Region.B:
        basin_zero = Interval(0.0, x_star, lo_closed=True, hi_closed=False)
        basin_one = Interval(x_star, 1.0, lo_closed=False, hi_closed=True)
    elif region is Region.C:
        basin_zero = Interval(0.0, 1.0, lo_closed=True, hi_closed=False)
    elif at_upper:
        # x1* merges with 0 while 1 is still stable: the flow is upward on (0, 1]
        basin_one = Interval(0.0, 1.0, lo_closed=False, hi_closed=True)
    else:
        basin_zero = Interval(0.0, 1.0, lo_closed=True, hi_closed=False)

    if region is Region.BOUNDARY:
        logger.warning(f"[EQUILIBRIA] R={R} sits on a bifurcation boundary; labels are marginal")

    return EquilibriumReport(
        R=R,
        eq_zero=eq_zero,
        eq_one=eq_one,
        eq_interior=eq_interior,
        region=region,
        basin_zero=basin_zero,
        basin_one=basin_one,
    )


def region_map(
    n: int,
    m_range: Tuple[int, int],
    Rd_range: Tuple[float, float],
    resolution: int,
) -> List[RegionCell]:
    """Tag each cell of the integer-m by R/d grid with its region.

    m runs over every integer in m_range (inclusive); R/d takes `resolution`
    evenly spaced values over Rd_range. Cells are evaluated with d = 1 so
    R equals R/d.
    """
    m_lo, m_hi = int(m_range[0]), int(m_range[1])
    if m_lo < 1 or m_hi < m_lo:
        raise ParameterError(f"m_range must satisfy 1 <= lo <= hi, got: {m_range}")
    if resolution < 1:
        raise ParameterError(f"resolution must be positive, got: {resolution}")
    if not 0.0 < Rd_range[0] <= Rd_range[1]:
        raise ParameterError(f"Rd_range must satisfy 0 < lo <= hi, got: {Rd_range}")

    ratios = np.linspace(Rd_range[0], Rd_range[1], resolution)
    cells = []
    for m in range(m_lo, m_hi + 1):
        params = ModelParams(m=m, n=n, d=1.0)
        for ratio in ratios:
            cells.append(RegionCell(m=m, R_over_d=float(ratio), region=region_of(params, float(ratio))))
    return cells


def bifurcation_branches(
    params: ModelParams,
    R_range: Tuple[float, float],
    samples: int,
) -> List[BranchRow]:
    """Equilibrium branches over evenly spaced rewards.

    Each sampled R contributes three rows: the boundary branches 0 and 1 and
    the x1* branch, tagged `interior` inside [0, 1] and `exterior` outside.
    """
    if samples < 2:
        raise ParameterError(f"samples must be >= 2, got: {samples}")
    if not 0.0 < R_range[0] < R_range[1]:
        raise ParameterError(f"R_range must satisfy 0 < lo < hi, got: {R_range}")

    rows: List[BranchRow] = []
    for R in np.linspace(R_range[0], R_range[1], samples):
        R = float(R)
        report = classify_equilibria(params, R)
        rows.append(BranchRow(R, 0.0, report.eq_zero.stability, "zero"))
        rows.append(BranchRow(R, 1.0, report.eq_one.stability, "one"))
        star = report.eq_interior
        inside = 0.0 <= star.value <= 1.0
        rows.append(BranchRow(R, star.value, star.stability, "interior" if inside else "exterior"))
    logger.debug(f"[EQUILIBRIA] built {len(rows)} branch rows over R in {R_range}")
    return rows


def verify_transcritical(
    params: ModelParams,
    point: BifurcationPoint,
    atol: float = 1e-9,
    rtol: float = 1e-6,
    rel_step: float = FD_RELATIVE_STEP,
) -> TranscriticalCheck:
    """Check the transcritical conditions numerically at one crossing.

    The point is shifted to the origin: at_zero uses f(x, mu) = phi at
    (x, d/m + mu); at_one uses the abstaining-share chart
    f(x, mu) = -phi at (1 - x, d/(m+n) + mu). Partials are central
    differences refined by one Richardson extrapolation step.
    """
    m, n, d = params.m, params.n, params.d
    if point is BifurcationPoint.AT_ZERO:
        R0 = d / m

        def f(x: float, mu: float) -> float:
            return phi(params, R0 + mu, x)

        expected = (1.0 / m, 2.0 * d * n / m**3)
    else:
        R0 = d / (m + n)

        def f(x: float, mu: float) -> float:
            return x0_rate(params, R0 + mu, x)

        expected = (-1.0 / (m + n), 2.0 * d * n / (m + n) ** 3)

    hx = rel_step
    hmu = rel_step * max(1.0, abs(R0))
    if 1.0 + hx == 1.0 or R0 + hmu == R0:
        raise ParameterError(f"finite-difference step underflows (rel_step={rel_step}, R={R0})")

    f00 = f(0.0, 0.0)
    dfdx = _richardson(lambda h: (f(h, 0.0) - f(-h, 0.0)) / (2 * h), hx)
    dfdmu = _richardson(lambda h: (f(0.0, h) - f(0.0, -h)) / (2 * h), hmu)
    d2f_dx2 = _richardson(lambda h: (f(h, 0.0) - 2 * f00 + f(-h, 0.0)) / (h * h), hx)
    d2f_dxdmu = _richardson(
        lambda s: (
            f(s * hx, s * hmu) - f(s * hx, -s * hmu) - f(-s * hx, s * hmu) + f(-s * hx, -s * hmu)
        ) / (4 * s * hx * s * hmu),
        1.0,
    )

    # phi is linear in (R, d), so first-order round-off grows with R0
    first_order_tol = atol * max(1.0, R0)
    conditions_hold = (
        abs(f00) < first_order_tol
        and abs(dfdx) < first_order_tol
        and abs(dfdmu) < first_order_tol
        and abs(d2f_dxdmu) > atol
        and abs(d2f_dx2) > atol
    )
    matches = math.isclose(d2f_dxdmu, expected[0], rel_tol=rtol) and math.isclose(
        d2f_dx2, expected[1], rel_tol=rtol
    )
    return TranscriticalCheck(
        point=point,
        f00=f00,
        dfdx=dfdx,
        dfdmu=dfdmu,
        d2f_dxdmu=d2f_dxdmu,
        d2f_dx2=d2f_dx2,
        closed_form_expected=expected,
        passed=conditions_hold and matches,
    )


def _richardson(estimate: Callable[[float], float], h: float) -> float:
    # central differences carry an h^2 leading error
    coarse = estimate(h)
    fine = estimate(h / 2)
    return (4.0 * fine - coarse) / 3.0


def _label(slope: float) -> Stability:
    if slope < 0:
        return Stability.STABLE
    if slope > 0:
        return Stability.UNSTABLE
    return Stability.MARGINAL


def _check_reward(R: float) -> None:
    if not (math.isfinite(R) and R > 0):
        raise ParameterError(f"R must be positive and finite, got: {R}")


def branch_rows_to_table(rows: Sequence[BranchRow]) -> List[List[object]]:
    """Rows in the (R, x1_eq, stability, branch_id) CSV column order."""
    return [[r.R, r.x1_eq, r.stability.value, r.branch_id] for r in rows]


def region_cells_to_table(cells: Sequence[RegionCell]) -> List[List[object]]:
    """Rows in the (m, R_over_d, region) CSV column order."""
    return [[c.m, c.R_over_d, c.region.value] for c in cells]
