"""
Tests for equilibrium analysis: classification, regions, branches and the
transcritical check.
"""

import logging

import numpy as np
import pytest

from powgame.equilibrium import (
    BifurcationPoint,
    Interval,
    Region,
    Stability,
    bifurcation_branches,
    branch_rows_to_table,
    classify_equilibria,
    interior_equilibrium,
    region_map,
    region_of,
    verify_transcritical,
)
from powgame.exceptions import ParameterError
from powgame.game_core import ModelParams, phi, phi_derivative


def _random_params_and_reward(rng: np.random.Generator):
    """Random (m, n, d) and a reward at least 1e-6 d away from both thresholds."""
    while True:
        m, n = int(rng.integers(1, 11)), int(rng.integers(1, 11))
        params = ModelParams(m=m, n=n, d=float(rng.uniform(10.0, 1000.0)))
        R = params.d * float(rng.uniform(0.5 / (m + n), 1.5 / m))
        gap = min(abs(R - params.lower_threshold), abs(R - params.upper_threshold))
        if gap > 1e-6 * params.d:
            return params, R


class TestInteriorEquilibrium:
    """Tests for interior_equilibrium function."""

    def test_working_point_value_is_exact(self, base_params: ModelParams) -> None:
        """Test x1* = 0.25 with no rounding at R = 40."""
        # Act
        x_star, interior = interior_equilibrium(base_params, 40.0)

        # Assert
        assert x_star == 0.25
        assert interior is True

    def test_outside_unit_interval_flagged(self, base_params: ModelParams) -> None:
        """Test x1* < 0 in region A and x1* > 1 in region C."""
        assert interior_equilibrium(base_params, 60.0)[1] is False
        assert interior_equilibrium(base_params, 20.0) == (1.5, False)

    def test_non_positive_reward_raises(self, base_params: ModelParams) -> None:
        """Test R <= 0 is rejected."""
        with pytest.raises(ParameterError):
            interior_equilibrium(base_params, 0.0)

    def test_interior_iff_between_thresholds(self) -> None:
        """Test x1* lies in (0, 1) exactly when d/(m+n) < R < d/m over random tuples."""
        # Arrange
        rng = np.random.default_rng(11)

        for _ in range(500):
            params, R = _random_params_and_reward(rng)

            # Act
            _, interior = interior_equilibrium(params, R)

            # Assert
            expected = params.lower_threshold < R < params.upper_threshold
            assert interior is expected, (params, R)

    def test_field_vanishes_at_interior_equilibrium(self, base_params: ModelParams) -> None:
        """Test |phi(x1*)| < 1e-10 on every interior branch row and on random tuples."""
        # Arrange
        rng = np.random.default_rng(12)
        rows = [r for r in bifurcation_branches(base_params, (10.0, 70.0), 121) if r.branch_id == "interior"]

        # Act & Assert
        assert rows
        for row in rows:
            assert abs(phi(base_params, row.R, row.x1_eq)) < 1e-10
        for _ in range(200):
            params, R = _random_params_and_reward(rng)
            x_star, interior = interior_equilibrium(params, R)
            if interior:
                assert abs(phi(params, R, x_star)) < 1e-10, (params, R)


class TestClassifyEquilibria:
    """Tests for classify_equilibria function."""

    def test_region_c_row(self, base_params: ModelParams) -> None:
        """Test R = 20: 0 stable, 1 unstable."""
        # Act
        report = classify_equilibria(base_params, 20.0)

        # Assert
        assert report.region is Region.C
        assert report.eq_zero.stability is Stability.STABLE
        assert report.eq_one.stability is Stability.UNSTABLE
        assert report.eq_interior.in_unit_interval is False
        assert report.basin_one is None
        assert report.basin_zero == Interval(0.0, 1.0, lo_closed=True, hi_closed=False)

    def test_region_b_row(self, base_params: ModelParams) -> None:
        """Test R = 40: both boundaries stable, x1* unstable."""
        # Act
        report = classify_equilibria(base_params, 40.0)

        # Assert
        assert report.region is Region.B
        assert report.eq_zero.stability is Stability.STABLE
        assert report.eq_one.stability is Stability.STABLE
        assert report.eq_interior.value == 0.25
        assert report.eq_interior.stability is Stability.UNSTABLE

    def test_region_a_row(self, base_params: ModelParams) -> None:
        """Test R = 60: 0 unstable, 1 stable."""
        # Act
        report = classify_equilibria(base_params, 60.0)

        # Assert
        assert report.region is Region.A
        assert report.eq_zero.stability is Stability.UNSTABLE
        assert report.eq_one.stability is Stability.STABLE
        assert report.basin_zero is None
        assert 1e-12 in report.basin_one
        assert 0.0 not in report.basin_one

    def test_bistable_basins_split_at_interior_equilibrium(self, base_params: ModelParams) -> None:
        """Test basins [0, x1*) and (x1*, 1]; x1* belongs to neither."""
        # Act
        report = classify_equilibria(base_params, 40.0)

        # Assert
        assert 0.0 in report.basin_zero
        assert 0.2499 in report.basin_zero
        assert 0.25 not in report.basin_zero
        assert 0.25 not in report.basin_one
        assert 0.2501 in report.basin_one
        assert 1.0 in report.basin_one
        assert str(report.basin_zero) == "[0, 0.25)"

    def test_upper_boundary_is_marginal(self, base_params: ModelParams, caplog) -> None:
        """Test R = d/m: x1* merges with 0 and both are labelled marginal."""
        # Act
        with caplog.at_level(logging.WARNING):
            report = classify_equilibria(base_params, 50.0)

        # Assert
        assert report.region is Region.BOUNDARY
        assert report.eq_zero.stability is Stability.MARGINAL
        assert report.eq_interior.stability is Stability.MARGINAL
        assert report.eq_one.stability is Stability.STABLE
        assert report.basin_one == Interval(0.0, 1.0, lo_closed=False, hi_closed=True)
        assert "bifurcation boundary" in caplog.text

    def test_lower_boundary_is_marginal(self, base_params: ModelParams) -> None:
        """Test R = d/(m+n): x1* merges with 1."""
        # Act
        report = classify_equilibria(base_params, 25.0)

        # Assert
        assert report.eq_one.stability is Stability.MARGINAL
        assert report.eq_zero.stability is Stability.STABLE
        assert report.basin_zero == Interval(0.0, 1.0, lo_closed=True, hi_closed=False)

    def test_labels_invariant_under_joint_scaling(self) -> None:
        """Test scaling R and d by the same factor keeps region, x1* and every label."""
        # Arrange
        rng = np.random.default_rng(13)

        for _ in range(100):
            params, R = _random_params_and_reward(rng)
            report = classify_equilibria(params, R)

            for kappa in (1e-3, 3.7, 1e6):
                scaled = ModelParams(m=params.m, n=params.n, d=params.d * kappa)

                # Act
                other = classify_equilibria(scaled, R * kappa)

                # Assert
                assert other.region is report.region
                assert other.eq_zero.stability is report.eq_zero.stability
                assert other.eq_one.stability is report.eq_one.stability
                assert other.eq_interior.stability is report.eq_interior.stability
                assert other.eq_interior.in_unit_interval is report.eq_interior.in_unit_interval
                assert other.eq_interior.value == pytest.approx(report.eq_interior.value, rel=1e-12, abs=1e-12)

    def test_labels_follow_derivative_sign(self) -> None:
        """Test each label matches the sign of phi' at its equilibrium."""
        # Arrange
        rng = np.random.default_rng(14)

        def label(slope: float) -> Stability:
            return Stability.STABLE if slope < 0 else Stability.UNSTABLE

        for _ in range(300):
            params, R = _random_params_and_reward(rng)

            # Act
            report = classify_equilibria(params, R)

            # Assert
            assert report.eq_zero.stability is label(phi_derivative(params, R, 0.0))
            assert report.eq_one.stability is label(phi_derivative(params, R, 1.0))
            x_star = report.eq_interior.value
            if 0.05 < x_star < 0.95:
                assert report.eq_interior.stability is label(phi_derivative(params, R, x_star))


class TestRegions:
    """Tests for region_of and region_map."""

    def test_region_of_thresholds(self, base_params: ModelParams) -> None:
        """Test each side of d/m and d/(m+n)."""
        assert region_of(base_params, 50.5) is Region.A
        assert region_of(base_params, 49.5) is Region.B
        assert region_of(base_params, 25.5) is Region.B
        assert region_of(base_params, 24.5) is Region.C
        assert region_of(base_params, 50.0) is Region.BOUNDARY

    def test_region_map_agrees_with_inequalities(self) -> None:
        """Test every cell against 1/m and 1/(m+n)."""
        # Arrange
        n = 2

        # Act
        cells = region_map(n, (1, 5), (0.01, 1.2), 120)

        # Assert
        assert len(cells) == 5 * 120
        for cell in cells:
            upper, lower = 1.0 / cell.m, 1.0 / (cell.m + n)
            r = cell.R_over_d
            if abs(r - upper) < 1e-9 or abs(r - lower) < 1e-9:
                expected = Region.BOUNDARY
            elif r > upper:
                expected = Region.A
            elif r > lower:
                expected = Region.B
            else:
                expected = Region.C
            assert cell.region is expected

    def test_region_map_rejects_bad_ranges(self) -> None:
        """Test m below 1 and empty resolution."""
        with pytest.raises(ParameterError):
            region_map(2, (0, 3), (0.1, 1.0), 10)
        with pytest.raises(ParameterError):
            region_map(2, (1, 3), (0.1, 1.0), 0)


class TestBifurcationBranches:
    """Tests for bifurcation_branches function."""

    def test_three_rows_per_sample(self, base_params: ModelParams) -> None:
        """Test 121 samples over [10, 70] give 363 rows."""
        # Act
        rows = bifurcation_branches(base_params, (10.0, 70.0), 121)

        # Assert
        assert len(rows) == 363
        assert {r.branch_id for r in rows} == {"zero", "one", "interior", "exterior"}

    def test_interior_branch_only_between_thresholds(self, base_params: ModelParams) -> None:
        """Test x1* is tagged interior exactly for d/(m+n) <= R <= d/m."""
        # Act
        rows = bifurcation_branches(base_params, (10.0, 70.0), 121)

        # Assert
        for row in rows:
            if row.branch_id in ("interior", "exterior"):
                inside = 25.0 - 1e-9 <= row.R <= 50.0 + 1e-9
                assert (row.branch_id == "interior") == inside
        at_40 = [r for r in rows if r.R == 40.0 and r.branch_id == "interior"]
        assert at_40[0].x1_eq == 0.25
        assert at_40[0].stability is Stability.UNSTABLE

    def test_exchange_of_stability_at_zero(self, base_params: ModelParams) -> None:
        """Test the zero branch turns unstable above d/m."""
        # Act
        rows = bifurcation_branches(base_params, (40.0, 60.0), 3)
        zero = {r.R: r.stability for r in rows if r.branch_id == "zero"}

        # Assert
        assert zero == {40.0: Stability.STABLE, 50.0: Stability.MARGINAL, 60.0: Stability.UNSTABLE}

    def test_table_columns(self, base_params: ModelParams) -> None:
        """Test (R, x1_eq, stability, branch_id) rows."""
        rows = bifurcation_branches(base_params, (40.0, 60.0), 2)
        assert branch_rows_to_table(rows)[0] == [40.0, 0.0, "stable", "zero"]

    def test_too_few_samples_raise(self, base_params: ModelParams) -> None:
        """Test samples < 2 is rejected."""
        with pytest.raises(ParameterError):
            bifurcation_branches(base_params, (10.0, 70.0), 1)


class TestVerifyTranscritical:
    """Tests for verify_transcritical function."""

    def test_crossing_at_zero(self, base_params: ModelParams) -> None:
        """Test second partials (0.5, 50) at R = d/m."""
        # Act
        check = verify_transcritical(base_params, BifurcationPoint.AT_ZERO)

        # Assert
        assert check.passed
        assert check.closed_form_expected == (0.5, 50.0)
        assert check.d2f_dxdmu == pytest.approx(0.5, rel=1e-4)
        assert check.d2f_dx2 == pytest.approx(50.0, rel=1e-4)
        assert abs(check.dfdx) < 1e-9

    def test_crossing_at_one(self, base_params: ModelParams) -> None:
        """Test second partials (-0.25, 6.25) at R = d/(m+n) in the abstaining chart."""
        # Act
        check = verify_transcritical(base_params, BifurcationPoint.AT_ONE)

        # Assert
        assert check.passed
        assert check.d2f_dxdmu == pytest.approx(-0.25, rel=1e-4)
        assert check.d2f_dx2 == pytest.approx(6.25, rel=1e-4)

    def test_random_parameter_tuples(self) -> None:
        """Test both crossings for 20 random (m, n, d)."""
        # Arrange
        rng = np.random.default_rng(7)

        for _ in range(20):
            params = ModelParams(
                m=int(rng.integers(1, 11)), n=int(rng.integers(1, 11)), d=float(rng.uniform(10.0, 500.0))
            )

            # Act
            checks = [verify_transcritical(params, point) for point in BifurcationPoint]

            # Assert
            assert all(c.passed for c in checks), params

    @pytest.mark.parametrize("d", [1e9, 1e12])
    @pytest.mark.parametrize("point", list(BifurcationPoint))
    def test_large_difficulty_passes(self, d: float, point: BifurcationPoint) -> None:
        """Test both crossings still pass when d and R are huge."""
        # Arrange
        params = ModelParams(m=2, n=2, d=d)

        # Act
        check = verify_transcritical(params, point)

        # Assert
        assert check.passed, check
        assert check.d2f_dxdmu == pytest.approx(check.closed_form_expected[0], rel=1e-6)
        assert check.d2f_dx2 == pytest.approx(check.closed_form_expected[1], rel=1e-6)

    def test_underflowing_step_raises(self, base_params: ModelParams) -> None:
        """Test a step too small to move the state is rejected."""
        with pytest.raises(ParameterError):
            verify_transcritical(base_params, BifurcationPoint.AT_ZERO, rel_step=1e-20)
