"""Unit tests for the saturable steady state."""

import numpy as np
import pytest

from cqed_sim.exceptions import BranchSelectionError, ConfigValidationError
from cqed_sim.models.device import TWO_PI, DriveParams
from cqed_sim.models.steady_state import Branch, SolverMethod, SweepDirection
from cqed_sim.physics.dynamics import line_bins
from cqed_sim.physics.linear_response import linear_self_energy, reflection_linear
from cqed_sim.physics.nonlinear import (
    bistability_predicate,
    depolarization_factor,
    detect_bistability,
    energy_balance,
    nonlinear_map,
    numeric_saturation_onset,
    quadrature_slope,
    reflection_nonlinear,
    resonant_occupancy,
    resonant_steady_state,
    saturation_threshold,
    select_branch,
    self_energy,
    solve_occupancy,
    spin_bin_states,
    spin_inversion,
    steady_state,
)
from cqed_sim.physics.units import drive_from_dbm

# Inside the bistable window of the bistable_spins fixture (about -7.9 to -6.1 dBm)
BISTABLE_FLUX = 1.06e20


class TestSpinResponse:
    """Test single-class saturation factors."""

    def test_no_field_no_depolarization(self):
        assert depolarization_factor(0.05, 0.0, 2e5) == pytest.approx(1.0)

    def test_inversion_limits(self):
        assert spin_inversion(0.05, 0.0, 2e5, 1.8e5, 0.0) == pytest.approx(1.0)
        far = spin_inversion(0.05, 1e14, 2e5, 1.8e5, np.array([0.0, 1e9]))
        assert far[0] < far[1] <= 1.0

    def test_inversion_requires_pump(self):
        with pytest.raises(ConfigValidationError):
            spin_inversion(0.05, 1.0, 2e5, 0.0, 0.0)

    def test_exact_self_energy_linear_limit(self, cavity, spins):
        drive = DriveParams(delta=TWO_PI * 4e4, delta_s=-TWO_PI * 1e5)
        sigma = self_energy(cavity, spins, drive, 0.0, SolverMethod.EXACT)
        assert sigma == pytest.approx(linear_self_energy(cavity, spins, drive), rel=1e-9)

    def test_self_energy_vectorized(self, cavity, spins):
        n = np.array([0.0, 1e10, 1e12])
        sigma = self_energy(cavity, spins, DriveParams(), n, SolverMethod.EFFECTIVE)
        assert sigma.shape == (3,)
        assert np.all(np.diff(sigma.real) < 0)


class TestSteadyState:
    """Test root finding and agreement between self-energy models."""

    def test_zero_drive_is_linear(self, cavity, spins):
        point = reflection_nonlinear(cavity, spins, DriveParams())
        assert point.r == pytest.approx(reflection_linear(cavity, spins, DriveParams()).r, rel=1e-9)

    def test_weak_drive_matches_linear(self, cavity, spins):
        drive = drive_from_dbm(cavity, -80.0)
        point = reflection_nonlinear(cavity, spins, drive)
        assert point.abs_r2 == pytest.approx(0.385, abs=0.005)

    def test_effective_matches_resonant_closed_form(self, cavity, single_line_spins):
        drive = drive_from_dbm(cavity, -18.0)
        numeric = steady_state(cavity, single_line_spins, drive, method=SolverMethod.EFFECTIVE)
        closed = resonant_occupancy(cavity, single_line_spins, drive.beta_in**2)

        assert len(closed) == 1
        assert numeric.alpha_sq == pytest.approx(closed[0].alpha_sq, rel=1e-8)
        assert numeric.chi == pytest.approx(closed[0].chi, rel=1e-8)

    def test_bins_approach_exact(self, cavity, spins):
        drive = drive_from_dbm(cavity, -18.0)
        exact = steady_state(cavity, spins, drive, method=SolverMethod.EXACT)
        binned = steady_state(cavity, spins, drive, method=SolverMethod.BINS)
        assert binned.alpha_sq == pytest.approx(exact.alpha_sq, rel=0.03)

    def test_saturation_raises_occupancy_above_linear(self, cavity, spins):
        drive = drive_from_dbm(cavity, -10.0)
        solution = steady_state(cavity, spins, drive)
        d0 = cavity.kappa / 2.0 + self_energy(cavity, spins, drive, 0.0)
        assert solution.alpha_sq > cavity.kappa_c1 * drive.beta_in**2 / abs(d0) ** 2
        assert solution.chi > 1.0

    def test_scan_resolution_checked(self, cavity, spins):
        with pytest.raises(ConfigValidationError) as exc_info:
            solve_occupancy(cavity, spins, drive_from_dbm(cavity, -18.0), scan_points=50)
        assert exc_info.value.key == "scan_points"

    def test_pump_required(self, cavity, spins):
        unpumped = spins.with_updates(gamma_p=0.0)
        with pytest.raises(ConfigValidationError) as exc_info:
            solve_occupancy(cavity, unpumped, drive_from_dbm(cavity, -18.0))
        assert exc_info.value.key == "spins.gamma_p"

    def test_map_order(self, cavity, spins):
        delta = TWO_PI * np.array([-1e5, 0.0, 1e5])
        delta_s = TWO_PI * np.array([0.0, 2e5])
        result = nonlinear_map(cavity, spins, -30.0, delta, delta_s, threads=2)

        assert len(result) == 6
        assert [(d, ds) for d, ds, _ in result] == [(d, ds) for ds in delta_s for d in delta]


class TestSaturation:
    """Test the saturation onset."""

    def test_analytic_threshold(self, cavity, spins):
        threshold = saturation_threshold(cavity, spins)
        assert threshold.power_dbm == pytest.approx(-19.26, abs=0.02)
        assert threshold.beta_s_sq == pytest.approx(6.23e18, rel=1e-2)

    def test_threshold_is_occupancy_root_at_sqrt_two(self, cavity, spins):
        threshold = saturation_threshold(cavity, spins)
        (root,) = resonant_occupancy(cavity, spins, threshold.beta_s_sq)
        assert root.chi == pytest.approx(np.sqrt(2.0), rel=1e-9)

    def test_numeric_onset(self, cavity, spins):
        """The 5% occupancy deviation sets in about 10 dB below the χ = √2 threshold."""
        onset = numeric_saturation_onset(cavity, spins, deviation=0.05)
        assert onset == pytest.approx(-29.10, abs=0.1)
        assert 9.0 < saturation_threshold(cavity, spins).power_dbm - onset < 10.5

    def test_numeric_onset_obeys_closed_form_deviation(self, cavity, single_line_spins):
        """On resonance |α|²/|α|²_linear = ((1 + C_0)/(1 + C_α))², so the onset sits where that ratio is 1.05."""
        onset = numeric_saturation_onset(
            cavity, single_line_spins, deviation=0.05, method=SolverMethod.EFFECTIVE
        )
        solution = steady_state(
            cavity, single_line_spins, drive_from_dbm(cavity, onset), method=SolverMethod.EFFECTIVE
        )
        g, gamma_inh, gamma = single_line_spins.g, single_line_spins.gamma_inh, single_line_spins.gamma
        c0 = 4.0 * g**2 / (cavity.kappa * (gamma_inh + gamma))
        assert ((1.0 + c0) / (1.0 + solution.c_alpha)) ** 2 == pytest.approx(1.05, rel=1e-4)
        assert solution.chi < np.sqrt(2.0)

    def test_deviation_range_checked(self, cavity, spins):
        with pytest.raises(ConfigValidationError):
            numeric_saturation_onset(cavity, spins, deviation=1.5)


class TestSlope:
    """Test the closed-form quadrature slope."""

    def test_matches_finite_difference(self, cavity, single_line_spins):
        power = -18.0
        h = TWO_PI * 10.0

        def im_r(delta_s):
            drive = drive_from_dbm(cavity, power, delta_s=delta_s)
            return steady_state(cavity, single_line_spins, drive, method=SolverMethod.EFFECTIVE).r.imag

        numeric = abs(im_r(h) - im_r(-h)) / (2.0 * h)
        closed = quadrature_slope(cavity, single_line_spins, drive_from_dbm(cavity, power))
        assert closed == pytest.approx(numeric, rel=1e-4)

    @pytest.mark.parametrize("power", np.linspace(-50.0, -20.0, 7))
    def test_matches_finite_difference_below_saturation(self, cavity, single_line_spins, power):
        h = TWO_PI * 10.0

        def im_r(delta_s):
            drive = drive_from_dbm(cavity, power, delta_s=delta_s)
            return steady_state(cavity, single_line_spins, drive, method=SolverMethod.EFFECTIVE).r.imag

        numeric = abs(im_r(h) - im_r(-h)) / (2.0 * h)
        closed = quadrature_slope(cavity, single_line_spins, drive_from_dbm(cavity, power))
        assert closed == pytest.approx(numeric, rel=1e-3)

    def test_requires_resonant_drive(self, cavity, spins):
        drive = drive_from_dbm(cavity, -18.0, delta=TWO_PI * 1e3)
        with pytest.raises(ConfigValidationError) as exc_info:
            quadrature_slope(cavity, spins, drive)
        assert exc_info.value.key == "drive"


class TestBistability:
    """Test branch labels and selection in the bistable regime."""

    def test_three_roots(self, cavity, bistable_spins):
        roots = resonant_occupancy(cavity, bistable_spins, BISTABLE_FLUX)

        assert [r.branch for r in roots] == [Branch.LOWER, Branch.MIDDLE_UNSTABLE, Branch.UPPER]
        assert [r.stable for r in roots] == [True, False, True]
        assert roots[0].alpha_sq < roots[1].alpha_sq < roots[2].alpha_sq

    def test_sweep_direction_picks_branch(self, cavity, bistable_spins):
        roots = resonant_occupancy(cavity, bistable_spins, BISTABLE_FLUX)
        assert select_branch(roots, SweepDirection.UP) is roots[0]
        assert select_branch(roots, SweepDirection.DOWN) is roots[2]

        upper = resonant_steady_state(cavity, bistable_spins, BISTABLE_FLUX, SweepDirection.DOWN)
        assert upper.alpha_sq == pytest.approx(roots[2].alpha_sq)

    def test_missing_direction_rejected(self, cavity, bistable_spins):
        roots = resonant_occupancy(cavity, bistable_spins, BISTABLE_FLUX)
        with pytest.raises(BranchSelectionError):
            select_branch(roots, None)

        drive = DriveParams(beta_in=float(np.sqrt(BISTABLE_FLUX)))
        with pytest.raises(BranchSelectionError):
            quadrature_slope(cavity, bistable_spins, drive)

    def test_numeric_scan_finds_all_roots(self, cavity, bistable_spins):
        drive = DriveParams(beta_in=float(np.sqrt(BISTABLE_FLUX)))
        numeric = solve_occupancy(cavity, bistable_spins, drive, SolverMethod.EFFECTIVE)
        closed = resonant_occupancy(cavity, bistable_spins, BISTABLE_FLUX)

        assert len(numeric) == 3
        for a, b in zip(numeric, closed):
            assert a.alpha_sq == pytest.approx(b.alpha_sq, rel=1e-6)
            assert a.stable == b.stable

    def test_power_scan(self, cavity, bistable_spins):
        report = detect_bistability(
            cavity,
            bistable_spins,
            np.linspace(-12.0, -3.0, 37),
            method=SolverMethod.EFFECTIVE,
            threads=1,
        )
        assert report.is_bistable
        assert report.predicate > 1.0
        low, high = report.interval_dbm
        assert -8.5 < low < high < -5.5
        bistable = report.stable_roots > 1
        assert np.all(report.upper_branch_alpha_sq[bistable] > report.lower_branch_alpha_sq[bistable])

    def test_reference_device_not_bistable(self, cavity, spins):
        assert bistability_predicate(cavity, spins) < 1.0
        report = detect_bistability(
            cavity, spins, np.linspace(-40.0, 0.0, 9), method=SolverMethod.EFFECTIVE, threads=1
        )
        assert not report.is_bistable
        assert report.interval_dbm is None

    def test_non_monotone_powers_rejected(self, cavity, spins):
        with pytest.raises(ConfigValidationError):
            detect_bistability(cavity, spins, [-20.0, -10.0, -15.0])


class TestEnergyBalance:
    """Photon flux in minus out equals cavity loss plus spin absorption."""

    def test_binned_steady_state_conserves_flux(self, cavity, spins):
        bins = line_bins(spins, 101)
        drive = drive_from_dbm(cavity, -18.0)
        solution = steady_state(cavity, spins, drive, method=SolverMethod.BINS, bins=bins)
        balance = energy_balance(cavity, spins, drive, solution, bins)

        assert balance.cavity_loss > 0
        assert balance.spin_absorption > 0
        assert balance.relative_mismatch < 1e-8

    def test_bin_states(self, cavity, spins):
        bins = line_bins(spins, 21)
        drive = drive_from_dbm(cavity, -18.0)
        solution = steady_state(cavity, spins, drive, method=SolverMethod.BINS, bins=bins)
        states = spin_bin_states(cavity, spins, drive, solution, bins)

        assert len(states) == spins.n_hyperfine * 21
        assert sum(s.weight for s in states) == pytest.approx(spins.n_hyperfine)
        assert all(0.0 < s.w <= 1.0 for s in states)
