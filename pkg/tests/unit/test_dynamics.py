"""Unit tests for the adaptive integrator and the binned equations of motion."""

import numpy as np
import pytest
from pydantic import ValidationError

from cqed_sim.exceptions import ConfigValidationError, StiffnessError
from cqed_sim.models.device import DriveParams, LineShape
from cqed_sim.models.dynamics import EnsembleState, IntegratorConfig, SpinBins
from cqed_sim.models.spectra import InhomogeneousDistribution
from cqed_sim.models.steady_state import SolverMethod
from cqed_sim.physics.dynamics import (
    EquationsOfMotion,
    bin_distribution,
    integrate,
    line_bins,
)
from cqed_sim.physics.integrator import integrate_adaptive
from cqed_sim.physics.nonlinear import steady_ensemble_state, steady_state
from cqed_sim.physics.units import drive_from_dbm


class TestIntegrator:
    """Test the Dormand-Prince stepper on problems with known solutions."""

    def test_exponential_decay(self):
        t, y, steps, _ = integrate_adaptive(
            lambda t, y: -y, 0.0, np.array([1.0]), 1.0, rtol=1e-10, atol=1e-12
        )
        assert t == 1.0
        assert y[0] == pytest.approx(np.exp(-1.0), rel=1e-9)
        assert steps > 0

    def test_harmonic_oscillator_period(self):
        def rhs(t, y):
            return np.array([y[1], -y[0]])

        _, y, _, _ = integrate_adaptive(rhs, 0.0, np.array([1.0, 0.0]), 2 * np.pi, rtol=1e-10, atol=1e-12)
        assert y == pytest.approx([1.0, 0.0], abs=1e-8)

    def test_early_stop(self):
        t, _, steps, _ = integrate_adaptive(
            lambda t, y: -y,
            0.0,
            np.array([1.0]),
            10.0,
            rtol=1e-8,
            atol=1e-10,
            on_step=lambda t, y: t > 1.0,
        )
        assert 1.0 < t < 10.0
        assert steps >= 1

    def test_inadmissible_state_underflows(self):
        """A state forced out of bounds is rejected until the step underflows."""
        with pytest.raises(StiffnessError) as exc_info:
            integrate_adaptive(
                lambda t, y: -np.ones_like(y),
                0.0,
                np.array([1.0]),
                2.0,
                rtol=1e-8,
                atol=1e-10,
                is_admissible=lambda y: bool(np.all(y >= 0.0)),
            )
        assert "steps" in exc_info.value.diagnostics


class TestBins:
    """Test equal-mass line discretization."""

    def test_lorentzian_bins(self, spins):
        bins = line_bins(spins, 201)

        assert bins.size == 201
        assert np.sum(bins.weights) == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.diff(bins.offsets) > 0)
        assert bins.offsets + bins.offsets[::-1] == pytest.approx(np.zeros(201), abs=1e-6)
        assert bins.offsets[100] == pytest.approx(0.0, abs=1e-6)
        assert np.max(np.abs(bins.offsets)) < 20.0 * spins.gamma_inh

    def test_gaussian_bins_are_narrower(self, spins):
        lorentz = line_bins(spins, 51)
        gauss = line_bins(spins.with_updates(lineshape=LineShape.GAUSSIAN), 51)
        assert np.max(np.abs(gauss.offsets)) < np.max(np.abs(lorentz.offsets))

    def test_sampled_density_bins(self):
        dist = InhomogeneousDistribution.gaussian(center=5.0, fwhm=1.0).sampled(n_points=20_001)
        bins = bin_distribution(dist, 101)
        assert bins.first_moment == pytest.approx(0.0, abs=1e-3)

    def test_single_bin(self, spins):
        bins = line_bins(spins, 1)
        assert bins.offsets.tolist() == [0.0]
        assert bins.weights.tolist() == [1.0]

    @pytest.mark.parametrize("n_bins", [0, 2, 100])
    def test_invalid_bin_counts(self, spins, n_bins):
        with pytest.raises(ConfigValidationError) as exc_info:
            line_bins(spins, n_bins)
        assert exc_info.value.key == "n_bins"

    def test_weights_must_be_normalized(self):
        with pytest.raises(ValidationError):
            SpinBins(offsets=np.zeros(2), weights=np.array([0.5, 0.6]))


class TestEquationsOfMotion:
    """Test the right-hand side against the analytic steady state."""

    def test_pack_round_trip(self, cavity, spins):
        bins = line_bins(spins, 5)
        eom = EquationsOfMotion(cavity, spins, drive_from_dbm(cavity, -18.0), bins)
        rng = np.random.default_rng(3)
        s = rng.normal(size=(3, 5)) + 1j * rng.normal(size=(3, 5))
        p = rng.uniform(size=(3, 5))

        alpha, s_out, p_out = eom.unpack(eom.pack(EnsembleState(alpha=1 - 2j, s=s, p=p)))
        assert alpha == 1 - 2j
        assert np.array_equal(s_out, s)
        assert np.array_equal(p_out, p)

    def test_binned_steady_state_is_fixed_point(self, cavity, spins):
        bins = line_bins(spins, 21)
        drive = drive_from_dbm(cavity, -18.0)
        solution = steady_state(cavity, spins, drive, method=SolverMethod.BINS, bins=bins)
        state = steady_ensemble_state(cavity, spins, drive, solution, bins)

        eom = EquationsOfMotion(cavity, spins, drive, bins)
        assert eom.residual(state) < 1e-8

    def test_undriven_polarized_state_is_at_rest(self, cavity, spins):
        bins = line_bins(spins, 3)
        eom = EquationsOfMotion(cavity, spins, DriveParams(), bins)
        assert eom.residual(EnsembleState.polarized(3, 3)) == 0.0

    def test_population_bounds(self, cavity, spins):
        bins = line_bins(spins, 3)
        eom = EquationsOfMotion(cavity, spins, drive_from_dbm(cavity, -18.0), bins)
        y = eom.pack(EnsembleState.polarized(3, 3))
        assert eom.is_admissible(y)
        y[-1] = -1e-3
        assert not eom.is_admissible(y)
        assert eom.is_admissible(y, slack=1e-2)

    def test_population_validation(self):
        with pytest.raises(ValidationError):
            EnsembleState(s=np.zeros((1, 2), dtype=complex), p=np.array([[0.0, 1.5]]))


class TestIntegrate:
    """Test trajectories of small systems."""

    def test_empty_cavity_relaxes_to_driven_field(self, cavity, spins):
        empty = spins.with_updates(n_spins=0.0, n_hyperfine=1)
        drive = drive_from_dbm(cavity, -40.0)
        config = IntegratorConfig(n_bins=1, n_samples=21)

        trajectory = integrate(EnsembleState.polarized(1, 1), cavity, empty, drive, config, 200.0 / cavity.kappa)

        expected = 2.0 * np.sqrt(cavity.kappa_c1) * drive.beta_in / cavity.kappa
        assert trajectory.final_state.alpha == pytest.approx(expected, rel=1e-6)
        assert trajectory.steady
        assert trajectory.t[0] == 0.0
        assert trajectory.alpha_sq[0] == 0.0

    def test_shape_mismatch_rejected(self, cavity, spins):
        config = IntegratorConfig(n_bins=5)
        with pytest.raises(ConfigValidationError) as exc_info:
            integrate(EnsembleState.polarized(3, 7), cavity, spins, drive_from_dbm(cavity, -18.0), config, 1e-6)
        assert exc_info.value.key == "state0"

    def test_non_positive_duration_rejected(self, cavity, spins):
        config = IntegratorConfig(n_bins=1)
        with pytest.raises(ConfigValidationError):
            integrate(EnsembleState.polarized(3, 1), cavity, spins, drive_from_dbm(cavity, -18.0), config, 0.0)

    def test_config_rejects_unknown_keys(self):
        with pytest.raises(ValidationError):
            IntegratorConfig(method="rk4")
