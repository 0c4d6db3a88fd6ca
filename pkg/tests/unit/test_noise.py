"""Unit tests for the output noise budget and spin cooling."""

import numpy as np
import pytest
from pydantic import ValidationError

from cqed_sim.exceptions import NumericalError
from cqed_sim.models.device import DEFAULT_CONSTANTS, TWO_PI, DriveParams
from cqed_sim.models.noise import (
    SYSTEM_TEMPERATURE,
    ChannelFractions,
    CoolingReference,
    NoiseBudget,
    NoiseEnvironment,
    amplifier_temperature,
)
from cqed_sim.models.steady_state import SolverMethod
from cqed_sim.physics.noise import (
    channel_fractions,
    check_rayleigh_jeans,
    cooling_depth,
    noise_budget,
    phase_noise_crossover,
    phase_noise_dbc,
    spin_noise_temperature,
    thermal_psd,
)
from cqed_sim.physics.nonlinear import saturation_threshold, steady_state
from cqed_sim.physics.units import drive_from_dbm


@pytest.fixture
def equilibrium_env():
    """Every bath at 300 K, unity gain and a noiseless amplifier."""
    return NoiseEnvironment(
        t_port=300.0,
        t_cavity=300.0,
        t_spin=300.0,
        amp_noise_figure_db=0.0,
        power_gain_db=0.0,
        phase_noise_enabled=False,
    )


class TestNoiseEnvironment:
    """Test defaults and validation of the noise environment."""

    def test_baseline_reproduces_system_temperature(self, env):
        assert env.t_amplifier == pytest.approx(58.66, abs=0.01)
        assert env.t_port + env.t_amplifier == pytest.approx(SYSTEM_TEMPERATURE)
        assert env.t_cavity == env.t_port

    def test_explicit_temperatures_kept(self):
        custom = NoiseEnvironment(t_port=290.0, amp_noise_figure_db=3.0)
        assert custom.t_port == 290.0
        assert custom.t_cavity == pytest.approx(SYSTEM_TEMPERATURE - amplifier_temperature(3.0))

    def test_gain_is_linear(self, env):
        assert env.gain == pytest.approx(10**3.65)

    def test_phase_table_must_increase(self):
        with pytest.raises(ValidationError):
            NoiseEnvironment(phase_noise=[(100.0, -130.0), (10.0, -110.0)])

    def test_unknown_field_rejected(self):
        with pytest.raises(ValidationError):
            NoiseEnvironment(t_room=300.0)


class TestChannelFractions:
    """Port, cavity and spin fractions share the output noise."""

    @pytest.mark.parametrize("power_dbm", [-60.0, -18.0, 0.0])
    @pytest.mark.parametrize("offset_hz", [0.0, 15e3])
    def test_fractions_sum_to_one(self, cavity, spins, power_dbm, offset_hz):
        drive = drive_from_dbm(cavity, power_dbm)
        solution = steady_state(cavity, spins, drive)
        fractions = channel_fractions(cavity, spins, drive, solution, offset_hz)
        assert fractions.total == pytest.approx(1.0, rel=1e-12)
        assert fractions.spin > 0

    def test_fractions_sum_to_one_at_random_points(self, cavity, spins):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            drive = drive_from_dbm(
                cavity,
                rng.uniform(-70.0, 20.0),
                delta=TWO_PI * rng.uniform(-1e6, 1e6),
                delta_s=TWO_PI * rng.uniform(-3e6, 3e6),
            )
            solution = steady_state(cavity, spins, drive, method=SolverMethod.EFFECTIVE)
            fractions = channel_fractions(cavity, spins, drive, solution, rng.uniform(0.0, 1e5))
            assert fractions.total == pytest.approx(1.0, rel=1e-12)
            assert min(fractions.port, fractions.cavity, fractions.spin) >= 0.0

    def test_saturation_closes_spin_channel(self, cavity, spins):
        weak = drive_from_dbm(cavity, -60.0)
        strong = drive_from_dbm(cavity, 0.0)
        f_weak = channel_fractions(cavity, spins, weak, steady_state(cavity, spins, weak))
        f_strong = channel_fractions(cavity, spins, strong, steady_state(cavity, spins, strong))
        assert f_strong.spin < f_weak.spin

    def test_detuned_spins_leave_empty_cavity(self, cavity, spins):
        drive = DriveParams(delta_s=TWO_PI * 1e9)
        fractions = channel_fractions(cavity, spins, drive, steady_state(cavity, spins, drive))
        assert fractions.spin == pytest.approx(0.0, abs=1e-4)
        assert fractions.cavity == pytest.approx(4 * cavity.kappa_c1 * cavity.kappa_c / cavity.kappa**2, rel=1e-3)


class TestSpinTemperature:
    """Test the optically cooled spin bath."""

    def test_unsaturated_temperature(self, spins):
        assert spin_noise_temperature(spins, 300.0) == pytest.approx(300.0 * 3.0 / 33.0)

    def test_saturation_warms_bath(self, spins):
        assert spin_noise_temperature(spins, 300.0, chi=3.0) > spin_noise_temperature(spins, 300.0)
        assert spin_noise_temperature(spins, 300.0, chi=1e6) == pytest.approx(300.0, rel=1e-9)

    def test_unpumped_spins_at_ambient(self, spins):
        assert spin_noise_temperature(spins.with_updates(gamma_p=0.0), 300.0) == 300.0

    def test_rayleigh_jeans_check(self, cavity):
        assert check_rayleigh_jeans(cavity.omega_c, [300.0, 27.0])
        assert not check_rayleigh_jeans(cavity.omega_c, [0.5])


class TestNoiseBudget:
    """Test the assembled budget."""

    def test_equilibrium_gives_johnson_noise(self, cavity, spins, equilibrium_env):
        drive = drive_from_dbm(cavity, -18.0)
        budget = noise_budget(cavity, spins, drive, equilibrium_env)
        expected = DEFAULT_CONSTANTS.k_B * 300.0 * 50.0
        assert budget.total == pytest.approx(expected, rel=1e-12)
        assert budget.amplifier == 0.0
        assert budget.phase == 0.0

    def test_components_add_up(self, cavity, spins, env):
        budget = noise_budget(cavity, spins, drive_from_dbm(cavity, -18.0), env)
        assert budget.total == pytest.approx(budget.thermal + budget.phase + budget.amplifier)
        assert budget.offset_hz == env.offset_hz
        assert budget.t_spin < env.t_ambient

    def test_cold_spins_lower_noise(self, cavity, spins, env):
        drive = drive_from_dbm(cavity, -40.0)
        cold = noise_budget(cavity, spins, drive, env)
        warm = noise_budget(cavity, spins, drive, env.with_updates(t_spin=env.t_ambient))
        assert cold.total < warm.total

    def test_thermal_part_matches_johnson_psd(self, cavity, spins, env):
        budget = noise_budget(cavity, spins, drive_from_dbm(cavity, -18.0), env)
        device = thermal_psd(env, budget.channel_fractions, budget.t_spin)
        assert budget.thermal == pytest.approx(env.gain * device, rel=1e-12)

    def test_two_sided_halves(self, cavity, spins, env):
        budget = noise_budget(cavity, spins, drive_from_dbm(cavity, -18.0), env)
        two_sided = budget.as_two_sided()
        assert two_sided.two_sided
        assert two_sided.total == pytest.approx(budget.total / 2.0)
        assert two_sided.as_two_sided() is two_sided

    def test_inconsistent_total_rejected(self):
        fractions = ChannelFractions(port=0.5, cavity=0.3, spin=0.2)
        with pytest.raises(ValidationError):
            NoiseBudget(
                thermal_port=1.0,
                thermal_cavity=1.0,
                thermal_spin=1.0,
                phase=0.0,
                amplifier=1.0,
                total=5.0,
                channel_fractions=fractions,
                t_spin=27.0,
                offset_hz=15e3,
            )


class TestPhaseNoise:
    """Test the tabulated source phase noise."""

    def test_log_interpolation(self, env):
        assert phase_noise_dbc(env, 15e3) == pytest.approx(-170.0)
        assert phase_noise_dbc(env, 10**1.5) == pytest.approx(-120.0)

    def test_extrapolation_below_table(self, env):
        assert phase_noise_dbc(env, 1.0) == pytest.approx(-90.0)

    def test_single_point_is_flat(self, env):
        flat = env.with_updates(phase_noise=[(1e3, -130.0)])
        assert phase_noise_dbc(flat, 1.0) == -130.0
        assert phase_noise_dbc(flat, 1e6) == -130.0

    def test_no_phase_noise_without_drive(self, cavity, spins, env):
        budget = noise_budget(cavity, spins, DriveParams(), env)
        assert budget.phase == 0.0

    def test_crossover_with_detuned_spins(self, cavity, single_line_spins, env):
        """Phase noise reflected off the empty cavity meets the 407 K floor near -8.4 dBm."""
        flat = env.with_updates(phase_noise=[(1e4, -130.0)])
        crossover = phase_noise_crossover(
            cavity, single_line_spins, flat, drive=DriveParams(delta_s=TWO_PI * 1e9)
        )
        assert -9.5 < crossover < -7.5

    def test_crossover_on_resonance(self, cavity, spins, env):
        """Resonant spins keep |r|² large, so a flat -130 dBc/Hz source crosses the floor near -40 dBm."""
        flat = env.with_updates(phase_noise=[(1e4, -130.0)])
        assert phase_noise_crossover(cavity, spins, flat) == pytest.approx(-40.3, abs=1.0)

    def test_default_table_never_crosses_on_resonance(self, cavity, spins, env):
        with pytest.raises(NumericalError):
            phase_noise_crossover(cavity, spins, env)


class TestCoolingDepth:
    """Resonant spins cool the output noise below the detuned baseline."""

    def test_weak_drive_cooling(self, cavity, spins, env):
        depth = cooling_depth(cavity, spins, drive_from_dbm(cavity, -40.0), env)
        assert 1.0 < depth < 3.5

    def test_saturation_reduces_cooling(self, cavity, spins, env):
        weak = cooling_depth(cavity, spins, drive_from_dbm(cavity, -40.0), env)
        strong = cooling_depth(cavity, spins, drive_from_dbm(cavity, 0.0), env)
        assert strong < weak

    def test_no_cooling_at_ambient_spin_temperature(self, cavity, spins, equilibrium_env):
        depth = cooling_depth(cavity, spins, drive_from_dbm(cavity, -40.0), equilibrium_env)
        assert depth == pytest.approx(0.0, abs=1e-9)

    def test_budget_scales_with_gain(self, cavity, spins, env):
        drive = drive_from_dbm(cavity, -18.0)
        low = noise_budget(cavity, spins, drive, env.with_updates(power_gain_db=0.0))
        high = noise_budget(cavity, spins, drive, env)
        assert high.total / low.total == pytest.approx(env.gain, rel=1e-12)
        assert np.isfinite(high.total)

    def test_bare_model_cooling_against_empty_cavity(self, cavity, spins):
        """Cold spins (0 K), a noiseless amplifier and no phase noise: about 2.73 dB below the spin-free cavity."""
        bare = NoiseEnvironment(amp_noise_figure_db=0.0, phase_noise_enabled=False, t_spin=0.0)
        drive = drive_from_dbm(cavity, -60.0)
        depth = cooling_depth(cavity, spins, drive, bare, reference=CoolingReference.BARE)
        assert depth == pytest.approx(2.73, abs=0.05)

    def test_reference_taken_from_environment(self, cavity, spins, env):
        drive = drive_from_dbm(cavity, -40.0)
        bare_env = env.with_updates(cooling_reference=CoolingReference.BARE)
        assert cooling_depth(cavity, spins, drive, bare_env) == pytest.approx(
            cooling_depth(cavity, spins, drive, env, reference=CoolingReference.BARE)
        )

    def test_phase_noise_left_out_of_comparison(self, cavity, spins, env):
        drive = drive_from_dbm(cavity, -18.0)
        quiet = env.with_updates(phase_noise_enabled=False)
        assert cooling_depth(cavity, spins, drive, env) == pytest.approx(
            cooling_depth(cavity, spins, drive, quiet), rel=1e-12
        )

    def test_saturation_quenches_cooling(self, cavity, spins, env):
        """Fifteen dB above the saturation threshold the cooling is gone, and it falls monotonically on the way."""
        p_s = saturation_threshold(cavity, spins).power_dbm
        powers = p_s + np.array([0.0, 5.0, 10.0, 15.0, 20.0, 25.0])
        depths = [cooling_depth(cavity, spins, drive_from_dbm(cavity, p), env) for p in powers]
        assert np.all(np.diff(depths) < 1e-9)
        assert all(d <= 0.1 for d in depths[3:])
        for reference in CoolingReference:
            quenched = cooling_depth(cavity, spins, drive_from_dbm(cavity, p_s + 15.0), env, reference=reference)
            assert quenched <= 0.1
