"""Output noise of the reflection readout.

Noise leaving the port is a mixture of the three baths the cavity mode couples to:
the port itself, the intrinsic cavity loss and the spin ensemble. With
D = κ/2 + i(ω − ω_c) + Σ(ω) and κ_s = 2·Re Σ,

    F_port = |−1 + κ_c1/D|²,  F_cav = κ_c1κ_c/|D|²,  F_spin = κ_c1κ_s/|D|²

which sum to one at every frequency. Optically polarized spins form a cold bath, so
a resonant ensemble lowers the emitted Johnson–Nyquist noise below k_B·T·R.
"""

import logging
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from cqed_sim.exceptions import NumericalError
from cqed_sim.models.device import (
    DEFAULT_CONSTANTS,
    TWO_PI,
    CavityParams,
    DriveParams,
    PhysicalConstants,
    SpinEnsembleParams,
)
from cqed_sim.models.noise import (
    ChannelFractions,
    CoolingReference,
    NoiseBudget,
    NoiseEnvironment,
)
from cqed_sim.models.steady_state import SolverMethod, SteadyStateSolution
from cqed_sim.physics.nonlinear import cavity_denominator, self_energy, steady_state
from cqed_sim.physics.units import drive_from_dbm, drive_power_w

logger = logging.getLogger(__name__)

# ħω/(k_B T) above which the Rayleigh–Jeans form is flagged
RAYLEIGH_JEANS_LIMIT = 0.05


def channel_fractions(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    drive: DriveParams,
    solution: SteadyStateSolution,
    offset_hz: float = 0.0,
) -> ChannelFractions:
    """Bath fractions of the output noise at ω_d ± offset, averaged over both sidebands.

    The spin self-energy is the first-order saturable form with χ taken from the
    steady state, so the cooling channel closes as the drive saturates the spins.

    Args:
        cav: Cavity parameters
        spins: Spin ensemble
        drive: Drive detunings
        solution: Steady state supplying |α|²
        offset_hz: Analysis offset from the carrier (Hz)

    Returns:
        (port, cavity, spin) fractions summing to one
    """
    offsets = [0.0] if offset_hz == 0 else [TWO_PI * offset_hz, -TWO_PI * offset_hz]
    port = cavity = spin = 0.0
    for shift in offsets:
        sideband = drive.with_updates(delta=drive.delta + shift)
        sigma = self_energy(cav, spins, sideband, solution.alpha_sq, SolverMethod.EFFECTIVE)
        d = cavity_denominator(cav, sideband, sigma)
        d2 = abs(d) ** 2
        port += abs(-1.0 + cav.kappa_c1 / d) ** 2
        cavity += cav.kappa_c1 * cav.kappa_c / d2
        spin += cav.kappa_c1 * 2.0 * sigma.real / d2
    n = len(offsets)
    return ChannelFractions(port=port / n, cavity=cavity / n, spin=spin / n)


def spin_noise_temperature(
    spins: SpinEnsembleParams, t_ambient: float, chi: float = 1.0
) -> float:
    """Effective spin bath temperature T_ambient·(1 − (γ_p/γ)/χ²) in K.

    At χ = 1 this is T_ambient·γ_0/(γ_0 + γ_p); saturation (χ → ∞) warms the bath back
    to ambient.
    """
    if spins.gamma_p <= 0:
        return float(t_ambient)
    return float(t_ambient * (1.0 - (spins.gamma_p / spins.gamma) / chi**2))


def check_rayleigh_jeans(omega: float, temperatures: Sequence[float], constants: PhysicalConstants = DEFAULT_CONSTANTS) -> bool:
    """Warn when a bath is too cold for the k_B·T·R form; returns True when valid."""
    valid = True
    for t in temperatures:
        if t > 0 and constants.hbar * omega / (constants.k_B * t) > RAYLEIGH_JEANS_LIMIT:
            logger.warning(
                f"Rayleigh-Jeans approximation questionable at T={t:.3g} K",
                extra={"temperature_k": t, "omega": omega},
            )
            valid = False
    return valid


def thermal_psd(
    env: NoiseEnvironment,
    fractions: ChannelFractions,
    t_spin: float,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> float:
    """Johnson–Nyquist PSD k_B·R·(F_port·T_port + F_cav·T_cav + F_spin·T_spin) at the device plane."""
    weighted = (
        fractions.port * env.t_port + fractions.cavity * env.t_cavity + fractions.spin * t_spin
    )
    return constants.k_B * env.resistance * weighted


def phase_noise_dbc(env: NoiseEnvironment, offset_hz: float) -> float:
    """Source phase noise L_φ (dBc/Hz), interpolated linearly in log10(f).

    Outside the tabulated range the nearest segment slope is extrapolated.
    """
    offsets = np.array([p[0] for p in env.phase_noise])
    levels = np.array([p[1] for p in env.phase_noise])
    if offsets.size == 1:
        return float(levels[0])

    x = np.log10(offset_hz)
    logf = np.log10(offsets)
    if offset_hz < offsets[0] or offset_hz > offsets[-1]:
        logger.warning(
            f"Phase noise requested at {offset_hz:.4g} Hz outside the table; extrapolating",
            extra={"offset_hz": offset_hz},
        )
        i = 0 if offset_hz < offsets[0] else -2
        slope = (levels[i + 1] - levels[i]) / (logf[i + 1] - logf[i])
        return float(levels[i] + slope * (x - logf[i]))
    return float(np.interp(x, logf, levels))


def phase_noise_psd(
    env: NoiseEnvironment,
    cav: CavityParams,
    drive: DriveParams,
    r: complex,
    offset_hz: float,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> float:
    """Quadrature phase noise L_φ(f)·(ħω|β_in|²R)·|r|² at the device plane (V²/Hz)."""
    if not env.phase_noise_enabled or drive.beta_in == 0:
        return 0.0
    l_phi = 10.0 ** (phase_noise_dbc(env, offset_hz) / 10.0)
    power = drive_power_w(cav, drive, constants)
    return l_phi * power * env.resistance * abs(r) ** 2


def noise_budget(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    drive: DriveParams,
    env: NoiseEnvironment,
    solution: Optional[SteadyStateSolution] = None,
    offset_hz: Optional[float] = None,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> NoiseBudget:
    """All output noise components referred to the output plane (× power gain).

    Args:
        cav: Cavity parameters
        spins: Spin ensemble
        drive: Drive amplitude and detunings
        env: Noise environment
        solution: Steady state; solved on the up-sweep branch when omitted
        offset_hz: Analysis frequency; env.offset_hz when omitted

    Returns:
        Single-sided NoiseBudget
    """
    if solution is None:
        solution = steady_state(cav, spins, drive)
    offset_hz = env.offset_hz if offset_hz is None else offset_hz

    fractions = channel_fractions(cav, spins, drive, solution, offset_hz)
    t_spin = (
        env.t_spin
        if env.t_spin is not None
        else spin_noise_temperature(spins, env.t_ambient, solution.chi)
    )
    check_rayleigh_jeans(drive.omega_d(cav), (env.t_port, env.t_cavity, t_spin), constants)

    gain = env.gain
    scale = constants.k_B * env.resistance * gain
    thermal_port = scale * fractions.port * env.t_port
    thermal_cavity = scale * fractions.cavity * env.t_cavity
    thermal_spin = scale * fractions.spin * t_spin
    amplifier = scale * env.t_amplifier
    phase = gain * phase_noise_psd(env, cav, drive, solution.r, offset_hz, constants)

    return NoiseBudget(
        thermal_port=thermal_port,
        thermal_cavity=thermal_cavity,
        thermal_spin=thermal_spin,
        phase=phase,
        amplifier=amplifier,
        total=thermal_port + thermal_cavity + thermal_spin + phase + amplifier,
        channel_fractions=fractions,
        t_spin=t_spin,
        offset_hz=offset_hz,
    )


def cooling_depth(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    drive: DriveParams,
    env: NoiseEnvironment,
    offset_hz: Optional[float] = None,
    reference: Optional[CoolingReference] = None,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> float:
    """Noise floor suppression by resonant spins (dB, positive = cooler).

    Compares the thermal plus amplifier floor of the resonant readout with a baseline
    at the same drive amplitude: the ensemble detuned by env.detuned_delta_s, or the
    spin-free cavity for CoolingReference.BARE. Source phase noise is not a bath and
    is left out of both floors.

    Args:
        cav: Cavity parameters
        spins: Spin ensemble
        drive: Resonant drive
        env: Noise environment
        offset_hz: Analysis frequency; env.offset_hz when omitted
        reference: Baseline; env.cooling_reference when omitted
    """
    reference = CoolingReference(reference or env.cooling_reference)
    resonant = noise_budget(cav, spins, drive, env, offset_hz=offset_hz, constants=constants)
    if reference == CoolingReference.BARE:
        empty = spins.model_copy(update={"n_spins": 0.0})
        baseline = noise_budget(cav, empty, drive, env, offset_hz=offset_hz, constants=constants)
    else:
        detuned_drive = drive.with_updates(delta_s=env.detuned_delta_s)
        baseline = noise_budget(cav, spins, detuned_drive, env, offset_hz=offset_hz, constants=constants)
    return float(10.0 * np.log10(baseline.floor / resonant.floor))


def phase_noise_crossover(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    env: NoiseEnvironment,
    drive: Optional[DriveParams] = None,
    offset_hz: Optional[float] = None,
    bounds_dbm=(-80.0, 30.0),
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> float:
    """Drive power (dBm) at which phase noise equals the thermal plus amplifier floor.

    Raises:
        NumericalError: If the two do not cross inside the bounds
    """
    drive = drive or DriveParams()

    def log_ratio(power_dbm):
        step = drive_from_dbm(cav, power_dbm, drive.delta, drive.delta_s, constants)
        budget = noise_budget(cav, spins, step, env, offset_hz=offset_hz, constants=constants)
        return np.log10(max(budget.phase, 1e-300) / (budget.thermal + budget.amplifier))

    lo, hi = bounds_dbm
    f_lo, f_hi = log_ratio(lo), log_ratio(hi)
    if f_lo * f_hi > 0:
        raise NumericalError(
            "Phase noise does not cross the thermal floor inside the bounds",
            diagnostics={"bounds_dbm": bounds_dbm, "log_ratio_low": f_lo, "log_ratio_high": f_hi},
        )
    return float(brentq(log_ratio, lo, hi, xtol=1e-6))
