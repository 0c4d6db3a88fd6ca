"""Signal transduction, magnetic sensitivity and operating-point optimization.

The quadrature signal is the drive voltage times the slope of Im[r] with the spin
frequency,

    S = |√(ħωR)·β_in · ∂Im[r]/∂ω_s| · 2π     (V per Hz of spin shift)

and the sensitivity is η = √L/(S·A) with A the field-to-frequency conversion.
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from cqed_sim.exceptions import ConfigValidationError, UndefinedSensitivityError
from cqed_sim.models.device import (
    DEFAULT_CONSTANTS,
    TWO_PI,
    CavityParams,
    DriveParams,
    PhysicalConstants,
    SpinEnsembleParams,
)
from cqed_sim.models.noise import SYSTEM_TEMPERATURE, NoiseEnvironment
from cqed_sim.models.sensing import (
    DEFAULT_CONVERSION,
    BroadbandSpectrum,
    FieldConversion,
    OperatingPoint,
)
from cqed_sim.models.steady_state import SteadyStateSolution, SweepDirection
from cqed_sim.physics.noise import cooling_depth, noise_budget
from cqed_sim.physics.nonlinear import resonant_occupancy, select_branch, slope_from_solution
from cqed_sim.physics.units import drive_from_dbm
from cqed_sim.utils.parallel import parallel_map

logger = logging.getLogger(__name__)

DEFAULT_GRID = (50, 50)
GOLDEN_TOL = 1e-4


def with_pump_rate(spins: SpinEnsembleParams, gamma_p: float) -> SpinEnsembleParams:
    """Copy of the ensemble at another optical pump rate.

    Skips the model validator so grid searches do not repeat the γ_0/γ_p warning.
    """
    if not gamma_p > 0:
        raise ConfigValidationError(f"gamma_p must be positive, got {gamma_p}", key="gamma_p")
    return spins.model_copy(update={"gamma_p": float(gamma_p)})


def drive_voltage(
    cav: CavityParams,
    drive: DriveParams,
    resistance: float,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> float:
    """Input drive voltage f(β_in) = √(ħωR)·β_in (V)."""
    return float(np.sqrt(constants.hbar * drive.omega_d(cav) * resistance) * drive.beta_in)


def signal_from_solution(
    cav: CavityParams,
    drive: DriveParams,
    solution: SteadyStateSolution,
    resistance: float,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> float:
    """S at the device plane for a known steady state (V/Hz)."""
    return TWO_PI * drive_voltage(cav, drive, resistance, constants) * slope_from_solution(cav, solution)


def signal(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    drive: DriveParams,
    resistance: float,
    direction: Optional[SweepDirection] = None,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> float:
    """Quadrature signal S at the device plane, in volts per Hz of spin shift.

    Raises:
        BranchSelectionError: If the drive is in the bistable range and no
            direction is given
    """
    if drive.beta_in == 0:
        return 0.0
    solution = select_branch(resonant_occupancy(cav, spins, drive.beta_in**2), direction)
    return signal_from_solution(cav, drive, solution, resistance, constants)


def field_to_frequency(b_tesla, conversion: FieldConversion = DEFAULT_CONVERSION):
    """Spin-frequency shift A·B (Hz) of a field along [100]."""
    if np.ndim(b_tesla):
        return conversion.a_hz * np.asarray(b_tesla, dtype=float)
    return conversion.a_hz * float(b_tesla)


def sensitivity_from(
    signal_v_per_hz: float,
    noise_v2_per_hz: float,
    conversion: FieldConversion = DEFAULT_CONVERSION,
) -> float:
    """η = √L/(S·A) in T/√Hz.

    Raises:
        UndefinedSensitivityError: If S is zero
    """
    if signal_v_per_hz <= 0:
        raise UndefinedSensitivityError("sensitivity is undefined for zero signal")
    return float(np.sqrt(noise_v2_per_hz) / (signal_v_per_hz * conversion.a_hz))


def sensitivity_at(
    op: OperatingPoint, conversion: FieldConversion = DEFAULT_CONVERSION
) -> float:
    """η of an operating point; signal and noise share the output plane."""
    return sensitivity_from(op.signal, op.noise, conversion)


def evaluate_operating_point(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    env: NoiseEnvironment,
    power_dbm: float,
    gamma_p: Optional[float] = None,
    direction: SweepDirection = SweepDirection.UP,
    with_cooling: bool = False,
    conversion: FieldConversion = DEFAULT_CONVERSION,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> OperatingPoint:
    """Signal, noise and η of the resonant readout at one power and pump rate.

    Uses the first-order steady state of the resonant sub-ensemble.
    """
    if gamma_p is not None:
        spins = with_pump_rate(spins, gamma_p)
    drive = drive_from_dbm(cav, power_dbm, constants=constants)
    roots = resonant_occupancy(cav, spins, drive.beta_in**2)
    solution = select_branch(roots, direction)

    gain = env.gain
    s_out = signal_from_solution(cav, drive, solution, env.resistance, constants) * np.sqrt(gain)
    budget = noise_budget(cav, spins, drive, env, solution=solution, constants=constants)
    eta = sensitivity_from(s_out, budget.total, conversion) if s_out > 0 else float("inf")
    cooling = cooling_depth(cav, spins, drive, env, constants=constants) if with_cooling else None

    return OperatingPoint(
        power_dbm=float(power_dbm),
        gamma_p=spins.gamma_p,
        signal=float(s_out),
        noise=float(budget.total),
        eta=eta,
        gain=gain,
        chi=solution.chi,
        c_alpha=solution.c_alpha,
        cooling_db=cooling,
        bistable=sum(s.stable for s in roots) > 1,
    )


def _golden_refine(func, grid: np.ndarray, index: int) -> float:
    """Golden-section search around an interior grid minimum."""
    bracket = (grid[index - 1], grid[index], grid[index + 1])
    result = minimize_scalar(func, bracket=bracket, method="golden", tol=GOLDEN_TOL)
    x = float(result.x)
    lo, hi = min(bracket[0], bracket[2]), max(bracket[0], bracket[2])
    if not lo <= x <= hi or result.fun > func(grid[index]):
        return float(grid[index])
    return x


def optimize_operating_point(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    env: NoiseEnvironment,
    power_bounds_dbm: Tuple[float, float] = (-50.0, 0.0),
    gamma_p_bounds: Tuple[float, float] = (TWO_PI * 1e3, TWO_PI * 30e3),
    grid: Tuple[int, int] = DEFAULT_GRID,
    threads: Optional[int] = None,
    conversion: FieldConversion = DEFAULT_CONVERSION,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> OperatingPoint:
    """Minimize η over microwave power and optical pump rate.

    A log-spaced grid search is followed by golden-section refinement along each
    axis (power in dBm, γ_p in log). Optima on a search boundary are flagged.

    Args:
        cav: Cavity parameters
        spins: Spin ensemble; its gamma_p is replaced
        env: Noise environment
        power_bounds_dbm: Power range (dBm)
        gamma_p_bounds: Pump-rate range (rad/s); equal bounds fix γ_p
        grid: Grid points along (power, γ_p)
        threads: Worker threads for the grid search

    Returns:
        The optimal operating point, with cooling depth evaluated
    """
    p_lo, p_hi = power_bounds_dbm
    g_lo, g_hi = gamma_p_bounds
    if not (np.isfinite(p_lo) and np.isfinite(p_hi) and p_lo < p_hi):
        raise ConfigValidationError(f"invalid bounds {power_bounds_dbm}", key="power_bounds_dbm")
    if not (0 < g_lo <= g_hi and np.isfinite(g_hi)):
        raise ConfigValidationError(f"invalid bounds {gamma_p_bounds}", key="gamma_p_bounds")

    powers = np.linspace(p_lo, p_hi, grid[0])
    log_gammas = np.linspace(np.log10(g_lo), np.log10(g_hi), grid[1] if g_hi > g_lo else 1)

    def eta_at(power, log_gamma):
        op = evaluate_operating_point(
            cav, spins, env, power, 10.0**log_gamma, conversion=conversion, constants=constants
        )
        return op.eta

    def row(log_gamma):
        return [eta_at(p, log_gamma) for p in powers]

    etas = np.array(parallel_map(row, list(log_gammas), threads=threads, desc="optimize"))
    j, i = np.unravel_index(int(np.argmin(etas)), etas.shape)

    on_boundary = i in (0, powers.size - 1) or (log_gammas.size > 1 and j in (0, log_gammas.size - 1))
    best_power, best_log_gamma = float(powers[i]), float(log_gammas[j])

    if 0 < i < powers.size - 1:
        best_power = _golden_refine(lambda p: eta_at(p, best_log_gamma), powers, i)
    if 0 < j < log_gammas.size - 1:
        best_log_gamma = _golden_refine(lambda lg: eta_at(best_power, lg), log_gammas, j)

    if on_boundary:
        logger.warning(
            f"Optimum on the search boundary (P={best_power:.2f} dBm, "
            f"gamma_p={10**best_log_gamma / TWO_PI:.4g} Hz)",
            extra={"power_dbm": best_power, "gamma_p": 10**best_log_gamma},
        )

    op = evaluate_operating_point(
        cav,
        spins,
        env,
        best_power,
        10.0**best_log_gamma,
        with_cooling=True,
        conversion=conversion,
        constants=constants,
    )
    return op.model_copy(update={"on_boundary": on_boundary})


def ambient_field_noise(env: NoiseEnvironment, f_hz) -> np.ndarray:
    """Empirical ambient field noise (T/√Hz), log-log interpolated.

    Held at the first value below the table and zero above its last frequency.
    """
    f = np.atleast_1d(np.asarray(f_hz, dtype=float))
    if not env.ambient_field_enabled or not env.ambient_field:
        return np.zeros_like(f)
    freqs = np.log10([p[0] for p in env.ambient_field])
    levels = np.log10([max(p[1], 1e-300) for p in env.ambient_field])
    values = 10.0 ** np.interp(np.log10(f), freqs, levels)
    values[f > env.ambient_field[-1][0]] = 0.0
    return values


def broadband_spectrum(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    env: NoiseEnvironment,
    op: OperatingPoint,
    f_grid: Sequence[float],
    conversion: FieldConversion = DEFAULT_CONVERSION,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> BroadbandSpectrum:
    """η(f) at a fixed operating point for field frequencies ``f_grid``.

    Readout noise is re-evaluated at every offset; ambient field noise adds in
    quadrature.
    """
    f = np.asarray(f_grid, dtype=float)
    spins = with_pump_rate(spins, op.gamma_p)
    drive = drive_from_dbm(cav, op.power_dbm, constants=constants)
    solution = select_branch(
        resonant_occupancy(cav, spins, drive.beta_in**2), SweepDirection.UP
    )

    instrument = np.array(
        [
            sensitivity_from(
                op.signal,
                noise_budget(cav, spins, drive, env, solution, offset_hz=fi, constants=constants).total,
                conversion,
            )
            for fi in f
        ]
    )
    ambient = ambient_field_noise(env, f)
    return BroadbandSpectrum(
        f_hz=f,
        eta=np.sqrt(instrument**2 + ambient**2),
        eta_instrument=instrument,
        ambient=ambient,
    )


def reference_sensitivity(
    signal_device: float,
    resistance: float = 50.0,
    temperature: float = SYSTEM_TEMPERATURE,
    conversion: FieldConversion = DEFAULT_CONVERSION,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> float:
    """Noise-equivalent η of a matched resistive termination at ``temperature``."""
    return sensitivity_from(signal_device, constants.k_B * temperature * resistance, conversion)


def room_temperature_limit(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    env: NoiseEnvironment,
    op: OperatingPoint,
    conversion: FieldConversion = DEFAULT_CONVERSION,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> Tuple[float, float]:
    """η_0 with the spin bath at ambient temperature, and (η − η_0)/η_0.

    Returns:
        (eta_0, relative_change); a negative change means spin cooling helps
    """
    warm = env.with_updates(t_spin=env.t_ambient)
    spins = with_pump_rate(spins, op.gamma_p)
    drive = drive_from_dbm(cav, op.power_dbm, constants=constants)
    solution = select_branch(resonant_occupancy(cav, spins, drive.beta_in**2), SweepDirection.UP)
    budget = noise_budget(cav, spins, drive, warm, solution, constants=constants)
    eta_0 = sensitivity_from(op.signal, budget.total, conversion)
    return eta_0, (op.eta - eta_0) / eta_0


def readout_fidelity(
    eta: float,
    spins: SpinEnsembleParams,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> float:
    """Inverse readout fidelity σ_e = η·γ_e·√(N·T2*) with T2* = 2/Γ."""
    t2_star = 2.0 / spins.gamma_inh
    return float(eta * constants.gamma_e * np.sqrt(spins.n_spins * t2_star))
