"""Unit conversions between microwave power, photon flux and frequency units."""

import numpy as np

from cqed_sim.exceptions import ConfigValidationError
from cqed_sim.models.device import (
    DEFAULT_CONSTANTS,
    TWO_PI,
    CavityParams,
    DriveParams,
    PhysicalConstants,
)


def dbm_to_watts(p_dbm):
    """Convert power in dBm to watts: 1e−3·10^(P/10).

    Example:
        >>> dbm_to_watts(0.0)
        0.001
    """
    return 1e-3 * np.power(10.0, np.asarray(p_dbm, dtype=float) / 10.0)


def watts_to_dbm(p_w):
    """Convert power in watts to dBm."""
    return 10.0 * np.log10(np.asarray(p_w, dtype=float) / 1e-3)


def power_to_flux(
    p_w: float, omega: float, constants: PhysicalConstants = DEFAULT_CONSTANTS
) -> float:
    """Photon flux |β_in|² = P/(ħω) in photons/s.

    Raises:
        ConfigValidationError: If omega is not positive or P is negative
    """
    if omega <= 0:
        raise ConfigValidationError(f"omega must be positive, got {omega}", key="omega")
    if p_w < 0:
        raise ConfigValidationError(f"power must be non-negative, got {p_w}", key="power")
    return float(p_w) / (constants.hbar * omega)


def flux_to_power(
    flux: float, omega: float, constants: PhysicalConstants = DEFAULT_CONSTANTS
) -> float:
    """Inverse of power_to_flux: P = ħω|β_in|² in watts."""
    if omega <= 0:
        raise ConfigValidationError(f"omega must be positive, got {omega}", key="omega")
    return float(flux) * constants.hbar * omega


def hz_to_rad(f_hz):
    """Ordinary frequency (Hz) to angular frequency (rad/s)."""
    return TWO_PI * f_hz


def rad_to_hz(omega):
    """Angular frequency (rad/s) to ordinary frequency (Hz)."""
    return omega / TWO_PI


def drive_from_dbm(
    cav: CavityParams,
    power_dbm: float,
    delta: float = 0.0,
    delta_s: float = 0.0,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> DriveParams:
    """Build DriveParams from an input power in dBm at ω_d = ω_c + Δ."""
    flux = power_to_flux(float(dbm_to_watts(power_dbm)), cav.omega_c + delta, constants)
    return DriveParams(delta=delta, delta_s=delta_s, beta_in=float(np.sqrt(flux)))


def drive_power_w(
    cav: CavityParams,
    drive: DriveParams,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> float:
    """Input power ħω_d|β_in|² of a drive, in watts."""
    return flux_to_power(drive.beta_in**2, drive.omega_d(cav), constants)
