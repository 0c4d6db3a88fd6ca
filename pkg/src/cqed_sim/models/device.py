"""Physical parameter models for the cavity, spin ensemble and microwave drive.

All rates and frequencies are angular (rad/s). Conversion from ordinary Hz happens
once, in the configuration layer (see ``cqed_sim.config``).
"""

import logging
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import constants as sc

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


class LineShape(str, Enum):
    """Inhomogeneous lineshape of each hyperfine sub-ensemble."""

    LORENTZIAN = "lorentzian"
    GAUSSIAN = "gaussian"


class PhysicalConstants(BaseModel):
    """Physical constants shared by every module (SI units)."""

    model_config = ConfigDict(frozen=True)

    hbar: float = Field(default=sc.hbar, gt=0, description="Reduced Planck constant (J·s)")
    h: float = Field(default=sc.h, gt=0, description="Planck constant (J·s)")
    k_B: float = Field(default=sc.k, gt=0, description="Boltzmann constant (J/K)")
    mu_B: float = Field(
        default=sc.physical_constants["Bohr magneton"][0],
        gt=0,
        description="Bohr magneton (J/T)",
    )
    mu_0: float = Field(default=sc.mu_0, gt=0, description="Vacuum permeability (T·m/A)")
    g_e: float = Field(default=2.003, gt=0, description="NV electron g-factor")
    gamma_e: float = Field(
        default=28.0e9, gt=0, description="Electron gyromagnetic ratio (Hz/T)"
    )

    @model_validator(mode="after")
    def check_gyromagnetic_ratio(self) -> "PhysicalConstants":
        """gamma_e must agree with g_e·mu_B/h within 0.2%."""
        expected = self.g_e * self.mu_B / self.h
        if abs(self.gamma_e - expected) > 2e-3 * expected:
            raise ValueError(
                f"gamma_e={self.gamma_e:.6g} Hz/T inconsistent with "
                f"g_e*mu_B/h={expected:.6g} Hz/T"
            )
        return self


DEFAULT_CONSTANTS = PhysicalConstants()


class CavityParams(BaseModel):
    """Single-mode microwave cavity read out in reflection through one port."""

    model_config = ConfigDict(frozen=True)

    omega_c: float = Field(..., gt=0, description="Cavity resonance (rad/s)")
    kappa_c: float = Field(..., ge=0, description="Intrinsic loss rate (rad/s)")
    kappa_c1: float = Field(..., ge=0, description="Port coupling rate (rad/s)")
    mode_volume: float = Field(..., gt=0, description="Mode volume V (m³)")

    @model_validator(mode="after")
    def check_total_loss(self) -> "CavityParams":
        if self.kappa_c + self.kappa_c1 <= 0:
            raise ValueError("kappa = kappa_c + kappa_c1 must be positive")
        return self

    @property
    def kappa(self) -> float:
        """Loaded relaxation rate κ = κ_c + κ_c1."""
        return self.kappa_c + self.kappa_c1

    @property
    def q_unloaded(self) -> float:
        """Unloaded quality factor ω_c/κ_c."""
        return self.omega_c / self.kappa_c if self.kappa_c > 0 else float("inf")


class SpinEnsembleParams(BaseModel):
    """Inhomogeneously broadened NV ensemble split into hyperfine sub-ensembles.

    ``n_spins`` counts the spins of one sub-ensemble; each sub-ensemble couples with
    the collective strength ``g = g_s·√N``.
    """

    model_config = ConfigDict(frozen=True)

    g_s: float = Field(..., ge=0, description="Single-spin coupling (rad/s)")
    n_spins: float = Field(..., ge=0, description="Spins per sub-ensemble")
    gamma_inh: float = Field(..., gt=0, description="Inhomogeneous FWHM Γ (rad/s)")
    gamma_0: float = Field(..., ge=0, description="Thermalization rate γ_0 (rad/s)")
    gamma_p: float = Field(..., ge=0, description="Optical polarization rate γ_p (rad/s)")
    a_zz: float = Field(default=TWO_PI * 2.1e6, ge=0, description="Hyperfine splitting (rad/s)")
    n_hyperfine: int = Field(default=3, ge=1, description="Number of sub-ensembles")
    lineshape: LineShape = Field(
        default=LineShape.LORENTZIAN, description="Sub-ensemble lineshape"
    )

    @model_validator(mode="after")
    def check_rates(self) -> "SpinEnsembleParams":
        if self.gamma_0 + self.gamma_p <= 0:
            raise ValueError("gamma = gamma_0 + gamma_p must be positive")
        if self.gamma_p > 0 and self.gamma_0 >= self.gamma_p / 10:
            logger.warning(
                f"Thermalization rate is not small against polarization rate "
                f"(gamma_0/gamma_p = {self.gamma_0 / self.gamma_p:.3f})",
                extra={"gamma_0": self.gamma_0, "gamma_p": self.gamma_p},
            )
        return self

    @property
    def g(self) -> float:
        """Collective coupling g = g_s·√N of one sub-ensemble."""
        return self.g_s * float(np.sqrt(self.n_spins))

    @property
    def gamma(self) -> float:
        """Homogeneous spin relaxation rate γ = γ_0 + γ_p."""
        return self.gamma_0 + self.gamma_p

    @property
    def line_offsets(self) -> np.ndarray:
        """Sub-ensemble centers relative to ω_s (rad/s), e.g. (−A_zz, 0, +A_zz)."""
        k = np.arange(self.n_hyperfine) - (self.n_hyperfine - 1) / 2.0
        return k * self.a_zz

    def with_updates(self, **changes) -> "SpinEnsembleParams":
        """Copy with validated changes (model_copy skips validation)."""
        return SpinEnsembleParams(**{**self.model_dump(), **changes})


class DriveParams(BaseModel):
    """Microwave drive and spin tuning, both referenced to the cavity resonance.

    The spin center frequency is ω_s = ω_c + Δ_s, so detuning the ensemble (bias field)
    is a drive-side setting that can be swept without rebuilding the ensemble.
    """

    model_config = ConfigDict(frozen=True)

    delta: float = Field(default=0.0, description="Drive–cavity detuning Δ = ω_d − ω_c (rad/s)")
    delta_s: float = Field(default=0.0, description="Spin–cavity detuning Δ_s = ω_s − ω_c (rad/s)")
    beta_in: float = Field(
        default=0.0, ge=0, description="Input amplitude, real positive (√(photons/s))"
    )

    def omega_d(self, cav: CavityParams) -> float:
        """Drive frequency ω_d = ω_c + Δ (rad/s)."""
        return cav.omega_c + self.delta

    def omega_s(self, cav: CavityParams) -> float:
        """Spin center frequency ω_s = ω_c + Δ_s (rad/s)."""
        return cav.omega_c + self.delta_s

    @property
    def is_resonant(self) -> bool:
        return self.delta == 0.0 and self.delta_s == 0.0

    def with_updates(self, **changes) -> "DriveParams":
        return DriveParams(**{**self.model_dump(), **changes})


class DeviceModel(BaseModel):
    """Cavity and spin ensemble of one device."""

    model_config = ConfigDict(frozen=True)

    cavity: CavityParams
    spins: SpinEnsembleParams
