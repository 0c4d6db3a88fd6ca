"""Noise environment and noise budget models."""

import logging
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from cqed_sim.models.device import TWO_PI

logger = logging.getLogger(__name__)

# Calibrated system temperature of the detuned baseline (K)
SYSTEM_TEMPERATURE = 407.0
DEFAULT_NOISE_FIGURE_DB = 0.8

# Residual source phase noise after carrier suppression (offset Hz, dBc/Hz)
DEFAULT_PHASE_NOISE: List[Tuple[float, float]] = [
    (10.0, -110.0),
    (100.0, -130.0),
    (1e3, -150.0),
    (1e4, -170.0),
    (1e5, -170.0),
]

# Empirical ambient magnetic noise (Hz, T/√Hz)
DEFAULT_AMBIENT_FIELD: List[Tuple[float, float]] = [
    (1.0, 20e-12),
    (15.0, 2e-12),
    (100.0, 0.5e-12),
    (1e3, 0.05e-12),
]


class CoolingReference(str, Enum):
    """Baseline the spin cooling depth is measured against."""

    DETUNED = "detuned"  # ensemble detuned by detuned_delta_s
    BARE = "bare"  # spin-free cavity


def amplifier_temperature(noise_figure_db: float) -> float:
    """Input-referred added noise temperature 290·(10^(NF/10) − 1) in K."""
    return 290.0 * (10.0 ** (noise_figure_db / 10.0) - 1.0)


def _check_points(points: List[Tuple[float, float]], name: str) -> List[Tuple[float, float]]:
    offsets = [p[0] for p in points]
    if any(f <= 0 for f in offsets):
        raise ValueError(f"{name} frequencies must be positive")
    if any(b <= a for a, b in zip(offsets, offsets[1:])):
        raise ValueError(f"{name} frequencies must be strictly increasing")
    return points


class NoiseEnvironment(BaseModel):
    """Bath temperatures, detection chain and source noise of one setup.

    ``t_port`` and ``t_cavity`` default to the system temperature minus the amplifier
    contribution, so the detuned baseline reproduces the calibrated 407 K floor.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    t_port: float = Field(default=None, gt=0, description="Port bath temperature (K)")
    t_cavity: float = Field(default=None, gt=0, description="Cavity wall temperature (K)")
    t_ambient: float = Field(default=300.0, gt=0, description="Ambient temperature (K)")
    t_spin: Optional[float] = Field(
        default=None, ge=0, description="Fixed spin bath temperature (K); modeled when None"
    )
    amp_noise_figure_db: float = Field(
        default=DEFAULT_NOISE_FIGURE_DB, ge=0, description="Amplifier noise figure (dB)"
    )
    power_gain_db: float = Field(default=36.5, description="Detection chain power gain (dB)")
    resistance: float = Field(default=50.0, gt=0, description="Termination resistance (Ω)")
    phase_noise: List[Tuple[float, float]] = Field(
        default_factory=lambda: list(DEFAULT_PHASE_NOISE),
        min_length=1,
        description="Source phase noise (offset Hz, dBc/Hz)",
    )
    phase_noise_enabled: bool = Field(default=True, description="Include source phase noise")
    ambient_field: List[Tuple[float, float]] = Field(
        default_factory=lambda: list(DEFAULT_AMBIENT_FIELD),
        description="Ambient magnetic noise (Hz, T/√Hz)",
    )
    ambient_field_enabled: bool = Field(default=True, description="Include ambient field noise")
    offset_hz: float = Field(default=15e3, gt=0, description="Analysis frequency (Hz)")
    detuned_delta_s: float = Field(
        default=TWO_PI * 5e6, description="Spin detuning of the cooling reference (rad/s)"
    )
    cooling_reference: CoolingReference = Field(
        default=CoolingReference.DETUNED, description="Baseline of the cooling depth"
    )

    @model_validator(mode="before")
    @classmethod
    def fill_bath_temperatures(cls, data):
        if not isinstance(data, dict):
            return data
        nf = data.get("amp_noise_figure_db", DEFAULT_NOISE_FIGURE_DB)
        baseline = SYSTEM_TEMPERATURE - amplifier_temperature(nf)
        data = dict(data)
        for key in ("t_port", "t_cavity"):
            if data.get(key) is None:
                data[key] = baseline
        return data

    @field_validator("phase_noise")
    @classmethod
    def check_phase_noise(cls, v):
        return _check_points(v, "phase_noise")

    @field_validator("ambient_field")
    @classmethod
    def check_ambient_field(cls, v):
        _check_points(v, "ambient_field")
        if any(b < 0 for _, b in v):
            raise ValueError("ambient field noise must be non-negative")
        return v

    @property
    def gain(self) -> float:
        """Linear power gain."""
        return 10.0 ** (self.power_gain_db / 10.0)

    @property
    def t_amplifier(self) -> float:
        return amplifier_temperature(self.amp_noise_figure_db)

    def with_updates(self, **changes) -> "NoiseEnvironment":
        return NoiseEnvironment(**{**self.model_dump(), **changes})


class ChannelFractions(BaseModel):
    """Fractions of the output noise originating in each bath."""

    model_config = ConfigDict(frozen=True)

    port: float = Field(..., ge=0)
    cavity: float = Field(..., ge=0)
    spin: float = Field(..., description="Negative only for an inverted ensemble")

    @property
    def total(self) -> float:
        return self.port + self.cavity + self.spin


class NoiseBudget(BaseModel):
    """Output voltage noise components at one analysis frequency (V²/Hz, single-sided)."""

    model_config = ConfigDict(frozen=True)

    thermal_port: float
    thermal_cavity: float
    thermal_spin: float
    phase: float
    amplifier: float
    total: float
    channel_fractions: ChannelFractions
    t_spin: float = Field(..., description="Spin bath temperature used (K)")
    offset_hz: float
    two_sided: bool = False

    @model_validator(mode="after")
    def check_total(self) -> "NoiseBudget":
        parts = self.thermal_port + self.thermal_cavity + self.thermal_spin + self.phase + self.amplifier
        if not np.isclose(parts, self.total, rtol=1e-12, atol=0.0):
            raise ValueError(f"total {self.total:.6g} differs from component sum {parts:.6g}")
        return self

    @property
    def thermal(self) -> float:
        return self.thermal_port + self.thermal_cavity + self.thermal_spin

    @property
    def floor(self) -> float:
        """Thermal plus amplifier noise, the part spin refrigeration acts on."""
        return self.thermal + self.amplifier

    def as_two_sided(self) -> "NoiseBudget":
        """Same budget expressed as a double-sided PSD."""
        if self.two_sided:
            return self
        halved = {
            k: getattr(self, k) / 2.0
            for k in ("thermal_port", "thermal_cavity", "thermal_spin", "phase", "amplifier", "total")
        }
        return self.model_copy(update={**halved, "two_sided": True})
