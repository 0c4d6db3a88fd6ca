"""Operating-point and field-conversion models for magnetometry."""

from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from cqed_sim.models.device import DEFAULT_CONSTANTS, PhysicalConstants
from cqed_sim.physics.units import dbm_to_watts


class FieldConversion(BaseModel):
    """Spin-frequency shift per unit magnetic field along the diamond [100] axis.

    The NV axes make equal angles with [100], so A = γ_e/√3.
    """

    model_config = ConfigDict(frozen=True)

    a_hz: float = Field(..., gt=0, description="Conversion A (Hz/T)")

    @classmethod
    def from_constants(cls, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> "FieldConversion":
        return cls(a_hz=constants.gamma_e / np.sqrt(3.0))


DEFAULT_CONVERSION = FieldConversion.from_constants()


class OperatingPoint(BaseModel):
    """Resonant readout operating point.

    Signal and noise are both referred to the output plane (after the chain gain),
    so η does not depend on the gain.
    """

    model_config = ConfigDict(frozen=True)

    power_dbm: float = Field(..., description="Microwave input power (dBm)")
    gamma_p: float = Field(..., gt=0, description="Optical polarization rate (rad/s)")
    delta: float = Field(default=0.0, description="Drive detuning (rad/s)")
    delta_s: float = Field(default=0.0, description="Spin detuning (rad/s)")
    signal: float = Field(..., ge=0, description="S at the output plane (V/Hz)")
    noise: float = Field(..., gt=0, description="L at the output plane (V²/Hz)")
    eta: float = Field(..., description="Sensitivity (T/√Hz); inf when S = 0")
    gain: float = Field(default=1.0, gt=0, description="Linear chain power gain")
    chi: float = Field(default=1.0, ge=1, description="Depolarization factor")
    c_alpha: float = Field(default=0.0, ge=0, description="Effective cooperativity")
    cooling_db: Optional[float] = Field(default=None, description="Spin cooling depth (dB)")
    bistable: bool = Field(default=False, description="Several stable roots coexist")
    on_boundary: bool = Field(default=False, description="Optimum on a search boundary")

    @property
    def power_w(self) -> float:
        return float(dbm_to_watts(self.power_dbm))

    @property
    def signal_device(self) -> float:
        """S at the device plane (V/Hz)."""
        return self.signal / np.sqrt(self.gain)

    @property
    def noise_device(self) -> float:
        """L at the device plane (V²/Hz)."""
        return self.noise / self.gain

    @property
    def eta_ft(self) -> float:
        return self.eta * 1e15


class BroadbandSpectrum(BaseModel):
    """Sensitivity versus magnetic-field frequency."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    f_hz: np.ndarray = Field(..., description="Field frequencies (Hz)")
    eta: np.ndarray = Field(..., description="Total sensitivity (T/√Hz)")
    eta_instrument: np.ndarray = Field(..., description="Readout-noise sensitivity (T/√Hz)")
    ambient: np.ndarray = Field(..., description="Ambient field noise (T/√Hz)")
