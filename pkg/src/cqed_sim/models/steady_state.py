"""Steady-state solution models for the saturable spin–cavity system."""

from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class SolverMethod(str, Enum):
    """How the saturable spin self-energy is evaluated.

    - exact: closed-form integral of the Bloch steady state over a Lorentzian line
    - effective: first-order model with χ-corrected g_eff and Γ_1 (exact at resonance)
    - bins: binned quadrature over an explicit discretization of the line
    """

    EXACT = "exact"
    EFFECTIVE = "effective"
    BINS = "bins"


class Branch(str, Enum):
    """Branch label of a steady-state root."""

    LOWER = "lower"
    MIDDLE_UNSTABLE = "middle-unstable"
    UPPER = "upper"


class SweepDirection(str, Enum):
    """Power-sweep history used to pick a branch among coexisting stable roots."""

    UP = "up"
    DOWN = "down"


class SteadyStateSolution(BaseModel):
    """One steady-state root of the driven system."""

    model_config = ConfigDict(frozen=True)

    alpha_sq: float = Field(..., ge=0, description="Cavity occupancy |α|² (photons)")
    alpha: complex = Field(..., description="Cavity field α (√photons)")
    chi: float = Field(..., ge=1, description="Depolarization factor χ")
    gamma_1: float = Field(..., description="Effective spin linewidth Γ_1 = Γ + γχ (rad/s)")
    g_eff: float = Field(..., description="Effective coupling g/√χ (rad/s)")
    c_alpha: float = Field(..., ge=0, description="Effective cooperativity 4g_eff²/(κΓ_1)")
    branch: Branch = Field(..., description="Branch label")
    stable: bool = Field(..., description="False on the negative-slope middle branch")
    r: complex = Field(..., description="Reflection coefficient at this root")


class SpinBinState(BaseModel):
    """Steady state of one frequency bin of the ensemble."""

    model_config = ConfigDict(frozen=True)

    detuning: float = Field(..., description="Δ_j = ω_d − ω_j (rad/s)")
    weight: float = Field(..., ge=0, description="Fraction of one sub-ensemble in the bin")
    s: complex = Field(..., description="Spin coherence s_j")
    p: float = Field(..., description="Excited-state population p_j")

    @property
    def w(self) -> float:
        """Inversion w_j = 1 − 2p_j."""
        return 1.0 - 2.0 * self.p


class SaturationThreshold(BaseModel):
    """Saturation onset input flux and power."""

    model_config = ConfigDict(frozen=True)

    beta_s_sq: float = Field(..., description="|β_s|² (photons/s)")
    power_w: float = Field(..., description="P_s = ħω|β_s|² (W)")
    power_dbm: float = Field(..., description="P_s (dBm)")


class BistabilityReport(BaseModel):
    """Root-count scan over a monotone power grid."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    powers_dbm: np.ndarray = Field(..., description="Scanned powers (dBm)")
    stable_roots: np.ndarray = Field(..., description="Number of stable roots per power")
    bistable_powers_dbm: List[float] = Field(
        default_factory=list, description="Powers with more than one stable root"
    )
    interval_dbm: Optional[Tuple[float, float]] = Field(
        default=None, description="Lowest and highest bistable power"
    )
    lower_branch_alpha_sq: np.ndarray = Field(..., description="Lowest stable root per power")
    upper_branch_alpha_sq: np.ndarray = Field(..., description="Highest stable root per power")
    predicate: float = Field(
        ..., description="(4g²/κγ)(γ/(Γ+γ))², compared against 1"
    )

    @property
    def is_bistable(self) -> bool:
        return bool(self.bistable_powers_dbm)
