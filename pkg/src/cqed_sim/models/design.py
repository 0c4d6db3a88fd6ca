"""Design-space models: diamond and cavity descriptions and sensitivity maps."""

from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from cqed_sim.models.device import TWO_PI

# Reference device used to calibrate the single-spin coupling
REFERENCE_G = TWO_PI * 190e3
REFERENCE_RHO_PPM = 4.0
REFERENCE_VD_CM3 = 3.0 * 3.0 * 0.9 * 1e-3
REFERENCE_MODE_VOLUME_CM3 = 1.7

CARBON_DENSITY_CM3 = 1.76e23
ORIENTATION_FRACTION = 1.0 / 4.0
HYPERFINE_FRACTION = 1.0 / 3.0
LINEWIDTH_PER_PPM = TWO_PI * 82.5e3

# Optical polarization limit ρ·V_d (cm³·ppm) at the reference aspect ratio
POLARIZATION_LIMIT = 0.49
REFERENCE_ASPECT_RATIO = 2.2
DEFAULT_GAMMA_P_CAP = TWO_PI * 30e3


class DiamondDesign(BaseModel):
    """Diamond sample placed in the cavity."""

    model_config = ConfigDict(frozen=True)

    rho_ppm: float = Field(..., gt=0, description="NV density (ppm)")
    vd_cm3: float = Field(..., gt=0, description="Diamond volume (cm³)")
    aspect_ratio: float = Field(default=REFERENCE_ASPECT_RATIO, gt=0)
    mode_volume_cm3: float = Field(default=REFERENCE_MODE_VOLUME_CM3, gt=0)

    @model_validator(mode="after")
    def check_fill(self) -> "DiamondDesign":
        if self.vd_cm3 > self.mode_volume_cm3 * (1 + 1e-12):
            raise ValueError(
                f"diamond volume {self.vd_cm3} cm3 exceeds mode volume {self.mode_volume_cm3} cm3"
            )
        return self

    @property
    def fill(self) -> float:
        return self.vd_cm3 / self.mode_volume_cm3


class CavityDesign(BaseModel):
    """Cavity described by unloaded Q, mode volume and single-spin coupling."""

    model_config = ConfigDict(frozen=True)

    q: float = Field(..., gt=0, description="Unloaded quality factor")
    mode_volume_cm3: float = Field(..., gt=0, description="Mode volume (cm³)")
    g_s: float = Field(..., gt=0, description="Single-spin coupling (rad/s)")
    coupling_ratio: float = Field(default=125.0 / 130.0, gt=0, description="κ_c1/κ_c")


class DesignCell(BaseModel):
    """Optimized sensitivity of one design point."""

    model_config = ConfigDict(frozen=True)

    x: float = Field(..., description="Column coordinate (ρ in ppm or Q)")
    y: float = Field(..., description="Row coordinate (V_d in cm³ or g_s in Hz)")
    eta: float = Field(..., description="Optimal sensitivity (T/√Hz)")
    feasible: bool = Field(..., description="Polarization constraint satisfied")
    rho_ppm: float = Field(..., description="Density actually evaluated (ppm)")
    vd_cm3: float = Field(..., description="Diamond volume evaluated (cm³)")
    power_dbm: float = Field(..., description="Optimal microwave power (dBm)")
    bistable: bool = Field(default=False, description="Optimum in the bistable regime")


class DesignMap(BaseModel):
    """η over a 2-D design grid; rows follow ``y_grid``, columns ``x_grid``."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    x_name: str
    y_name: str
    x_grid: np.ndarray
    y_grid: np.ndarray
    eta: np.ndarray = Field(..., description="Sensitivity (T/√Hz), shape (ny, nx)")
    feasible: np.ndarray
    bistable: np.ndarray
    cells: List[DesignCell]
    contours: Dict[float, List[np.ndarray]] = Field(
        default_factory=dict, description="η level (T/√Hz) -> polylines in (x, y)"
    )

    def cell(self, i: int, j: int) -> Optional[DesignCell]:
        return self.cells[i * self.x_grid.size + j]
