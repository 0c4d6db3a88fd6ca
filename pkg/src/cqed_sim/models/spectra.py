"""Spectral distribution and reflection result models."""

from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import trapezoid


class DistributionKind(str, Enum):
    """Representation of an inhomogeneous spin-frequency density."""

    LORENTZIAN = "lorentzian"
    GAUSSIAN = "gaussian"
    SAMPLED = "sampled"


class InhomogeneousDistribution(BaseModel):
    """Normalized spin-frequency density P(ω) of one sub-ensemble.

    Analytic kinds are described by ``center`` and ``fwhm``. The sampled kind carries
    the density on an explicit grid; ``tail_mass`` records the probability lying
    outside that grid, so that ∫P dω + tail_mass = 1.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: DistributionKind = Field(..., description="Distribution representation")
    center: float = Field(..., description="Center frequency (rad/s)")
    fwhm: float = Field(..., gt=0, description="Full width at half maximum (rad/s)")
    omega: Optional[np.ndarray] = Field(
        default=None, description="Sample grid for the sampled kind (rad/s)"
    )
    density: Optional[np.ndarray] = Field(
        default=None, description="Density on the sample grid (1/(rad/s))"
    )
    tail_mass: float = Field(
        default=0.0, ge=0, lt=1, description="Probability outside the sample grid"
    )

    @model_validator(mode="after")
    def check_sampled(self) -> "InhomogeneousDistribution":
        if self.kind != DistributionKind.SAMPLED:
            return self
        if self.omega is None or self.density is None:
            raise ValueError("sampled distribution requires omega and density arrays")
        if self.omega.shape != self.density.shape or self.omega.ndim != 1:
            raise ValueError("omega and density must be 1-D arrays of equal length")
        if len(self.omega) < 3 or np.any(np.diff(self.omega) <= 0):
            raise ValueError("omega grid must be strictly increasing with >= 3 points")
        if np.any(self.density < 0):
            raise ValueError("density must be non-negative")
        total = trapezoid(self.density, self.omega) + self.tail_mass
        if abs(total - 1.0) > 1e-9:
            raise ValueError(
                f"sampled distribution is not normalized (integral + tail = {total:.12g})"
            )
        return self

    @classmethod
    def lorentzian(cls, center: float, fwhm: float) -> "InhomogeneousDistribution":
        return cls(kind=DistributionKind.LORENTZIAN, center=center, fwhm=fwhm)

    @classmethod
    def gaussian(cls, center: float, fwhm: float) -> "InhomogeneousDistribution":
        return cls(kind=DistributionKind.GAUSSIAN, center=center, fwhm=fwhm)

    def pdf(self, omega) -> np.ndarray:
        """Evaluate the analytic density (Lorentzian or Gaussian kind)."""
        x = np.asarray(omega, dtype=float) - self.center
        if self.kind == DistributionKind.LORENTZIAN:
            hw = self.fwhm / 2.0
            return (hw / np.pi) / (x**2 + hw**2)
        if self.kind == DistributionKind.GAUSSIAN:
            sigma = self.fwhm / (2.0 * np.sqrt(2.0 * np.log(2.0)))
            return np.exp(-0.5 * (x / sigma) ** 2) / (sigma * np.sqrt(2.0 * np.pi))
        return np.interp(omega, self.omega, self.density, left=0.0, right=0.0)

    def sampled(
        self, n_points: int = 10_001, window: float = 20.0
    ) -> "InhomogeneousDistribution":
        """Sample an analytic density on ±``window`` FWHM around its center.

        The grid is not renormalized: the truncated probability is kept in
        ``tail_mass``.
        """
        if self.kind == DistributionKind.SAMPLED:
            return self
        omega = np.linspace(
            self.center - window * self.fwhm, self.center + window * self.fwhm, n_points
        )
        density = self.pdf(omega)
        tail = max(0.0, 1.0 - float(trapezoid(density, omega)))
        return InhomogeneousDistribution(
            kind=DistributionKind.SAMPLED,
            center=self.center,
            fwhm=self.fwhm,
            omega=omega,
            density=density,
            tail_mass=tail,
        )


class ReflectionPoint(BaseModel):
    """Complex reflection coefficient at one drive/spin tuning."""

    model_config = ConfigDict(frozen=True)

    r: complex = Field(..., description="Reflection coefficient β_out/β_in")
    delta: float = Field(..., description="Drive–cavity detuning (rad/s)")
    delta_s: float = Field(..., description="Spin–cavity detuning (rad/s)")

    @property
    def abs_r2(self) -> float:
        return abs(self.r) ** 2


class ReflectionMap(BaseModel):
    """Reflection coefficient on a (Δ_s, Δ) grid; rows follow Δ_s, columns Δ."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    delta_grid: np.ndarray = Field(..., description="Drive detunings (rad/s)")
    delta_s_grid: np.ndarray = Field(..., description="Spin detunings (rad/s)")
    r: np.ndarray = Field(..., description="Complex r, shape (len(Δ_s), len(Δ))")

    @property
    def abs_r2(self) -> np.ndarray:
        return np.abs(self.r) ** 2

    def rows(self):
        """Iterate (Δ, Δ_s, r) triples in row-major order."""
        for i, ds in enumerate(self.delta_s_grid):
            for j, d in enumerate(self.delta_grid):
                yield float(d), float(ds), complex(self.r[i, j])
