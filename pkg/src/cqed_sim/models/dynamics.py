"""Models for the time-domain mean-field dynamics."""

from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from cqed_sim.models.steady_state import SpinBinState


class SpinBins(BaseModel):
    """Discretization of one sub-ensemble line into frequency bins.

    ``offsets`` are relative to the line center; every hyperfine line reuses the same
    bins shifted by its own offset.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    offsets: np.ndarray = Field(..., description="Bin detunings from the line center (rad/s)")
    weights: np.ndarray = Field(..., description="Probability mass per bin")

    @model_validator(mode="after")
    def check_weights(self) -> "SpinBins":
        if self.offsets.shape != self.weights.shape or self.offsets.ndim != 1:
            raise ValueError("offsets and weights must be 1-D arrays of equal length")
        if np.any(self.weights < 0):
            raise ValueError("bin weights must be non-negative")
        if abs(float(np.sum(self.weights)) - 1.0) > 1e-12:
            raise ValueError(f"bin weights sum to {np.sum(self.weights):.15g}, expected 1")
        return self

    @property
    def size(self) -> int:
        return int(self.offsets.size)

    @property
    def first_moment(self) -> float:
        return float(np.sum(self.weights * self.offsets))


class IntegratorConfig(BaseModel):
    """Adaptive integration and steady-state detection settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    rel_tol: float = Field(default=1e-8, gt=0, lt=1, description="Relative tolerance")
    abs_tol: float = Field(default=1e-10, gt=0, lt=1, description="Absolute tolerance")
    max_step: Optional[float] = Field(default=None, gt=0, description="Largest step (s)")
    steady_state_tol: Optional[float] = Field(
        default=1e-10,
        gt=0,
        lt=1,
        description="Relative change of |α|² and mean inversion per 10/κ window; None disables",
    )
    n_bins: int = Field(default=201, ge=1, description="Bins per sub-ensemble")
    n_samples: int = Field(default=400, ge=2, description="Trajectory samples returned")
    max_steps: int = Field(default=10_000_000, ge=1, description="Accepted-step cap")


class EnsembleState(BaseModel):
    """Instantaneous cavity field and binned spin state.

    ``s`` and ``p`` have shape (n_hyperfine, n_bins).
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    t: float = Field(default=0.0, description="Time (s)")
    alpha: complex = Field(default=0j, description="Cavity field α")
    s: np.ndarray = Field(..., description="Spin coherences s_j")
    p: np.ndarray = Field(..., description="Excited-state populations p_j")

    @model_validator(mode="after")
    def check_shapes(self) -> "EnsembleState":
        if self.s.shape != self.p.shape or self.s.ndim != 2:
            raise ValueError("s and p must be 2-D arrays of equal shape")
        if np.any(self.p < 0) or np.any(self.p > 1):
            raise ValueError("populations must lie in [0, 1]")
        return self

    @classmethod
    def polarized(cls, n_lines: int, n_bins: int) -> "EnsembleState":
        """Empty cavity, every spin in the ground state."""
        return cls(
            s=np.zeros((n_lines, n_bins), dtype=complex),
            p=np.zeros((n_lines, n_bins)),
        )

    @property
    def alpha_sq(self) -> float:
        return abs(self.alpha) ** 2

    def mean_inversion(self, bins: SpinBins) -> float:
        """Weight-averaged inversion 1 − 2p over all lines."""
        return float(np.mean(np.sum(bins.weights * (1.0 - 2.0 * self.p), axis=-1)))

    def bin_states(self, bins: SpinBins, line_offsets: np.ndarray, delta0: float) -> List[SpinBinState]:
        """Per-bin view; ``delta0`` is ω_d − ω_s (rad/s)."""
        states = []
        for k, off in enumerate(line_offsets):
            for j in range(bins.size):
                states.append(
                    SpinBinState(
                        detuning=float(delta0 - off - bins.offsets[j]),
                        weight=float(bins.weights[j]),
                        s=complex(self.s[k, j]),
                        p=float(self.p[k, j]),
                    )
                )
        return states


class Trajectory(BaseModel):
    """Sampled trajectory plus the final state of one integration."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    t: np.ndarray = Field(..., description="Sample times (s)")
    alpha: np.ndarray = Field(..., description="Cavity field samples")
    mean_inversion: np.ndarray = Field(..., description="Mean inversion samples")
    final_state: EnsembleState
    steady: bool = Field(default=False, description="Steady-state criterion met")
    steps: int = Field(default=0, description="Accepted integrator steps")

    @property
    def alpha_sq(self) -> np.ndarray:
        return np.abs(self.alpha) ** 2


class HysteresisTrace(BaseModel):
    """|α|² along a power sweep, in sweep order."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    powers_dbm: np.ndarray = Field(..., description="Swept powers (dBm), up then down")
    alpha_sq: np.ndarray = Field(..., description="Final |α|² at each power")
    turning_index: int = Field(..., description="Index of the highest power")

    @property
    def up(self) -> np.ndarray:
        return self.alpha_sq[: self.turning_index + 1]

    @property
    def down(self) -> np.ndarray:
        return self.alpha_sq[self.turning_index :]
