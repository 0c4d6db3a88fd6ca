"""Models for synthesized detector traces and test-field calibration."""

from enum import Enum
from typing import Dict, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

DEFAULT_SAMPLE_RATE = 200e3
DEFAULT_SEGMENT_LENGTH = 8192


class CoilSpec(BaseModel):
    """Single circular calibration coil on the sensor axis."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    turns: int = Field(default=400, gt=0)
    radius_m: float = Field(default=0.07, gt=0)
    distance_m: float = Field(default=0.22, ge=0, description="Coil plane to sensor (m)")
    current_a: float = Field(default=0.043, gt=0)


class TimeTrace(BaseModel):
    """Uniformly sampled quadrature voltage."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    fs: float = Field(default=DEFAULT_SAMPLE_RATE, gt=0, description="Sample rate (Hz)")
    samples: np.ndarray = Field(..., description="Voltage samples (V)")

    @field_validator("samples")
    @classmethod
    def check_samples(cls, v):
        v = np.asarray(v, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(v)):
            raise ValueError("samples must be finite")
        return v

    @property
    def duration(self) -> float:
        return self.samples.size / self.fs

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.fs


class WaveformKind(str, Enum):
    SINE = "sine"
    STEP = "step"
    ZERO = "zero"


class FieldWaveform(BaseModel):
    """Applied test field B(t) along the diamond [100] axis."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: WaveformKind = WaveformKind.SINE
    amplitude_t: float = Field(default=0.0, ge=0, description="Amplitude (T)")
    frequency_hz: Optional[float] = Field(default=None, gt=0)
    t_on_s: float = Field(default=0.0, ge=0, description="Step onset (s)")

    @model_validator(mode="after")
    def check_kind(self) -> "FieldWaveform":
        if self.kind == WaveformKind.SINE and self.frequency_hz is None:
            raise ValueError("sine waveform requires frequency_hz")
        return self

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        """B(t) in tesla."""
        if self.kind == WaveformKind.SINE:
            return self.amplitude_t * np.sin(2.0 * np.pi * self.frequency_hz * t)
        if self.kind == WaveformKind.STEP:
            return np.where(t >= self.t_on_s, self.amplitude_t, 0.0)
        return np.zeros_like(t, dtype=float)


class MeasurementScenario(BaseModel):
    """Trace synthesis and recovery settings of one `measure` run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    waveform: FieldWaveform = Field(default_factory=lambda: FieldWaveform(frequency_hz=10.0))
    duration_s: float = Field(default=60.0, gt=0)
    fs_hz: float = Field(default=DEFAULT_SAMPLE_RATE, gt=0)
    seed: int = Field(default=0, ge=0)
    segment_len: Optional[int] = Field(default=None, gt=1, description="Welch segment length")
    coil: Optional[CoilSpec] = Field(default=None, description="Derive the amplitude from a coil")
    references_t: Dict[str, float] = Field(
        default_factory=dict, description="Independent field values to compare against (T)"
    )
    linear_range_t: Optional[float] = Field(
        default=None, gt=0, description="Largest field treated as a linear response (T)"
    )


class PsdEstimate(BaseModel):
    """Single-sided Welch power spectral density."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    f_hz: np.ndarray
    psd: np.ndarray = Field(..., description="V²/Hz")
    segment_len: int
    n_segments: int

    @property
    def df(self) -> float:
        return float(self.f_hz[1] - self.f_hz[0]) if self.f_hz.size > 1 else 0.0

    def rows(self):
        return [{"f_hz": f, "psd_v2hz": p} for f, p in zip(self.f_hz.tolist(), self.psd.tolist())]


class FieldRecovery(BaseModel):
    """Field amplitude estimated from a trace."""

    model_config = ConfigDict(frozen=True)

    amplitude_t: float = Field(..., description="Recovered field (T)")
    frequency_hz: Optional[float] = Field(default=None, description="Peak frequency (Hz)")
    snr: float = Field(..., description="Signal power over noise power in the estimate")
    low_snr: bool = False
    noise_amplitude_t: float = Field(..., ge=0, description="Noise-equivalent amplitude (T)")
    floor_t_sqrthz: Optional[float] = Field(default=None, description="Noise floor (T/√Hz)")
    reference_errors: Dict[str, float] = Field(
        default_factory=dict, description="|B − B_ref|/B_ref per reference"
    )
