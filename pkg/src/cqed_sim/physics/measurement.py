"""Detector traces: synthesis, Welch spectra and test-field recovery.

The quadrature voltage is S·A·B(t) plus Gaussian noise shaped to the readout PSD
L(f) in the frequency domain.
"""

import logging
from typing import Callable, Dict, Optional, Union

import numpy as np
from scipy.signal import welch

from cqed_sim.exceptions import ConfigValidationError
from cqed_sim.models.device import (
    DEFAULT_CONSTANTS,
    CavityParams,
    PhysicalConstants,
    SpinEnsembleParams,
)
from cqed_sim.models.measurement import (
    DEFAULT_SAMPLE_RATE,
    DEFAULT_SEGMENT_LENGTH,
    CoilSpec,
    FieldRecovery,
    FieldWaveform,
    PsdEstimate,
    TimeTrace,
    WaveformKind,
)
from cqed_sim.models.noise import NoiseEnvironment
from cqed_sim.models.sensing import DEFAULT_CONVERSION, FieldConversion, OperatingPoint
from cqed_sim.models.steady_state import SweepDirection
from cqed_sim.physics.noise import noise_budget
from cqed_sim.physics.nonlinear import resonant_occupancy, select_branch
from cqed_sim.physics.sensitivity import field_to_frequency, with_pump_rate
from cqed_sim.physics.units import drive_from_dbm
from cqed_sim.utils.logging_config import simulation_stage_logger

logger = logging.getLogger(__name__)

PEAK_HALF_WIDTH = 6
FLOOR_HALF_WIDTH = 64
MIN_SNR = 3.0

NoisePsd = Union[float, Callable[[np.ndarray], np.ndarray]]


def coil_field(coil: CoilSpec, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """On-axis loop field 2μ0πr²NI/(4π(d² + r²)^{3/2}) in T."""
    r2 = coil.radius_m**2
    return float(
        2.0 * constants.mu_0 * np.pi * r2 * coil.turns * coil.current_a
        / (4.0 * np.pi * (coil.distance_m**2 + r2) ** 1.5)
    )


def welch_psd(
    trace: TimeTrace,
    segment_len: int = DEFAULT_SEGMENT_LENGTH,
    overlap: float = 0.5,
    window: str = "hann",
) -> PsdEstimate:
    """Single-sided Welch PSD (V²/Hz) with density scaling and no detrending.

    Raises:
        ConfigValidationError: If the segment is longer than the trace or the overlap
            is outside [0, 1)
    """
    n = trace.samples.size
    if segment_len > n:
        raise ConfigValidationError(
            f"segment length {segment_len} exceeds trace length {n}", key="segment_len"
        )
    if not 0 <= overlap < 1:
        raise ConfigValidationError(f"overlap must be in [0, 1), got {overlap}", key="overlap")

    noverlap = int(overlap * segment_len)
    f, psd = welch(
        trace.samples,
        fs=trace.fs,
        window=window,
        nperseg=segment_len,
        noverlap=noverlap,
        detrend=False,
        scaling="density",
        return_onesided=True,
    )
    n_segments = 1 + (n - segment_len) // (segment_len - noverlap)
    return PsdEstimate(f_hz=f, psd=psd, segment_len=segment_len, n_segments=n_segments)


def noise_spectrum(n: int, fs: float, psd: NoisePsd) -> tuple:
    """Half spectrum (rfft frequencies, amplitude shaping √(L·fs/2)) for ``n`` samples."""
    f = np.fft.rfftfreq(n, d=1.0 / fs)
    level = np.broadcast_to(psd(f) if callable(psd) else float(psd), f.shape)
    if np.any(level < 0):
        raise ConfigValidationError("noise PSD must be non-negative", key="psd")
    return f, np.sqrt(level * fs / 2.0)


def shaped_noise(
    n: int, fs: float, psd: NoisePsd, rng: np.random.Generator
) -> np.ndarray:
    """Real Gaussian noise with single-sided PSD ``psd`` (V²/Hz).

    White samples are transformed, scaled bin by bin and transformed back, which
    keeps the spectrum Hermitian.
    """
    _, shaping = noise_spectrum(n, fs, psd)
    white = rng.standard_normal(n)
    return np.fft.irfft(np.fft.rfft(white) * shaping, n)


def readout_noise_profile(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    env: NoiseEnvironment,
    op: OperatingPoint,
    f_min: float = 1.0,
    f_max: float = DEFAULT_SAMPLE_RATE / 2.0,
    points: int = 64,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> Callable[[np.ndarray], np.ndarray]:
    """Output-plane L(f) at an operating point, log-interpolated between ``points`` offsets."""
    spins = with_pump_rate(spins, op.gamma_p)
    drive = drive_from_dbm(cav, op.power_dbm, constants=constants)
    solution = select_branch(resonant_occupancy(cav, spins, drive.beta_in**2), SweepDirection.UP)
    offsets = np.geomspace(f_min, f_max, points)
    levels = np.array(
        [
            noise_budget(cav, spins, drive, env, solution, offset_hz=f, constants=constants).total
            for f in offsets
        ]
    )
    log_f, log_l = np.log10(offsets), np.log10(levels)

    def psd(f):
        f = np.clip(np.asarray(f, dtype=float), f_min, f_max)
        return 10.0 ** np.interp(np.log10(f), log_f, log_l)

    return psd


def synthesize_trace(
    op: OperatingPoint,
    waveform: FieldWaveform,
    fs: float = DEFAULT_SAMPLE_RATE,
    duration: float = 1.0,
    seed: int = 0,
    psd: Optional[NoisePsd] = None,
    linear_range_t: Optional[float] = None,
    conversion: FieldConversion = DEFAULT_CONVERSION,
) -> TimeTrace:
    """Quadrature voltage S·A·B(t) plus readout noise at the output plane.

    Args:
        op: Operating point supplying S and, by default, a flat L
        waveform: Applied field
        fs: Sample rate (Hz)
        duration: Trace length (s)
        seed: Generator seed; equal seeds give identical samples
        psd: Noise PSD (V²/Hz), constant or a function of frequency
        linear_range_t: Warn when the field exceeds this amplitude

    Returns:
        TimeTrace with round(fs·duration) samples
    """
    n = int(round(fs * duration))
    if n < 2:
        raise ConfigValidationError("trace must hold at least two samples", key="duration")
    if waveform.kind == WaveformKind.SINE and waveform.frequency_hz >= fs / 2:
        raise ConfigValidationError(
            f"field frequency {waveform.frequency_hz} Hz is above Nyquist", key="frequency_hz"
        )
    if linear_range_t is not None and waveform.amplitude_t > linear_range_t:
        logger.warning(
            f"Field amplitude {waveform.amplitude_t:.3g} T exceeds the linear range",
            extra={"amplitude_t": waveform.amplitude_t, "linear_range_t": linear_range_t},
        )

    with simulation_stage_logger("trace_synthesis", samples=n, seed=seed):
        rng = np.random.default_rng(seed)
        t = np.arange(n) / fs
        response = op.signal * field_to_frequency(waveform.evaluate(t), conversion)
        noise = shaped_noise(n, fs, op.noise if psd is None else psd, rng)
    return TimeTrace(fs=fs, samples=response + noise)


def _segment_for(fs: float, frequency_hz: float, n: int) -> int:
    """Power-of-two segment resolving ``frequency_hz`` by at least 20 bins."""
    target = int(2 ** np.ceil(np.log2(20.0 * fs / frequency_hz)))
    return int(min(max(target, DEFAULT_SEGMENT_LENGTH), n))


def _reference_errors(amplitude: float, references: Optional[Dict[str, float]]) -> Dict[str, float]:
    return {name: abs(amplitude - ref) / ref for name, ref in (references or {}).items()}


def recover_field(
    trace: TimeTrace,
    op: OperatingPoint,
    frequency_hz: Optional[float] = None,
    t_on_s: Optional[float] = None,
    segment_len: Optional[int] = None,
    references: Optional[Dict[str, float]] = None,
    conversion: FieldConversion = DEFAULT_CONVERSION,
) -> FieldRecovery:
    """Invert the synthesis chain to a field amplitude.

    With ``frequency_hz`` the Welch peak is integrated over ±6 bins above the local
    median floor. Otherwise the field is the mean voltage (after minus before
    ``t_on_s`` for a step) divided by S·A.

    Args:
        trace: Detector trace
        op: Operating point whose S calibrates the voltage
        frequency_hz: Expected tone frequency
        t_on_s: Step onset for DC fields
        segment_len: Welch segment length; chosen from the tone frequency when omitted
        references: Named independent field values (T) to report errors against

    Returns:
        FieldRecovery; ``low_snr`` set when the SNR is below 3
    """
    scale = op.signal * conversion.a_hz
    if scale <= 0:
        raise ConfigValidationError("operating point has no signal", key="signal")

    if frequency_hz is not None:
        seg = segment_len or _segment_for(trace.fs, frequency_hz, trace.samples.size)
        estimate = welch_psd(trace, seg)
        psd, df = estimate.psd, estimate.df
        k0 = int(round(frequency_hz / df))
        lo, hi = max(k0 - 3, 1), min(k0 + 4, psd.size)
        k0 = lo + int(np.argmax(psd[lo:hi]))

        peak = np.arange(max(k0 - PEAK_HALF_WIDTH, 1), min(k0 + PEAK_HALF_WIDTH + 1, psd.size))
        around = np.arange(max(k0 - FLOOR_HALF_WIDTH, 1), min(k0 + FLOOR_HALF_WIDTH + 1, psd.size))
        floor_bins = np.setdiff1d(around, peak)
        floor = float(np.median(psd[floor_bins])) if floor_bins.size else 0.0

        power = max(float(np.sum(psd[peak] - floor) * df), 0.0)
        noise_power = floor * peak.size * df
        amplitude = np.sqrt(2.0 * power) / scale
        noise_amplitude = np.sqrt(2.0 * noise_power) / scale
        snr = power / noise_power if noise_power > 0 else float("inf")
        floor_t = np.sqrt(floor) / scale
        found = float(estimate.f_hz[k0])
    else:
        x = trace.samples
        if t_on_s is not None:
            on = trace.t >= t_on_s
            if on.all() or not on.any():
                raise ConfigValidationError("step onset outside the trace", key="t_on_s")
            level = x[on].mean() - x[~on].mean()
            spread = np.sqrt(x[on].var() / on.sum() + x[~on].var() / (~on).sum())
        else:
            level = x.mean()
            spread = x.std() / np.sqrt(x.size)
        amplitude = abs(float(level)) / scale
        noise_amplitude = float(spread) / scale
        snr = (level / spread) ** 2 if spread > 0 else float("inf")
        floor_t = None
        found = None

    low_snr = bool(snr < MIN_SNR)
    if low_snr:
        logger.warning(
            f"Low SNR field recovery (SNR={snr:.3g})",
            extra={"snr": snr, "amplitude_t": amplitude},
        )

    return FieldRecovery(
        amplitude_t=float(amplitude),
        frequency_hz=found,
        snr=float(snr),
        low_snr=low_snr,
        noise_amplitude_t=float(noise_amplitude),
        floor_t_sqrthz=None if floor_t is None else float(floor_t),
        reference_errors=_reference_errors(float(amplitude), references),
    )


def trace_sensitivity(
    trace: TimeTrace,
    op: OperatingPoint,
    segment_len: int = DEFAULT_SEGMENT_LENGTH,
    conversion: FieldConversion = DEFAULT_CONVERSION,
) -> float:
    """√(mean PSD)/(S·A) of a trace without DC and Nyquist bins, in T/√Hz."""
    estimate = welch_psd(trace, segment_len)
    floor = float(np.mean(estimate.psd[1:-1]))
    return float(np.sqrt(floor) / (op.signal * conversion.a_hz))
