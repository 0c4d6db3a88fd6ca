"""Unit tests for trace synthesis, Welch spectra and field recovery."""

import numpy as np
import pytest
from pydantic import ValidationError

from cqed_sim.exceptions import ConfigValidationError
from cqed_sim.models.device import DEFAULT_CONSTANTS
from cqed_sim.models.measurement import CoilSpec, FieldWaveform, TimeTrace, WaveformKind
from cqed_sim.models.sensing import DEFAULT_CONVERSION, OperatingPoint
from cqed_sim.physics.measurement import (
    coil_field,
    readout_noise_profile,
    recover_field,
    shaped_noise,
    synthesize_trace,
    trace_sensitivity,
    welch_psd,
)
from cqed_sim.physics.sensitivity import evaluate_operating_point

SIGNAL = 1e-6
NOISE = 1e-12
ETA = np.sqrt(NOISE) / (SIGNAL * DEFAULT_CONVERSION.a_hz)


@pytest.fixture
def op():
    """Flat-noise operating point with round numbers."""
    return OperatingPoint(power_dbm=-13.0, gamma_p=1e5, signal=SIGNAL, noise=NOISE, eta=ETA)


class TestCoil:
    """Test the calibration coil field."""

    def test_default_coil(self):
        assert coil_field(CoilSpec()) == pytest.approx(4.3034e-6, rel=1e-4)

    def test_field_at_coil_center(self):
        coil = CoilSpec(turns=10, radius_m=0.05, distance_m=0.0, current_a=1.0)
        expected = DEFAULT_CONSTANTS.mu_0 * 10 * 1.0 / (2 * 0.05)
        assert coil_field(coil) == pytest.approx(expected)


class TestWelch:
    """Test the single-sided PSD estimate."""

    def test_white_noise_level(self):
        rng = np.random.default_rng(1)
        fs = 1000.0
        trace = TimeTrace(fs=fs, samples=rng.standard_normal(2**16))
        estimate = welch_psd(trace)

        assert estimate.segment_len == 8192
        assert estimate.n_segments == 15
        assert np.mean(estimate.psd[1:-1]) == pytest.approx(2.0 / fs, rel=0.05)

    def test_sine_power(self):
        fs, a = 1024.0, 2.0
        t = np.arange(2**16) / fs
        trace = TimeTrace(fs=fs, samples=a * np.sin(2 * np.pi * 100.0 * t))
        estimate = welch_psd(trace, segment_len=1024)

        assert estimate.df == pytest.approx(1.0)
        assert np.sum(estimate.psd) * estimate.df == pytest.approx(a**2 / 2, rel=1e-2)
        assert estimate.f_hz[np.argmax(estimate.psd)] == pytest.approx(100.0)

    def test_segment_longer_than_trace(self):
        trace = TimeTrace(fs=100.0, samples=np.zeros(100))
        with pytest.raises(ConfigValidationError) as exc_info:
            welch_psd(trace)
        assert exc_info.value.key == "segment_len"

    def test_trace_validation(self):
        with pytest.raises(ValidationError):
            TimeTrace(samples=np.array([0.0, np.nan]))
        with pytest.raises(ValidationError):
            TimeTrace(samples=np.zeros((2, 2)))


class TestSynthesis:
    """Test noise shaping and trace synthesis."""

    def test_flat_shaping_scales_white_noise(self):
        fs, level = 1000.0, 4e-12
        shaped = shaped_noise(1000, fs, level, np.random.default_rng(5))
        white = np.random.default_rng(5).standard_normal(1000)
        assert shaped == pytest.approx(np.sqrt(level * fs / 2.0) * white, rel=1e-9, abs=1e-15)

    def test_callable_psd(self):
        fs = 1000.0
        rng = np.random.default_rng(2)
        shaped = shaped_noise(2**15, fs, lambda f: np.where(f < 100.0, 1e-10, 0.0), rng)
        estimate = welch_psd(TimeTrace(fs=fs, samples=shaped), segment_len=1024)
        high = estimate.psd[estimate.f_hz > 150.0]
        assert np.max(high) < 1e-3 * 1e-10

    def test_negative_psd_rejected(self):
        with pytest.raises(ConfigValidationError):
            shaped_noise(16, 1000.0, -1.0, np.random.default_rng(0))

    def test_seed_reproducible(self, op):
        waveform = FieldWaveform(amplitude_t=1e-6, frequency_hz=10.0)
        a = synthesize_trace(op, waveform, fs=1000.0, duration=1.0, seed=11)
        b = synthesize_trace(op, waveform, fs=1000.0, duration=1.0, seed=11)
        c = synthesize_trace(op, waveform, fs=1000.0, duration=1.0, seed=12)

        assert a.samples.size == 1000
        assert np.array_equal(a.samples, b.samples)
        assert not np.array_equal(a.samples, c.samples)

    def test_tone_above_nyquist_rejected(self, op):
        waveform = FieldWaveform(amplitude_t=1e-6, frequency_hz=600.0)
        with pytest.raises(ConfigValidationError) as exc_info:
            synthesize_trace(op, waveform, fs=1000.0, duration=1.0)
        assert exc_info.value.key == "frequency_hz"

    def test_sine_needs_frequency(self):
        with pytest.raises(ValidationError):
            FieldWaveform(kind=WaveformKind.SINE, amplitude_t=1e-6)


class TestRecovery:
    """Test inverting the synthesis chain."""

    def test_tone_amplitude(self, op):
        waveform = FieldWaveform(amplitude_t=4.3e-6, frequency_hz=10.0)
        trace = synthesize_trace(op, waveform, fs=2048.0, duration=20.0, seed=3)
        recovery = recover_field(
            trace, op, frequency_hz=10.0, references={"coil_formula": 4.3e-6, "gaussmeter": 3.9e-6}
        )

        assert recovery.amplitude_t == pytest.approx(4.3e-6, rel=1e-2)
        assert recovery.frequency_hz == pytest.approx(10.0)
        assert not recovery.low_snr
        assert recovery.floor_t_sqrthz == pytest.approx(ETA, rel=0.15)
        assert recovery.reference_errors["coil_formula"] < 1e-2
        assert recovery.reference_errors["gaussmeter"] == pytest.approx(0.4 / 3.9, abs=1e-2)

    def test_no_field_flags_low_snr(self, op):
        waveform = FieldWaveform(kind=WaveformKind.ZERO)
        trace = synthesize_trace(op, waveform, fs=2048.0, duration=20.0, seed=4)
        recovery = recover_field(trace, op, frequency_hz=10.0)
        assert recovery.low_snr

    def test_step_field(self, op):
        waveform = FieldWaveform(kind=WaveformKind.STEP, amplitude_t=1e-6, t_on_s=5.0)
        trace = synthesize_trace(op, waveform, fs=1000.0, duration=10.0, seed=5)
        recovery = recover_field(trace, op, t_on_s=5.0)

        assert recovery.amplitude_t == pytest.approx(1e-6, rel=1e-3)
        assert recovery.frequency_hz is None
        assert recovery.floor_t_sqrthz is None
        assert recovery.snr > 1e3

    def test_step_onset_outside_trace(self, op):
        trace = synthesize_trace(op, FieldWaveform(kind=WaveformKind.ZERO), fs=100.0, duration=1.0)
        with pytest.raises(ConfigValidationError) as exc_info:
            recover_field(trace, op, t_on_s=5.0)
        assert exc_info.value.key == "t_on_s"

    def test_trace_sensitivity_matches_eta(self, op):
        trace = synthesize_trace(op, FieldWaveform(kind=WaveformKind.ZERO), fs=1000.0, duration=131.072, seed=6)
        assert trace_sensitivity(trace, op) == pytest.approx(ETA, rel=0.05)


class TestReadoutProfile:
    """Test the frequency-dependent readout noise."""

    def test_profile_matches_budget(self, cavity, spins, env):
        op = evaluate_operating_point(cavity, spins, env, -13.0)
        psd = readout_noise_profile(cavity, spins, env, op)
        assert float(psd(np.array([env.offset_hz]))[0]) == pytest.approx(op.noise, rel=1e-2)
        assert np.all(psd(np.array([0.0, 1e9])) > 0)
