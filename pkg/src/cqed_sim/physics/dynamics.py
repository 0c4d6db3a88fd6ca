"""Semiclassical equations of motion on a binned inhomogeneous ensemble.

In the drive frame, with Δ_j = ω_d − ω_j:

    α̇   = −(iΔ + κ/2)α − i g_s N Σ_j w_j s_j + √κ_c1 β_in
    ṡ_j = −(iΔ_j + γ/2)s_j − i g_s (1 − 2p_j) α
    ṗ_j = −γ_p p_j + i g_s (s_j α* − s_j* α)

The state is packed into one real vector (Re α, Im α, Re s, Im s, p) for the
adaptive integrator.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.stats import norm

from cqed_sim.exceptions import ConfigValidationError
from cqed_sim.models.device import CavityParams, DriveParams, LineShape, SpinEnsembleParams
from cqed_sim.models.dynamics import (
    EnsembleState,
    HysteresisTrace,
    IntegratorConfig,
    SpinBins,
    Trajectory,
)
from cqed_sim.models.spectra import DistributionKind, InhomogeneousDistribution
from cqed_sim.physics.integrator import integrate_adaptive
from cqed_sim.physics.units import drive_from_dbm
from cqed_sim.utils.logging_config import simulation_stage_logger

logger = logging.getLogger(__name__)

BIN_WINDOW_FWHM = 20.0
# Occupancies below this count as an empty cavity in the steady-state test
EMPTY_CAVITY_PHOTONS = 1e-12


def bin_distribution(
    dist: InhomogeneousDistribution, n_bins: int, window: float = BIN_WINDOW_FWHM
) -> SpinBins:
    """Equal-probability-mass bins over ±``window`` FWHM, relative to the line center.

    Bin centers sit at the inverse CDF of the truncated density evaluated at the
    mid-probabilities (j + 1/2)/M, so each bin carries weight 1/M.

    Args:
        dist: Line density
        n_bins: Number of bins M; 1 or an odd number ≥ 3
        window: Truncation half-width in units of the FWHM

    Raises:
        ConfigValidationError: If n_bins is even or smaller than 3 (other than 1)
    """
    if n_bins != 1 and (n_bins < 3 or n_bins % 2 == 0):
        raise ConfigValidationError(
            f"bin count must be 1 or an odd number >= 3, got {n_bins}", key="n_bins"
        )
    if n_bins == 1:
        return SpinBins(offsets=np.zeros(1), weights=np.ones(1))

    x_max = window * dist.fwhm
    u = (np.arange(n_bins) + 0.5) / n_bins

    if dist.kind == DistributionKind.LORENTZIAN:
        hw = dist.fwhm / 2.0
        lo = 0.5 + np.arctan(-x_max / hw) / np.pi
        hi = 0.5 + np.arctan(x_max / hw) / np.pi
        offsets = hw * np.tan(np.pi * (lo + (hi - lo) * u - 0.5))
        offsets = 0.5 * (offsets - offsets[::-1])
    elif dist.kind == DistributionKind.GAUSSIAN:
        sigma = dist.fwhm / (2.0 * np.sqrt(2.0 * np.log(2.0)))
        lo = norm.cdf(-x_max / sigma)
        hi = norm.cdf(x_max / sigma)
        offsets = sigma * norm.ppf(lo + (hi - lo) * u)
        offsets = 0.5 * (offsets - offsets[::-1])
    else:
        inside = np.abs(dist.omega - dist.center) <= x_max
        omega = dist.omega[inside]
        cdf = cumulative_trapezoid(dist.density[inside], omega, initial=0.0)
        cdf /= cdf[-1]
        offsets = np.interp(u, cdf, omega) - dist.center

    weights = np.full(n_bins, 1.0 / n_bins)
    return SpinBins(offsets=offsets, weights=weights / weights.sum())


def line_bins(spins: SpinEnsembleParams, n_bins: int) -> SpinBins:
    """Bins of one hyperfine line of the ensemble."""
    kind = (
        DistributionKind.LORENTZIAN
        if spins.lineshape == LineShape.LORENTZIAN
        else DistributionKind.GAUSSIAN
    )
    dist = InhomogeneousDistribution(kind=kind, center=0.0, fwhm=spins.gamma_inh)
    return bin_distribution(dist, n_bins)


def bin_detunings(spins: SpinEnsembleParams, drive: DriveParams, bins: SpinBins) -> np.ndarray:
    """Δ_kj = ω_d − ω_kj for every line k and bin j, shape (n_hyperfine, M)."""
    delta0 = drive.delta - drive.delta_s
    return delta0 - spins.line_offsets[:, None] - bins.offsets[None, :]


@dataclass
class EquationsOfMotion:
    """Right-hand side of the mean-field equations for fixed parameters."""

    cav: CavityParams
    spins: SpinEnsembleParams
    drive: DriveParams
    bins: SpinBins
    detunings: np.ndarray = field(init=False)

    def __post_init__(self):
        self.detunings = bin_detunings(self.spins, self.drive, self.bins)

    @property
    def shape(self):
        return self.detunings.shape

    @property
    def n_var(self) -> int:
        return self.detunings.size

    def pack(self, state: EnsembleState) -> np.ndarray:
        return np.concatenate(
            (
                [state.alpha.real, state.alpha.imag],
                state.s.real.ravel(),
                state.s.imag.ravel(),
                state.p.ravel(),
            )
        )

    def unpack(self, y: np.ndarray):
        n = self.n_var
        alpha = complex(y[0], y[1])
        s = (y[2 : 2 + n] + 1j * y[2 + n : 2 + 2 * n]).reshape(self.shape)
        p = y[2 + 2 * n :].reshape(self.shape)
        return alpha, s, p

    def derivatives(self, alpha: complex, s: np.ndarray, p: np.ndarray):
        """Complex time derivatives (α̇, ṡ, ṗ)."""
        cav, spins = self.cav, self.spins
        coupling = np.sum(self.bins.weights * s)
        dalpha = (
            -(1j * self.drive.delta + cav.kappa / 2.0) * alpha
            - 1j * spins.g_s * spins.n_spins * coupling
            + np.sqrt(cav.kappa_c1) * self.drive.beta_in
        )
        ds = -(1j * self.detunings + spins.gamma / 2.0) * s - 1j * spins.g_s * (1.0 - 2.0 * p) * alpha
        dp = -spins.gamma_p * p - 2.0 * spins.g_s * np.imag(s * np.conj(alpha))
        return dalpha, ds, dp

    def __call__(self, t: float, y: np.ndarray) -> np.ndarray:
        dalpha, ds, dp = self.derivatives(*self.unpack(y))
        return np.concatenate(
            ([dalpha.real, dalpha.imag], ds.real.ravel(), ds.imag.ravel(), dp.ravel())
        )

    def is_admissible(self, y: np.ndarray, slack: float = 0.0) -> bool:
        """Populations must stay in [0, 1] up to ``slack``."""
        p = y[2 + 2 * self.n_var :]
        return bool(np.all(p >= -slack) and np.all(p <= 1.0 + slack))

    def residual(self, state: EnsembleState) -> float:
        """Norm of the right-hand side relative to κ|α| + γ·max|s_j|."""
        dalpha, ds, dp = self.derivatives(state.alpha, state.s, state.p)
        rhs = np.sqrt(abs(dalpha) ** 2 + np.sum(np.abs(ds) ** 2) + np.sum(dp**2))
        scale = self.cav.kappa * abs(state.alpha) + self.spins.gamma * float(np.max(np.abs(state.s)))
        return float(rhs / scale) if scale > 0 else float(rhs)


class SteadyStateMonitor:
    """Stops integration once |α|² and the mean inversion settle.

    The test compares values one window (10/κ) apart; both must change by less than
    ``tol`` relative.
    """

    def __init__(self, eom: EquationsOfMotion, tol: float):
        self.eom = eom
        self.tol = tol
        self.window = 10.0 / eom.cav.kappa
        self.t_ref: Optional[float] = None
        self.ref = (0.0, 0.0)
        self.steady = False

    def _observables(self, y: np.ndarray):
        alpha, _, p = self.eom.unpack(y)
        w = float(np.mean(np.sum(self.eom.bins.weights * (1.0 - 2.0 * p), axis=-1)))
        return abs(alpha) ** 2, w

    def __call__(self, t: float, y: np.ndarray) -> bool:
        n, w = self._observables(y)
        if self.t_ref is None:
            self.t_ref, self.ref = t, (n, w)
            return False
        if t - self.t_ref < self.window:
            return False

        n_ref, w_ref = self.ref
        n_scale = max(n, n_ref)
        n_settled = n_scale < EMPTY_CAVITY_PHOTONS or abs(n - n_ref) <= self.tol * n_scale
        w_settled = abs(w - w_ref) <= self.tol * max(abs(w), abs(w_ref), 1e-30)
        self.t_ref, self.ref = t, (n, w)
        self.steady = n_settled and w_settled
        return self.steady


def integrate(
    state0: EnsembleState,
    cav: CavityParams,
    spins: SpinEnsembleParams,
    drive: DriveParams,
    config: IntegratorConfig,
    t_end: float,
    bins: Optional[SpinBins] = None,
) -> Trajectory:
    """Integrate the equations of motion from ``state0`` up to ``t_end``.

    Samples are taken on a uniform grid of ``config.n_samples`` points; the run stops
    at the first sample after the steady-state criterion is met.

    Args:
        state0: Initial state, arrays shaped (n_hyperfine, M)
        cav: Cavity parameters
        spins: Spin ensemble
        drive: Constant drive
        config: Tolerances and steady-state settings
        t_end: Final time (s), measured from ``state0.t``
        bins: Line discretization; ``config.n_bins`` equal-mass bins when omitted

    Returns:
        Sampled trajectory and final state

    Raises:
        ConfigValidationError: If the state shape does not match the bins
        StiffnessError: If the step size underflows
    """
    if bins is None:
        bins = line_bins(spins, config.n_bins)
    if state0.s.shape != (spins.n_hyperfine, bins.size):
        raise ConfigValidationError(
            f"state shape {state0.s.shape} does not match "
            f"({spins.n_hyperfine}, {bins.size})",
            key="state0",
        )
    if t_end <= 0:
        raise ConfigValidationError(f"t_end must be positive, got {t_end}", key="t_end")

    eom = EquationsOfMotion(cav=cav, spins=spins, drive=drive, bins=bins)
    monitor = SteadyStateMonitor(eom, config.steady_state_tol) if config.steady_state_tol else None

    t0 = state0.t
    times = t0 + np.linspace(0.0, t_end, config.n_samples)
    y = eom.pack(state0)
    alphas: List[complex] = [state0.alpha]
    inversions: List[float] = [state0.mean_inversion(bins)]
    h = None
    steps = 0
    max_step = config.max_step or np.inf

    for t_a, t_b in zip(times[:-1], times[1:]):
        t, y, n_steps, h = integrate_adaptive(
            eom,
            t_a,
            y,
            t_b,
            rtol=config.rel_tol,
            atol=config.abs_tol,
            max_step=max_step,
            first_step=h,
            is_admissible=lambda y_new: eom.is_admissible(y_new, config.abs_tol),
            on_step=monitor,
            max_steps=config.max_steps - steps,
        )
        steps += n_steps
        alpha, s, p = eom.unpack(y)
        alphas.append(alpha)
        inversions.append(float(np.mean(np.sum(bins.weights * (1.0 - 2.0 * p), axis=-1))))
        if (monitor is not None and monitor.steady) or steps >= config.max_steps:
            break

    n_kept = len(alphas)
    alpha, s, p = eom.unpack(y)
    final = EnsembleState(t=float(t), alpha=alpha, s=s, p=np.clip(p, 0.0, 1.0))
    sample_t = np.append(times[: n_kept - 1], t)

    steady = bool(monitor is not None and monitor.steady)
    logger.debug(
        f"Integrated {steps} steps to t={t:.6g} s (steady={steady})",
        extra={"steps": steps, "alpha_sq": final.alpha_sq, "steady": steady},
    )
    return Trajectory(
        t=sample_t,
        alpha=np.array(alphas),
        mean_inversion=np.array(inversions),
        final_state=final,
        steady=steady,
        steps=steps,
    )


def hysteresis_sweep(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    powers_dbm: Sequence[float],
    config: IntegratorConfig,
    drive: Optional[DriveParams] = None,
    bins: Optional[SpinBins] = None,
    settle_time: Optional[float] = None,
) -> HysteresisTrace:
    """Sequential power sweep carrying each final state into the next power.

    Args:
        cav: Cavity parameters
        spins: Spin ensemble
        powers_dbm: Powers rising to a maximum and then falling; -inf is zero power
        config: Integration settings
        drive: Detuning template; its beta_in is replaced at every power
        bins: Line discretization
        settle_time: Integration time per power; 100/min(κ, γ_p) when omitted

    Returns:
        |α|² at the end of every power step
    """
    powers = np.asarray(powers_dbm, dtype=float)
    if powers.ndim != 1 or powers.size < 2:
        raise ConfigValidationError("need at least two powers", key="powers_dbm")

    drive = drive or DriveParams()
    bins = bins or line_bins(spins, config.n_bins)
    settle_time = settle_time or 100.0 / min(cav.kappa, spins.gamma_p)
    turning = int(np.argmax(powers))

    state = EnsembleState.polarized(spins.n_hyperfine, bins.size)
    results = np.empty(powers.size)

    with simulation_stage_logger("hysteresis_sweep", points=int(powers.size)):
        for i, power in enumerate(powers):
            step_drive = drive_from_dbm(cav, power, delta=drive.delta, delta_s=drive.delta_s)
            trajectory = integrate(state, cav, spins, step_drive, config, settle_time, bins)
            state = trajectory.final_state
            results[i] = state.alpha_sq
            logger.debug(
                f"Sweep point {i}: P={power:.2f} dBm, |alpha|^2={results[i]:.6g}",
                extra={"power_dbm": float(power), "alpha_sq": float(results[i])},
            )

    return HysteresisTrace(powers_dbm=powers, alpha_sq=results, turning_index=turning)
