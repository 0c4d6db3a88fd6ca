"""Saturable steady state of the driven spin–cavity system.

The cavity occupancy n = |α|² obeys the fixed-point equation

    |β_in|²·κ_c1 = |κ/2 + iΔ + Σ(n)|²·n

where Σ(n) is the spin self-energy with the drive-dependent inversion of every spin
class. At resonance with the effective (first-order) self-energy this is the resonant occupancy equation:

    |β_in|²·κ_c1 = (κ/2)²(1 + C_α)²|α|²,   C_α = 4g_eff²/(κΓ_1)

All roots are located by a sign scan on a logarithmic grid followed by bracketed
refinement, so coexisting branches are never missed.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import brentq

from cqed_sim.exceptions import (
    BranchSelectionError,
    ConfigValidationError,
    NumericalError,
    RootNotFoundError,
)
from cqed_sim.models.device import (
    DEFAULT_CONSTANTS,
    CavityParams,
    DriveParams,
    LineShape,
    PhysicalConstants,
    SpinEnsembleParams,
)
from cqed_sim.models.dynamics import EnsembleState, SpinBins
from cqed_sim.models.spectra import ReflectionPoint
from cqed_sim.models.steady_state import (
    BistabilityReport,
    Branch,
    SaturationThreshold,
    SolverMethod,
    SpinBinState,
    SteadyStateSolution,
    SweepDirection,
)
from cqed_sim.physics.dynamics import line_bins
from cqed_sim.physics.units import drive_from_dbm, flux_to_power, watts_to_dbm
from cqed_sim.utils.parallel import parallel_map

logger = logging.getLogger(__name__)

DEFAULT_SCAN_POINTS = 400
MIN_SCAN_POINTS = 200
DEFAULT_QUADRATURE_BINS = 2001
SCAN_LOW_FACTOR = 1e-6
# Relative step of the central difference used for stability labels
STABILITY_STEP = 1e-6


# ============================================================================
# Spin response
# ============================================================================


def depolarization_factor(g_s: float, alpha_sq, gamma: float):
    """χ = √(1 + 8g_s²|α|²/γ²)."""
    return np.sqrt(1.0 + 8.0 * g_s**2 * np.asarray(alpha_sq, dtype=float) / gamma**2)


def spin_inversion(g_s: float, alpha_sq, gamma: float, gamma_p: float, delta_j):
    """Steady-state inversion w_j = 1 − 2p_j of one spin class.

    w_j = 1/(1 + 2g_s²|α|²γ/(γ_p(Δ_j² + γ²/4)))

    Raises:
        ConfigValidationError: If gamma or gamma_p is not positive
    """
    if gamma <= 0 or gamma_p <= 0:
        raise ConfigValidationError(
            f"gamma and gamma_p must be positive (gamma={gamma}, gamma_p={gamma_p})",
            key="gamma_p",
        )
    delta_j = np.asarray(delta_j, dtype=float)
    saturation = 2.0 * g_s**2 * np.asarray(alpha_sq, dtype=float) * gamma / (
        gamma_p * (delta_j**2 + gamma**2 / 4.0)
    )
    return 1.0 / (1.0 + saturation)


def _require_polarization(spins: SpinEnsembleParams) -> None:
    if spins.gamma_p <= 0:
        raise ConfigValidationError(
            "the saturable steady state needs an optical polarization rate gamma_p > 0",
            key="spins.gamma_p",
        )


def _resolve_method(spins: SpinEnsembleParams, method: SolverMethod) -> SolverMethod:
    if method == SolverMethod.EXACT and spins.lineshape != LineShape.LORENTZIAN:
        logger.debug("Closed-form self-energy needs Lorentzian lines; using binned quadrature")
        return SolverMethod.BINS
    return method


def self_energy(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    drive: DriveParams,
    alpha_sq,
    method: SolverMethod = SolverMethod.EXACT,
    bins: Optional[SpinBins] = None,
):
    """Spin self-energy Σ(|α|²) seen by the cavity at the drive frequency (rad/s).

    Args:
        cav: Cavity parameters
        spins: Spin ensemble (g_s, N, Γ, γ, γ_p, hyperfine lines)
        drive: Detunings Δ and Δ_s
        alpha_sq: Cavity occupancy, scalar or 1-D array
        method: Self-energy model
        bins: Line discretization for the binned method

    Returns:
        Complex Σ, scalar or array matching alpha_sq
    """
    _require_polarization(spins)
    method = _resolve_method(spins, method)
    n = np.atleast_1d(np.asarray(alpha_sq, dtype=float))[:, None]
    delta0 = (drive.delta - drive.delta_s - spins.line_offsets)[None, :]
    g2, gamma = spins.g**2, spins.gamma

    if method == SolverMethod.EXACT:
        a = np.sqrt(gamma**2 / 4.0 + 2.0 * spins.g_s**2 * n * gamma / spins.gamma_p)
        z = 1.0 / (a + spins.gamma_inh / 2.0 + 1j * delta0)
        sigma = g2 * np.sum(z + ((gamma / 2.0 - a) / a) * z.real, axis=-1)

    elif method == SolverMethod.EFFECTIVE:
        chi = depolarization_factor(spins.g_s, n, gamma)
        gamma_1 = spins.gamma_inh + gamma * chi
        sigma = np.sum((g2 / chi) / (gamma_1 / 2.0 + 1j * delta0), axis=-1)

    else:
        bins = bins or line_bins(spins, DEFAULT_QUADRATURE_BINS)
        detuning = delta0[:, :, None] - bins.offsets[None, None, :]
        w = spin_inversion(spins.g_s, n[:, :, None], gamma, spins.gamma_p, detuning)
        sigma = g2 * np.sum(bins.weights * w / (gamma / 2.0 + 1j * detuning), axis=(-2, -1))

    return complex(sigma[0]) if np.ndim(alpha_sq) == 0 else sigma


def cavity_denominator(cav: CavityParams, drive: DriveParams, sigma):
    """D = κ/2 + iΔ + Σ."""
    return cav.kappa / 2.0 + 1j * drive.delta + sigma


# ============================================================================
# Root finding
# ============================================================================


def make_solution(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    drive: DriveParams,
    alpha_sq: float,
    denominator: complex,
    branch: Branch,
    stable: bool,
) -> SteadyStateSolution:
    """Assemble a solution and its effective parameters from a root."""
    chi = float(depolarization_factor(spins.g_s, alpha_sq, spins.gamma))
    gamma_1 = spins.gamma_inh + spins.gamma * chi
    g_eff = spins.g / np.sqrt(chi)
    c_alpha = 4.0 * g_eff**2 / (cav.kappa * gamma_1)
    alpha = np.sqrt(cav.kappa_c1) * drive.beta_in / denominator
    r = -1.0 + cav.kappa_c1 / denominator
    return SteadyStateSolution(
        alpha_sq=float(alpha_sq),
        alpha=complex(alpha),
        chi=chi,
        gamma_1=float(gamma_1),
        g_eff=float(g_eff),
        c_alpha=float(c_alpha),
        branch=branch,
        stable=stable,
        r=complex(r),
    )


def _label(stable_flags: Sequence[bool]) -> List[Branch]:
    labels = []
    seen_stable = False
    for stable in stable_flags:
        if not stable:
            labels.append(Branch.MIDDLE_UNSTABLE)
        elif not seen_stable:
            labels.append(Branch.LOWER)
            seen_stable = True
        else:
            labels.append(Branch.UPPER)
    return labels


def solve_occupancy(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    drive: DriveParams,
    method: SolverMethod = SolverMethod.EXACT,
    bins: Optional[SpinBins] = None,
    scan_points: int = DEFAULT_SCAN_POINTS,
) -> List[SteadyStateSolution]:
    """All non-negative steady-state occupancies, sorted ascending.

    The residual F(n) − |β_in|², F(n) = n|D(n)|²/κ_c1, is scanned on a log grid from
    10⁻⁶ of the linear estimate up to 4κ_c1|β_in|²/κ², above which no root can lie
    (|D| ≥ κ/2). Each sign change is refined with Brent's method; a root is unstable
    when dF/dn < 0.

    Args:
        cav: Cavity parameters
        spins: Spin ensemble
        drive: Drive amplitude and detunings
        method: Self-energy model
        bins: Line discretization for the binned method
        scan_points: Grid size of the sign scan

    Returns:
        Solutions labeled lower, middle-unstable or upper

    Raises:
        RootNotFoundError: If the scan finds no sign change
    """
    if scan_points < MIN_SCAN_POINTS:
        raise ConfigValidationError(
            f"scan needs at least {MIN_SCAN_POINTS} points, got {scan_points}",
            key="scan_points",
        )
    _require_polarization(spins)
    method = _resolve_method(spins, method)
    if method == SolverMethod.BINS and bins is None:
        bins = line_bins(spins, DEFAULT_QUADRATURE_BINS)

    beta_sq = drive.beta_in**2
    if beta_sq == 0.0:
        d0 = cavity_denominator(cav, drive, self_energy(cav, spins, drive, 0.0, method, bins))
        return [make_solution(cav, spins, drive, 0.0, d0, Branch.LOWER, True)]

    def response(n):
        sigma = self_energy(cav, spins, drive, n, method, bins)
        return np.asarray(n) * np.abs(cavity_denominator(cav, drive, sigma)) ** 2 / cav.kappa_c1

    d0 = cavity_denominator(cav, drive, self_energy(cav, spins, drive, 0.0, method, bins))
    n_linear = cav.kappa_c1 * beta_sq / abs(d0) ** 2
    n_low = SCAN_LOW_FACTOR * n_linear
    n_high = 4.0 * cav.kappa_c1 * beta_sq / cav.kappa**2 * (1.0 + 1e-6)

    grid = np.geomspace(n_low, n_high, scan_points)
    residual = response(grid) - beta_sq

    roots: List[float] = []
    for i in range(scan_points - 1):
        lo, hi = residual[i], residual[i + 1]
        if lo == 0.0:
            roots.append(float(grid[i]))
        elif lo * hi < 0.0:
            root = brentq(
                lambda n: float(response(n)) - beta_sq,
                grid[i],
                grid[i + 1],
                xtol=1e-14 * grid[i],
                rtol=1e-14,
                maxiter=200,
            )
            roots.append(float(root))

    if not roots:
        raise RootNotFoundError(
            "No steady-state root found in the occupancy scan",
            diagnostics={
                "method": method.value,
                "beta_in_sq": beta_sq,
                "n_low": n_low,
                "n_high": n_high,
                "residual_low": float(residual[0]),
                "residual_high": float(residual[-1]),
                "residual_min": float(np.min(residual)),
                "residual_max": float(np.max(residual)),
            },
        )

    stable = []
    for n in roots:
        h = STABILITY_STEP * n
        slope = float(response(n + h)) - float(response(n - h))
        stable.append(bool(slope > 0.0))

    solutions = []
    for n, is_stable, branch in zip(roots, stable, _label(stable)):
        d = cavity_denominator(cav, drive, self_energy(cav, spins, drive, n, method, bins))
        solutions.append(make_solution(cav, spins, drive, n, d, branch, is_stable))

    logger.debug(
        f"Found {len(solutions)} steady-state root(s)",
        extra={"roots": roots, "method": method.value},
    )
    return solutions


def select_branch(
    solutions: Sequence[SteadyStateSolution],
    direction: Optional[SweepDirection] = SweepDirection.UP,
) -> SteadyStateSolution:
    """Pick the root reached by an adiabatic sweep.

    Up-sweeps follow the lowest stable root, down-sweeps the highest.

    Raises:
        BranchSelectionError: If several stable roots coexist and no direction is given
    """
    stable = [s for s in solutions if s.stable]
    if not stable:
        raise NumericalError("No stable steady state", diagnostics={"roots": len(solutions)})
    if len(stable) > 1 and direction is None:
        raise BranchSelectionError(
            f"{len(stable)} stable steady states coexist; choose a sweep direction",
            key="branch",
        )
    if direction == SweepDirection.DOWN:
        return stable[-1]
    return stable[0]


def steady_state(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    drive: DriveParams,
    direction: Optional[SweepDirection] = SweepDirection.UP,
    method: SolverMethod = SolverMethod.EXACT,
    bins: Optional[SpinBins] = None,
) -> SteadyStateSolution:
    """Branch-selected steady state."""
    return select_branch(solve_occupancy(cav, spins, drive, method, bins), direction)


# ============================================================================
# Resonant closed form
# ============================================================================


def _occupancy_polynomials(cav: CavityParams, spins: SpinEnsembleParams, beta_sq: float):
    """Numerator and denominator of |β_in|²(u) up to a constant, with χ = 1 + u.

    With q = χ² + (Γ/γ)χ and c = 4g²/(κγ), the resonant occupancy equation reads B·q² = (q + c)²(χ² − 1) where
    B = 8g_s²|β_in|²κ_c1/((κ/2)²γ²). Writing χ² − 1 = u(2 + u) keeps small
    occupancies accurate.
    """
    gamma = spins.gamma
    ratio = spins.gamma_inh / gamma
    c = 4.0 * spins.g**2 / (cav.kappa * gamma)
    b = 8.0 * spins.g_s**2 * beta_sq * cav.kappa_c1 / ((cav.kappa / 2.0) ** 2 * gamma**2)

    chi = np.array([1.0, 1.0])
    q = P.polyadd(P.polymul(chi, chi), ratio * chi)
    qc = P.polyadd(q, [c])
    numerator = P.polymul(P.polymul(qc, qc), [0.0, 2.0, 1.0])
    denominator = P.polymul(q, q)
    return numerator, denominator, b


def resonant_occupancy(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    beta_sq: float,
) -> List[SteadyStateSolution]:
    """All roots of the resonant occupancy equation for the resonant sub-ensemble (Δ = Δ_s = 0).

    It is a degree-6 polynomial in χ; every real root χ ≥ 1 is a steady state.
    Roots are polished with Newton steps and labeled by the sign of d|β_in|²/dχ.
    """
    drive = DriveParams(beta_in=float(np.sqrt(beta_sq)))

    if spins.g_s == 0.0 or beta_sq == 0.0:
        c0 = 4.0 * spins.g**2 / (cav.kappa * (spins.gamma_inh + spins.gamma))
        d = cav.kappa / 2.0 * (1.0 + c0)
        n = cav.kappa_c1 * beta_sq / d**2
        return [make_solution(cav, spins, drive, n, d, Branch.LOWER, True)]

    numerator, denominator, b = _occupancy_polynomials(cav, spins, beta_sq)
    poly = P.polysub(numerator, b * denominator)
    dpoly = P.polyder(poly)

    candidates = []
    for z in P.polyroots(poly):
        if abs(z.imag) > 1e-6 * max(1.0, abs(z.real)) or z.real < -1e-9:
            continue
        u = max(float(z.real), 0.0)
        for _ in range(5):
            slope = P.polyval(u, dpoly)
            if slope == 0.0:
                break
            u = max(u - P.polyval(u, poly) / slope, 0.0)
        if not any(abs(u - v) <= 1e-9 * max(1.0, v) for v in candidates):
            candidates.append(u)
    candidates.sort()

    if not candidates:
        raise RootNotFoundError(
            "Occupancy polynomial has no real root with chi >= 1",
            diagnostics={"beta_in_sq": beta_sq, "coefficients": list(poly)},
        )

    dnum, dden = P.polyder(numerator), P.polyder(denominator)
    stable = []
    for u in candidates:
        slope = P.polyval(u, dnum) * P.polyval(u, denominator) - P.polyval(
            u, numerator
        ) * P.polyval(u, dden)
        stable.append(bool(slope > 0.0))

    solutions = []
    for u, is_stable, branch in zip(candidates, stable, _label(stable)):
        n = u * (2.0 + u) * spins.gamma**2 / (8.0 * spins.g_s**2)
        chi = 1.0 + u
        c_alpha = 4.0 * spins.g**2 / (chi * cav.kappa * (spins.gamma_inh + spins.gamma * chi))
        d = cav.kappa / 2.0 * (1.0 + c_alpha)
        solutions.append(make_solution(cav, spins, drive, n, d, branch, is_stable))
    return solutions


def resonant_steady_state(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    beta_sq: float,
    direction: Optional[SweepDirection] = SweepDirection.UP,
) -> SteadyStateSolution:
    """Branch-selected root of the resonant occupancy equation."""
    return select_branch(resonant_occupancy(cav, spins, beta_sq), direction)


# ============================================================================
# Saturation
# ============================================================================


def saturation_threshold(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> SaturationThreshold:
    """Input flux at the onset of saturation.

    |β_s|² = (N g²/2κ_c1)·[γ/(√2(Γ + √2γ)) + κγ/(4g²)]²

    This is the resonant occupancy equation at χ = √2. The power uses ħω_c.
    """
    g2, gamma = spins.g**2, spins.gamma
    if g2 == 0:
        raise ConfigValidationError("saturation threshold needs g > 0", key="spins.g")
    bracket = gamma / (np.sqrt(2.0) * (spins.gamma_inh + np.sqrt(2.0) * gamma)) + cav.kappa * gamma / (
        4.0 * g2
    )
    beta_s_sq = spins.n_spins * g2 / (2.0 * cav.kappa_c1) * bracket**2
    power_w = flux_to_power(beta_s_sq, cav.omega_c, constants)
    return SaturationThreshold(
        beta_s_sq=float(beta_s_sq),
        power_w=float(power_w),
        power_dbm=float(watts_to_dbm(power_w)),
    )


def occupancy_deviation(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    power_dbm: float,
    method: SolverMethod = SolverMethod.EXACT,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> float:
    """Relative deviation of the up-sweep occupancy from the linear extrapolation."""
    drive = drive_from_dbm(cav, power_dbm, constants=constants)
    d0 = cavity_denominator(cav, drive, self_energy(cav, spins, drive, 0.0, method))
    n_linear = cav.kappa_c1 * drive.beta_in**2 / abs(d0) ** 2
    n = steady_state(cav, spins, drive, SweepDirection.UP, method).alpha_sq
    return abs(n / n_linear - 1.0)


def numeric_saturation_onset(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    deviation: float = 0.05,
    method: SolverMethod = SolverMethod.EXACT,
    bounds_dbm: Tuple[float, float] = (-150.0, 50.0),
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> float:
    """Resonant drive power (dBm) where |α|² deviates by ``deviation`` from linear.

    Raises:
        NumericalError: If the deviation is not crossed inside the bounds
    """
    if not 0 < deviation < 1:
        raise ConfigValidationError(f"deviation must lie in (0, 1), got {deviation}", key="deviation")

    def excess(power):
        return occupancy_deviation(cav, spins, power, method, constants) - deviation

    lo, hi = bounds_dbm
    f_lo, f_hi = excess(lo), excess(hi)
    if f_lo * f_hi > 0:
        raise NumericalError(
            "Saturation deviation not crossed inside the power bounds",
            diagnostics={"bounds_dbm": bounds_dbm, "excess_low": f_lo, "excess_high": f_hi},
        )
    return float(brentq(excess, lo, hi, xtol=1e-6))


# ============================================================================
# Reflection and slope
# ============================================================================


def slope_from_solution(cav: CavityParams, solution: SteadyStateSolution) -> float:
    """∂Im[r]/∂ω_s magnitude (4C_α/Γ_1)(κ_c1/κ)(1 + C_α)⁻² in s (per rad/s)."""
    c = solution.c_alpha
    return 4.0 * c / solution.gamma_1 * (cav.kappa_c1 / cav.kappa) / (1.0 + c) ** 2


def quadrature_slope(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    drive: DriveParams,
    direction: Optional[SweepDirection] = None,
) -> float:
    """Closed-form quadrature slope at the resonant first-order steady state.

    Raises:
        ConfigValidationError: If the drive is not resonant
        BranchSelectionError: If the point is bistable and no direction is given
    """
    if not drive.is_resonant:
        raise ConfigValidationError(
            "quadrature slope is defined at resonant tuning (delta = delta_s = 0)",
            key="drive",
        )
    solution = select_branch(resonant_occupancy(cav, spins, drive.beta_in**2), direction)
    return slope_from_solution(cav, solution)


def reflection_nonlinear(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    drive: DriveParams,
    direction: SweepDirection = SweepDirection.UP,
    method: SolverMethod = SolverMethod.EXACT,
    bins: Optional[SpinBins] = None,
) -> ReflectionPoint:
    """Reflection r = −1 + √κ_c1·α/β_in on the branch-selected steady state.

    At zero drive this is the linear limit −1 + κ_c1/D(0).
    """
    solution = steady_state(cav, spins, drive, direction, method, bins)
    return ReflectionPoint(r=solution.r, delta=drive.delta, delta_s=drive.delta_s)


def nonlinear_map(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    power_dbm: float,
    delta_grid: Sequence[float],
    delta_s_grid: Sequence[float],
    direction: SweepDirection = SweepDirection.UP,
    method: SolverMethod = SolverMethod.EXACT,
    threads: Optional[int] = None,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> List[Tuple[float, float, SteadyStateSolution]]:
    """Branch-selected steady states on a (Δ_s, Δ) grid at one input power.

    Returns:
        (Δ, Δ_s, solution) triples in row-major order (rows follow Δ_s)
    """
    delta = np.asarray(delta_grid, dtype=float)
    delta_s = np.asarray(delta_s_grid, dtype=float)
    if delta.size == 0 or delta_s.size == 0:
        raise ConfigValidationError("detuning grids must be non-empty", key="grid")

    points = [(float(d), float(ds)) for ds in delta_s for d in delta]

    def solve(point):
        d, ds = point
        drive = drive_from_dbm(cav, power_dbm, delta=d, delta_s=ds, constants=constants)
        return d, ds, steady_state(cav, spins, drive, direction, method)

    return parallel_map(solve, points, threads=threads, desc=f"map {power_dbm:g} dBm")


# ============================================================================
# Bistability
# ============================================================================


def bistability_predicate(cav: CavityParams, spins: SpinEnsembleParams) -> float:
    """(4g²/κγ)(γ/(Γ + γ))²; values above 1 allow bistability."""
    gamma = spins.gamma
    return 4.0 * spins.g**2 / (cav.kappa * gamma) * (gamma / (spins.gamma_inh + gamma)) ** 2


def detect_bistability(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    powers_dbm: Sequence[float],
    drive: Optional[DriveParams] = None,
    method: SolverMethod = SolverMethod.EXACT,
    bins: Optional[SpinBins] = None,
    threads: Optional[int] = None,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> BistabilityReport:
    """Count stable roots along a monotone power grid.

    Args:
        cav: Cavity parameters
        spins: Spin ensemble
        powers_dbm: Strictly monotone powers (dBm)
        drive: Detuning template (resonant when omitted)
        method: Self-energy model
        bins: Line discretization for the binned method
        threads: Worker threads

    Returns:
        Report with the bistable powers, branch occupancies and the predicate
    """
    powers = np.asarray(powers_dbm, dtype=float)
    steps = np.diff(powers)
    if powers.ndim != 1 or powers.size == 0 or not (np.all(steps > 0) or np.all(steps < 0)):
        raise ConfigValidationError("power grid must be strictly monotone", key="powers_dbm")
    drive = drive or DriveParams()

    def roots_at(power):
        step_drive = drive_from_dbm(
            cav, power, delta=drive.delta, delta_s=drive.delta_s, constants=constants
        )
        return solve_occupancy(cav, spins, step_drive, method, bins)

    all_roots = parallel_map(roots_at, list(powers), threads=threads, desc="bistability scan")

    stable_counts = np.array([sum(s.stable for s in roots) for roots in all_roots])
    lower = np.array([min(s.alpha_sq for s in roots if s.stable) for roots in all_roots])
    upper = np.array([max(s.alpha_sq for s in roots if s.stable) for roots in all_roots])
    bistable = [float(p) for p, count in zip(powers, stable_counts) if count > 1]
    interval = (min(bistable), max(bistable)) if bistable else None
    predicate = bistability_predicate(cav, spins)

    logger.info(
        f"Bistability scan: {len(bistable)} of {powers.size} powers bistable, "
        f"predicate={predicate:.4g}",
        extra={"bistable_points": len(bistable), "predicate": predicate},
    )
    return BistabilityReport(
        powers_dbm=powers,
        stable_roots=stable_counts,
        bistable_powers_dbm=bistable,
        interval_dbm=interval,
        lower_branch_alpha_sq=lower,
        upper_branch_alpha_sq=upper,
        predicate=predicate,
    )


# ============================================================================
# Spin populations and energy bookkeeping
# ============================================================================


def steady_ensemble_state(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    drive: DriveParams,
    solution: SteadyStateSolution,
    bins: SpinBins,
) -> EnsembleState:
    """Binned spin state consistent with a steady-state cavity field.

    s_j = −i g_s w_j α/(γ/2 + iΔ_j), p_j = (1 − w_j)/2.
    """
    detuning = (drive.delta - drive.delta_s - spins.line_offsets)[:, None] - bins.offsets[None, :]
    w = spin_inversion(spins.g_s, solution.alpha_sq, spins.gamma, spins.gamma_p, detuning)
    s = -1j * spins.g_s * w * solution.alpha / (spins.gamma / 2.0 + 1j * detuning)
    return EnsembleState(alpha=solution.alpha, s=s, p=(1.0 - w) / 2.0)


def spin_bin_states(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    drive: DriveParams,
    solution: SteadyStateSolution,
    bins: SpinBins,
) -> List[SpinBinState]:
    """Per-bin steady state of every hyperfine line."""
    state = steady_ensemble_state(cav, spins, drive, solution, bins)
    return state.bin_states(bins, spins.line_offsets, drive.delta - drive.delta_s)


class EnergyBalance(BaseModel):
    """Photon-flux bookkeeping of one steady state (photons/s)."""

    model_config = ConfigDict(frozen=True)

    input_flux: float = Field(..., description="|β_in|²")
    output_flux: float = Field(..., description="|β_out|²")
    cavity_loss: float = Field(..., description="κ_c·|α|²")
    spin_absorption: float = Field(..., description="N·Σ weight·γ_p·p_j")

    @property
    def absorbed(self) -> float:
        return self.input_flux - self.output_flux

    @property
    def relative_mismatch(self) -> float:
        return abs(self.absorbed - self.cavity_loss - self.spin_absorption) / self.input_flux


def energy_balance(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    drive: DriveParams,
    solution: SteadyStateSolution,
    bins: SpinBins,
) -> EnergyBalance:
    """Input minus output flux against cavity loss plus spin absorption."""
    state = steady_ensemble_state(cav, spins, drive, solution, bins)
    beta_out = np.sqrt(cav.kappa_c1) * solution.alpha - drive.beta_in
    absorption = spins.n_spins * spins.gamma_p * float(np.sum(bins.weights * state.p))
    return EnergyBalance(
        input_flux=drive.beta_in**2,
        output_flux=abs(beta_out) ** 2,
        cavity_loss=cav.kappa_c * solution.alpha_sq,
        spin_absorption=absorption,
    )
