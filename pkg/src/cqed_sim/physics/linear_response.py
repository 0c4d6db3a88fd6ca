"""Weak-drive reflection spectroscopy of the inhomogeneous Tavis–Cummings system.

In the linear regime every spin stays polarized and the reflection coefficient is

    r = −1 + κ_c1 / (κ/2 + iΔ + g² Σ_k ∫ P_k(ω′)/(γ/2 + i(ω_d − ω′)) dω′)

with one term per hyperfine sub-ensemble k.
"""

import logging
from typing import List, Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.integrate import quad, trapezoid
from scipy.signal import find_peaks

from cqed_sim.exceptions import ConfigValidationError
from cqed_sim.models.device import CavityParams, DriveParams, LineShape, SpinEnsembleParams
from cqed_sim.models.spectra import (
    DistributionKind,
    InhomogeneousDistribution,
    ReflectionMap,
    ReflectionPoint,
)

logger = logging.getLogger(__name__)

# Quadrature window for non-Lorentzian lines, in units of the FWHM
QUADRATURE_WINDOW_FWHM = 20.0
QUADRATURE_RTOL = 1e-6


def susceptibility(dist: InhomogeneousDistribution, omega_d, gamma: float):
    """Integral ∫ P(ω′)/(γ/2 + i(ω_d − ω′)) dω′ (the line factor of Σ without g²).

    Args:
        dist: Spin-frequency distribution
        omega_d: Drive frequency, scalar or array (rad/s, same frame as dist.center)
        gamma: Homogeneous spin linewidth γ (rad/s)

    Returns:
        Complex susceptibility (s), scalar or array matching omega_d

    Raises:
        ConfigValidationError: If gamma is not positive
    """
    if gamma <= 0:
        raise ConfigValidationError(f"gamma must be positive, got {gamma}", key="gamma")

    omega_d = np.asarray(omega_d, dtype=float)

    if dist.kind == DistributionKind.LORENTZIAN:
        result = 1.0 / ((gamma + dist.fwhm) / 2.0 + 1j * (omega_d - dist.center))

    elif dist.kind == DistributionKind.SAMPLED:
        kernel = 1.0 / (
            gamma / 2.0 + 1j * (omega_d[..., None] - dist.omega[None, :])
        )
        result = trapezoid(dist.density[None, :] * kernel, dist.omega, axis=-1)
        result = result.reshape(omega_d.shape)

    else:
        result = np.vectorize(lambda w: _adaptive_susceptibility(dist, w, gamma))(
            omega_d
        )

    return complex(result) if result.ndim == 0 else result


def _adaptive_susceptibility(
    dist: InhomogeneousDistribution, omega_d: float, gamma: float
) -> complex:
    """Adaptive quadrature over ±20 FWHM for analytic non-Lorentzian densities."""
    lo = dist.center - QUADRATURE_WINDOW_FWHM * dist.fwhm
    hi = dist.center + QUADRATURE_WINDOW_FWHM * dist.fwhm
    points = [p for p in (omega_d, dist.center) if lo < p < hi]

    value, _ = quad(
        lambda w: dist.pdf(w) / (gamma / 2.0 + 1j * (omega_d - w)),
        lo,
        hi,
        points=points or None,
        epsrel=QUADRATURE_RTOL,
        epsabs=0.0,
        limit=500,
        complex_func=True,
    )
    return complex(value)


def line_distributions(
    cav: CavityParams, spins: SpinEnsembleParams, drive: DriveParams
) -> List[InhomogeneousDistribution]:
    """One distribution per hyperfine line, centered at ω_s + offset_k (absolute rad/s)."""
    kind = (
        DistributionKind.LORENTZIAN
        if spins.lineshape == LineShape.LORENTZIAN
        else DistributionKind.GAUSSIAN
    )
    omega_s = drive.omega_s(cav)
    return [
        InhomogeneousDistribution(kind=kind, center=omega_s + off, fwhm=spins.gamma_inh)
        for off in spins.line_offsets
    ]


def linear_self_energy(
    cav: CavityParams, spins: SpinEnsembleParams, drive: DriveParams
) -> complex:
    """g²·Σ_k susceptibility_k at the drive frequency (rad/s)."""
    omega_d = drive.omega_d(cav)
    total = sum(
        susceptibility(dist, omega_d, spins.gamma)
        for dist in line_distributions(cav, spins, drive)
    )
    return spins.g**2 * total


def reflection_from_self_energy(cav: CavityParams, delta, sigma):
    """r = −1 + κ_c1/(κ/2 + iΔ + Σ)."""
    return -1.0 + cav.kappa_c1 / (cav.kappa / 2.0 + 1j * delta + sigma)


def reflection_linear(
    cav: CavityParams, spins: SpinEnsembleParams, drive: DriveParams
) -> ReflectionPoint:
    """Weak-drive reflection coefficient summed over all sub-ensembles.

    Never saturates; the weak-drive assumption is the caller's responsibility.

    Example:
        >>> point = reflection_linear(cav, spins, DriveParams())
        >>> round(point.abs_r2, 3)
    """
    sigma = linear_self_energy(cav, spins, drive)
    r = reflection_from_self_energy(cav, drive.delta, sigma)
    return ReflectionPoint(r=complex(r), delta=drive.delta, delta_s=drive.delta_s)


def _check_grid(grid: Sequence[float], name: str) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ConfigValidationError("grid must be a non-empty 1-D sequence", key=name)
    if grid.size > 1:
        steps = np.diff(grid)
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise ConfigValidationError("grid must be strictly monotone", key=name)
    return grid


def reflection_map(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    delta_grid: Sequence[float],
    delta_s_grid: Sequence[float],
) -> ReflectionMap:
    """Linear reflection on a (Δ_s, Δ) grid.

    Lorentzian lines use the closed form; Gaussian lines are integrated on a sampled
    grid (±20 FWHM) shared by all drive detunings.

    Raises:
        ConfigValidationError: If a grid is empty or not monotone
    """
    delta = _check_grid(delta_grid, "delta_grid")
    delta_s = _check_grid(delta_s_grid, "delta_s_grid")

    # Work relative to the cavity frequency: drive at Δ, lines at Δ_s + offset_k.
    sigma = np.zeros((delta_s.size, delta.size), dtype=complex)
    for off in spins.line_offsets:
        for i, ds in enumerate(delta_s):
            dist = InhomogeneousDistribution(
                kind=(
                    DistributionKind.LORENTZIAN
                    if spins.lineshape == LineShape.LORENTZIAN
                    else DistributionKind.GAUSSIAN
                ),
                center=ds + off,
                fwhm=spins.gamma_inh,
            )
            if dist.kind != DistributionKind.LORENTZIAN:
                dist = dist.sampled(n_points=20_001, window=QUADRATURE_WINDOW_FWHM)
            sigma[i, :] += susceptibility(dist, delta, spins.gamma)
    sigma *= spins.g**2

    r = reflection_from_self_energy(cav, delta[None, :], sigma)
    logger.debug(
        f"Computed reflection map {delta_s.size}x{delta.size}",
        extra={"rows": int(delta_s.size), "cols": int(delta.size)},
    )
    return ReflectionMap(delta_grid=delta, delta_s_grid=delta_s, r=r)


def polariton_frequencies(
    cav: CavityParams, spins: SpinEnsembleParams, delta_s: float = 0.0
) -> List[complex]:
    """Complex poles of the linear reflection coefficient in the drive detuning Δ.

    Each Lorentzian line contributes a factor a_k(Δ) = (γ+Γ)/2 + i(Δ − Δ_s − offset_k);
    the reflection denominator times Π_k a_k is a polynomial of degree n_hyperfine + 1.
    Real parts are polariton detunings from ω_c, imaginary parts their half-widths.

    Returns:
        Roots sorted by real part (rad/s)
    """
    half_width = (spins.gamma + spins.gamma_inh) / 2.0
    factors = [
        np.array([half_width - 1j * (delta_s + off), 1j]) for off in spins.line_offsets
    ]

    poly = np.array([cav.kappa / 2.0, 1j])
    for f in factors:
        poly = P.polymul(poly, f)

    for k in range(len(factors)):
        others = np.array([1.0 + 0j])
        for l, f in enumerate(factors):
            if l != k:
                others = P.polymul(others, f)
        poly = P.polyadd(poly, spins.g**2 * others)

    roots = P.polyroots(poly)
    return sorted((complex(z) for z in roots), key=lambda z: z.real)


def is_strong_coupling(cav: CavityParams, spins: SpinEnsembleParams) -> bool:
    """Strong coupling predicate g > κ/2 and g > Γ/2."""
    return spins.g > max(cav.kappa / 2.0, spins.gamma_inh / 2.0)


def anticrossing_centers(
    cav: CavityParams, spins: SpinEnsembleParams, delta_s_grid: Sequence[float]
) -> np.ndarray:
    """Spin detunings at which the polariton spectrum shows an avoided crossing.

    For each Δ_s the smallest spacing between adjacent polariton frequencies is
    computed; avoided crossings are its local minima, refined by a parabola through
    the neighbouring grid points.
    """
    grid = _check_grid(delta_s_grid, "delta_s_grid")
    gaps = np.empty(grid.size)
    for i, ds in enumerate(grid):
        freqs = np.array([z.real for z in polariton_frequencies(cav, spins, ds)])
        gaps[i] = np.min(np.diff(freqs))

    minima, _ = find_peaks(-gaps)
    centers = []
    for m in minima:
        y0, y1, y2 = gaps[m - 1], gaps[m], gaps[m + 1]
        denom = y0 - 2.0 * y1 + y2
        shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
        centers.append(grid[m] + shift * (grid[m + 1] - grid[m]))
    return np.array(centers)


def reflection_dips(delta_grid: Sequence[float], abs_r2: Sequence[float]) -> np.ndarray:
    """Drive detunings of local minima of a |r|² cut."""
    delta = np.asarray(delta_grid, dtype=float)
    idx, _ = find_peaks(-np.asarray(abs_r2, dtype=float))
    return delta[idx]
