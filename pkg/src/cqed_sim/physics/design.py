"""Design-space exploration: diamond volume, NV density, cavity Q and coupling.

Each design cell builds an ensemble from a diamond description, then runs the
first-order operating-point optimizer. Densities above the optical polarization
limit are clipped to the limit and the cell is flagged infeasible.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from contourpy import contour_generator
from scipy.optimize import minimize_scalar

from cqed_sim.exceptions import ConfigValidationError
from cqed_sim.models.design import (
    CARBON_DENSITY_CM3,
    DEFAULT_GAMMA_P_CAP,
    HYPERFINE_FRACTION,
    LINEWIDTH_PER_PPM,
    ORIENTATION_FRACTION,
    POLARIZATION_LIMIT,
    REFERENCE_ASPECT_RATIO,
    REFERENCE_G,
    REFERENCE_MODE_VOLUME_CM3,
    REFERENCE_RHO_PPM,
    REFERENCE_VD_CM3,
    CavityDesign,
    DesignCell,
    DesignMap,
    DiamondDesign,
)
from cqed_sim.models.device import (
    DEFAULT_CONSTANTS,
    TWO_PI,
    CavityParams,
    PhysicalConstants,
    SpinEnsembleParams,
)
from cqed_sim.models.noise import SYSTEM_TEMPERATURE, NoiseEnvironment
from cqed_sim.models.sensing import DEFAULT_CONVERSION, FieldConversion, OperatingPoint
from cqed_sim.physics.sensitivity import optimize_operating_point
from cqed_sim.utils.logging_config import simulation_stage_logger
from cqed_sim.utils.parallel import parallel_map

logger = logging.getLogger(__name__)

CONTOUR_LEVELS = (2e-15, 10e-15, 100e-15, 1000e-15)
DESIGN_POWER_BOUNDS = (-60.0, 30.0)
DESIGN_GRID = (40, 1)


# ============================================================================
# Calibration and constraints
# ============================================================================


def spin_count(rho_ppm: float, vd_cm3: float) -> float:
    """Spins in one resonant sub-ensemble: ρ·n_C·V_d·(1/4)·(1/3)."""
    return (
        rho_ppm * 1e-6 * CARBON_DENSITY_CM3 * vd_cm3 * ORIENTATION_FRACTION * HYPERFINE_FRACTION
    )


def calibrate_gs(
    g: float = REFERENCE_G,
    rho_ppm: float = REFERENCE_RHO_PPM,
    vd_cm3: float = REFERENCE_VD_CM3,
) -> float:
    """Single-spin coupling g_s0 = g/√N of a characterized reference device (rad/s)."""
    if not (rho_ppm > 0 and vd_cm3 > 0):
        raise ConfigValidationError("reference density and volume must be positive", key="reference")
    return float(g / np.sqrt(spin_count(rho_ppm, vd_cm3)))


def coupling_for_volume(
    g_s0: float, mode_volume_cm3: float, reference_volume_cm3: float = REFERENCE_MODE_VOLUME_CM3
) -> float:
    """g_s = g_s0·√(V0/V)."""
    return float(g_s0 * np.sqrt(reference_volume_cm3 / mode_volume_cm3))


def volume_for_coupling(
    g_s0: float, g_s: float, reference_volume_cm3: float = REFERENCE_MODE_VOLUME_CM3
) -> float:
    """Mode volume (cm³) that yields single-spin coupling ``g_s``."""
    return float(reference_volume_cm3 * (g_s0 / g_s) ** 2)


def linewidth_from_density(rho_ppm: float) -> float:
    """Inhomogeneous FWHM Γ = 2π·82.5 kHz·ρ (rad/s)."""
    if not rho_ppm > 0:
        raise ConfigValidationError(f"rho_ppm must be positive, got {rho_ppm}", key="rho_ppm")
    return LINEWIDTH_PER_PPM * rho_ppm


def max_density(vd_cm3: float, aspect_ratio: float = REFERENCE_ASPECT_RATIO) -> float:
    """Largest density (ppm) the pump laser can polarize in a diamond of volume V_d."""
    return POLARIZATION_LIMIT * (aspect_ratio / REFERENCE_ASPECT_RATIO) / vd_cm3


def polarization_feasible(
    rho_ppm: float, vd_cm3: float, aspect_ratio: float = REFERENCE_ASPECT_RATIO
) -> bool:
    """ρ·V_d ≤ 0.49 cm³·ppm·(aspect/2.2)."""
    limit = POLARIZATION_LIMIT * (aspect_ratio / REFERENCE_ASPECT_RATIO)
    return bool(rho_ppm * vd_cm3 <= limit * (1 + 1e-12))


def optimal_diamond(
    mode_volume_cm3: float = REFERENCE_MODE_VOLUME_CM3,
    aspect_ratio: float = REFERENCE_ASPECT_RATIO,
) -> DiamondDesign:
    """Unit-fill diamond at the polarization boundary."""
    return DiamondDesign(
        rho_ppm=max_density(mode_volume_cm3, aspect_ratio),
        vd_cm3=mode_volume_cm3,
        aspect_ratio=aspect_ratio,
        mode_volume_cm3=mode_volume_cm3,
    )


def build_ensemble(
    template: SpinEnsembleParams,
    rho_ppm: float,
    vd_cm3: float,
    g_s: float,
    gamma_p: Optional[float] = None,
) -> SpinEnsembleParams:
    """Ensemble of a diamond: N from the density, Γ from the density-linewidth law."""
    update = {
        "g_s": float(g_s),
        "n_spins": spin_count(rho_ppm, vd_cm3),
        "gamma_inh": linewidth_from_density(rho_ppm),
    }
    if gamma_p is not None:
        update["gamma_p"] = float(gamma_p)
    return template.model_copy(update=update)


def cavity_from_design(template: CavityParams, design: CavityDesign) -> CavityParams:
    """Cavity with κ_c = ω_c/Q and κ_c1 = coupling_ratio·κ_c."""
    kappa_c = template.omega_c / design.q
    return CavityParams(
        omega_c=template.omega_c,
        kappa_c=kappa_c,
        kappa_c1=design.coupling_ratio * kappa_c,
        mode_volume=design.mode_volume_cm3 * 1e-6,
    )


def coupling_limited_floor(
    cav: CavityParams,
    g_s: float,
    temperature: float = SYSTEM_TEMPERATURE,
    conversion: FieldConversion = DEFAULT_CONVERSION,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> float:
    """Smallest η (T/√Hz) a resonant readout reaches against a thermal floor at ``temperature``.

    Maximizing S over drive and cooperativity leaves

        η_min = √(k_B·T)·√8·g_s / (2π·2√(ħω_c·κ_c1)·A)

    independent of N, Γ and the termination resistance.
    """
    numerator = np.sqrt(constants.k_B * temperature * 8.0) * g_s
    denominator = TWO_PI * 2.0 * np.sqrt(constants.hbar * cav.omega_c * cav.kappa_c1) * conversion.a_hz
    return float(numerator / denominator)


# ============================================================================
# Single design point
# ============================================================================


def evaluate_design(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    env: NoiseEnvironment,
    diamond: DiamondDesign,
    g_s: float,
    gamma_p_cap: float = DEFAULT_GAMMA_P_CAP,
    power_bounds_dbm: Tuple[float, float] = DESIGN_POWER_BOUNDS,
    grid: Tuple[int, int] = DESIGN_GRID,
    conversion: FieldConversion = DEFAULT_CONVERSION,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
    phase_noise: bool = False,
) -> Tuple[OperatingPoint, float]:
    """Optimal operating point of one diamond, clipping ρ to the polarization limit.

    Cells are compared on the thermal floor; source phase noise enters only with
    ``phase_noise``.

    Returns:
        (operating point, density actually evaluated in ppm)
    """
    if not phase_noise and env.phase_noise_enabled:
        env = env.with_updates(phase_noise_enabled=False)
    rho = min(diamond.rho_ppm, max_density(diamond.vd_cm3, diamond.aspect_ratio))
    ensemble = build_ensemble(spins, rho, diamond.vd_cm3, g_s, gamma_p_cap)
    op = optimize_operating_point(
        cav,
        ensemble,
        env,
        power_bounds_dbm=power_bounds_dbm,
        gamma_p_bounds=(gamma_p_cap, gamma_p_cap),
        grid=grid,
        threads=1,
        conversion=conversion,
        constants=constants,
    )
    return op, rho


# ============================================================================
# Maps
# ============================================================================


def extract_contours(
    x_grid: np.ndarray, y_grid: np.ndarray, eta: np.ndarray, levels: Sequence[float]
) -> dict:
    """η contour polylines, interpolated on log axes and returned in linear (x, y)."""
    if x_grid.size < 2 or y_grid.size < 2:
        return {float(level): [] for level in levels}
    with np.errstate(divide="ignore"):
        z = np.ma.masked_invalid(np.log10(eta))
    generator = contour_generator(x=np.log10(x_grid), y=np.log10(y_grid), z=z)
    contours = {}
    for level in levels:
        lines = generator.lines(np.log10(level))
        contours[float(level)] = [10.0 ** np.asarray(line) for line in lines]
    return contours


def _assemble(
    x_name: str,
    y_name: str,
    x_grid: np.ndarray,
    y_grid: np.ndarray,
    cells: List[DesignCell],
    levels: Sequence[float],
) -> DesignMap:
    shape = (y_grid.size, x_grid.size)
    eta = np.array([c.eta for c in cells]).reshape(shape)
    return DesignMap(
        x_name=x_name,
        y_name=y_name,
        x_grid=x_grid,
        y_grid=y_grid,
        eta=eta,
        feasible=np.array([c.feasible for c in cells]).reshape(shape),
        bistable=np.array([c.bistable for c in cells]).reshape(shape),
        cells=cells,
        contours=extract_contours(x_grid, y_grid, eta, levels),
    )


def sensitivity_map_diamond(
    rho_grid: Sequence[float],
    vd_grid: Sequence[float],
    cav: CavityParams,
    spins: SpinEnsembleParams,
    env: NoiseEnvironment,
    g_s: Optional[float] = None,
    aspect_ratio: float = REFERENCE_ASPECT_RATIO,
    gamma_p_cap: float = DEFAULT_GAMMA_P_CAP,
    levels: Sequence[float] = CONTOUR_LEVELS,
    power_bounds_dbm: Tuple[float, float] = DESIGN_POWER_BOUNDS,
    grid: Tuple[int, int] = DESIGN_GRID,
    threads: Optional[int] = None,
    conversion: FieldConversion = DEFAULT_CONVERSION,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
    phase_noise: bool = False,
) -> DesignMap:
    """Optimal η over NV density (columns) and diamond volume (rows) in a fixed cavity.

    Args:
        rho_grid: Densities (ppm)
        vd_grid: Diamond volumes (cm³), at most the cavity mode volume
        cav: Cavity holding the diamond
        spins: Template ensemble supplying γ_0, hyperfine structure and lineshape
        env: Noise environment
        g_s: Single-spin coupling; calibrated from the reference device when omitted
        aspect_ratio: Diamond aspect ratio entering the polarization limit
        gamma_p_cap: Optical pump rate (rad/s)
        levels: Contour levels (T/√Hz)
        threads: Worker threads across cells
        phase_noise: Include source phase noise in each cell

    Returns:
        DesignMap with rows following vd_grid
    """
    rho_grid = np.asarray(rho_grid, dtype=float)
    vd_grid = np.asarray(vd_grid, dtype=float)
    mode_volume_cm3 = cav.mode_volume * 1e6
    if rho_grid.size == 0 or vd_grid.size == 0 or np.any(rho_grid <= 0) or np.any(vd_grid <= 0):
        raise ConfigValidationError("design grids must be non-empty and positive", key="grid")
    if np.any(vd_grid > mode_volume_cm3 * (1 + 1e-12)):
        raise ConfigValidationError(
            f"diamond volume exceeds the mode volume {mode_volume_cm3:.4g} cm3", key="vd_grid"
        )
    g_s = calibrate_gs() if g_s is None else g_s

    def cell(index):
        i, j = divmod(index, rho_grid.size)
        diamond = DiamondDesign(
            rho_ppm=rho_grid[j],
            vd_cm3=vd_grid[i],
            aspect_ratio=aspect_ratio,
            mode_volume_cm3=mode_volume_cm3,
        )
        op, rho = evaluate_design(
            cav, spins, env, diamond, g_s, gamma_p_cap, power_bounds_dbm, grid, conversion, constants, phase_noise
        )
        return DesignCell(
            x=float(rho_grid[j]),
            y=float(vd_grid[i]),
            eta=op.eta,
            feasible=polarization_feasible(rho_grid[j], vd_grid[i], aspect_ratio),
            rho_ppm=rho,
            vd_cm3=float(vd_grid[i]),
            power_dbm=op.power_dbm,
            bistable=op.bistable,
        )

    n_cells = rho_grid.size * vd_grid.size
    with simulation_stage_logger("design_map_diamond", cells=n_cells):
        cells = parallel_map(cell, list(range(n_cells)), threads=threads, desc="diamond map")
    return _assemble("rho_ppm", "vd_cm3", rho_grid, vd_grid, cells, levels)


def _best_density(
    cav: CavityParams,
    spins: SpinEnsembleParams,
    env: NoiseEnvironment,
    vd_cm3: float,
    g_s: float,
    aspect_ratio: float,
    gamma_p_cap: float,
    rho_points: int,
    rho_span: float,
    power_bounds_dbm: Tuple[float, float],
    grid: Tuple[int, int],
    conversion: FieldConversion,
    constants: PhysicalConstants,
    phase_noise: bool,
) -> Tuple[OperatingPoint, float]:
    """Scan log ρ up to the polarization limit, then refine an interior minimum."""
    rho_max = max_density(vd_cm3, aspect_ratio)
    log_rhos = np.linspace(np.log10(rho_max * rho_span), np.log10(rho_max), rho_points)

    def evaluate(log_rho):
        diamond = DiamondDesign(
            rho_ppm=10.0**log_rho,
            vd_cm3=vd_cm3,
            aspect_ratio=aspect_ratio,
            mode_volume_cm3=vd_cm3,
        )
        return evaluate_design(
            cav, spins, env, diamond, g_s, gamma_p_cap, power_bounds_dbm, grid, conversion, constants, phase_noise
        )

    results = [evaluate(lr) for lr in log_rhos]
    k = int(np.argmin([op.eta for op, _ in results]))
    if 0 < k < log_rhos.size - 1:
        refined = minimize_scalar(
            lambda lr: evaluate(lr)[0].eta,
            bounds=(log_rhos[k - 1], log_rhos[k + 1]),
            method="bounded",
            options={"xatol": 1e-3},
        )
        candidate = evaluate(float(refined.x))
        if candidate[0].eta < results[k][0].eta:
            return candidate
    return results[k]


def sensitivity_map_cavity(
    q_grid: Sequence[float],
    gs_grid: Sequence[float],
    cav: CavityParams,
    spins: SpinEnsembleParams,
    env: NoiseEnvironment,
    g_s0: Optional[float] = None,
    reference_volume_cm3: float = REFERENCE_MODE_VOLUME_CM3,
    coupling_ratio: float = 125.0 / 130.0,
    aspect_ratio: float = REFERENCE_ASPECT_RATIO,
    gamma_p_cap: float = DEFAULT_GAMMA_P_CAP,
    rho_points: int = 6,
    rho_span: float = 1e-2,
    levels: Sequence[float] = CONTOUR_LEVELS,
    power_bounds_dbm: Tuple[float, float] = DESIGN_POWER_BOUNDS,
    grid: Tuple[int, int] = DESIGN_GRID,
    threads: Optional[int] = None,
    conversion: FieldConversion = DEFAULT_CONVERSION,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
    phase_noise: bool = False,
) -> DesignMap:
    """Optimal η over unloaded Q (columns) and single-spin coupling (rows).

    Every cavity is filled with diamond (V_d = V, with V implied by g_s) and the
    density is optimized up to the polarization limit.

    Args:
        q_grid: Unloaded quality factors
        gs_grid: Single-spin couplings (rad/s)
        cav: Template cavity supplying ω_c
        spins: Template ensemble
        env: Noise environment
        g_s0: Coupling at the reference mode volume; calibrated when omitted
        rho_points: Density scan points per cell
        rho_span: Lowest scanned density as a fraction of the limit
        phase_noise: Include source phase noise in each cell

    Returns:
        DesignMap with x = Q and y = g_s/2π (Hz)
    """
    q_grid = np.asarray(q_grid, dtype=float)
    gs_grid = np.asarray(gs_grid, dtype=float)
    if q_grid.size == 0 or gs_grid.size == 0 or np.any(q_grid <= 0) or np.any(gs_grid <= 0):
        raise ConfigValidationError("design grids must be non-empty and positive", key="grid")
    if rho_points < 1 or not 0 < rho_span <= 1:
        raise ConfigValidationError("invalid density scan", key="rho_points")
    g_s0 = calibrate_gs() if g_s0 is None else g_s0

    def cell(index):
        i, j = divmod(index, q_grid.size)
        volume = volume_for_coupling(g_s0, gs_grid[i], reference_volume_cm3)
        design = CavityDesign(
            q=q_grid[j], mode_volume_cm3=volume, g_s=gs_grid[i], coupling_ratio=coupling_ratio
        )
        cavity = cavity_from_design(cav, design)
        op, rho = _best_density(
            cavity,
            spins,
            env,
            volume,
            gs_grid[i],
            aspect_ratio,
            gamma_p_cap,
            rho_points,
            rho_span,
            power_bounds_dbm,
            grid,
            conversion,
            constants,
            phase_noise,
        )
        return DesignCell(
            x=float(q_grid[j]),
            y=float(gs_grid[i] / TWO_PI),
            eta=op.eta,
            feasible=True,
            rho_ppm=rho,
            vd_cm3=volume,
            power_dbm=op.power_dbm,
            bistable=op.bistable,
        )

    n_cells = q_grid.size * gs_grid.size
    with simulation_stage_logger("design_map_cavity", cells=n_cells):
        cells = parallel_map(cell, list(range(n_cells)), threads=threads, desc="cavity map")
    return _assemble("q", "gs_hz", q_grid, gs_grid / TWO_PI, cells, levels)
