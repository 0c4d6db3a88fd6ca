"""Run configuration: file-level models in ordinary Hz and preset loading.

Frequencies in configuration files are ordinary Hz; they are converted to angular
units exactly once, when the runtime parameter models are built.
"""

import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from constants import PRESETS_DIR
from cqed_sim.exceptions import ConfigValidationError
from cqed_sim.models.design import DEFAULT_GAMMA_P_CAP
from cqed_sim.models.device import (
    TWO_PI,
    CavityParams,
    DriveParams,
    LineShape,
    SpinEnsembleParams,
)
from cqed_sim.models.dynamics import IntegratorConfig
from cqed_sim.models.measurement import MeasurementScenario
from cqed_sim.models.noise import (
    DEFAULT_AMBIENT_FIELD,
    DEFAULT_NOISE_FIGURE_DB,
    DEFAULT_PHASE_NOISE,
    CoolingReference,
    NoiseEnvironment,
)
from cqed_sim.models.steady_state import SolverMethod, SweepDirection
from cqed_sim.physics.design import (
    calibrate_gs,
    coupling_for_volume,
    linewidth_from_density,
    spin_count,
)
from cqed_sim.physics.units import drive_from_dbm
from cqed_sim.utils.file_io import read_json

logger = logging.getLogger(__name__)

PACKAGE_PRESETS_DIR = Path(__file__).parent / "presets"
DEFAULT_PRESET = "paper-device"
# Older names kept loadable
PRESET_ALIASES = {"reference-device": DEFAULT_PRESET}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ============================================================================
# Device blocks
# ============================================================================


class CavityConfig(_Strict):
    f_c_hz: float = Field(default=2.87e9, gt=0)
    kappa_c_hz: float = Field(default=130e3, ge=0)
    kappa_c1_hz: float = Field(default=125e3, ge=0)
    V_cm3: float = Field(default=1.7, gt=0)

    def to_params(self) -> CavityParams:
        return CavityParams(
            omega_c=TWO_PI * self.f_c_hz,
            kappa_c=TWO_PI * self.kappa_c_hz,
            kappa_c1=TWO_PI * self.kappa_c1_hz,
            mode_volume=self.V_cm3 * 1e-6,
        )


class SpinConfig(_Strict):
    """Spin ensemble given by exactly one of: ``g_hz``, ``g_s_hz`` + ``N``, or a diamond."""

    g_hz: Optional[float] = Field(default=None, gt=0, description="Collective coupling g/2π")
    g_s_hz: Optional[float] = Field(default=None, gt=0, description="Single-spin coupling g_s/2π")
    N: Optional[float] = Field(default=None, gt=0, description="Spins per sub-ensemble")
    rho_ppm: Optional[float] = Field(default=None, gt=0)
    vd_cm3: Optional[float] = Field(default=None, gt=0)
    gamma_fwhm_hz: Optional[float] = Field(default=None, gt=0, description="Inhomogeneous FWHM Γ/2π")
    gamma_p_hz: float = Field(default=30e3, ge=0)
    gamma_0_hz: float = Field(default=3e3, ge=0)
    A_zz_hz: float = Field(default=2.1e6, ge=0)
    n_hyperfine: int = Field(default=3, ge=1)
    lineshape: LineShape = LineShape.LORENTZIAN

    @model_validator(mode="after")
    def check_description(self) -> "SpinConfig":
        forms = [
            self.g_hz is not None,
            self.g_s_hz is not None or self.N is not None,
            self.rho_ppm is not None or self.vd_cm3 is not None,
        ]
        if sum(forms) != 1:
            raise ValueError("give exactly one of g_hz, g_s_hz+N or rho_ppm+vd_cm3")
        if forms[1] and (self.g_s_hz is None or self.N is None):
            raise ValueError("g_s_hz and N must be given together")
        if forms[2] and (self.rho_ppm is None or self.vd_cm3 is None):
            raise ValueError("rho_ppm and vd_cm3 must be given together")
        if not forms[2] and self.gamma_fwhm_hz is None:
            raise ValueError("gamma_fwhm_hz is required unless a diamond is described")
        return self

    def to_params(self, mode_volume_cm3: float) -> SpinEnsembleParams:
        """Runtime ensemble; g_s follows the reference calibration scaled to the mode volume."""
        if self.g_s_hz is not None:
            g_s, n_spins = TWO_PI * self.g_s_hz, self.N
        else:
            g_s = coupling_for_volume(calibrate_gs(), mode_volume_cm3)
            if self.g_hz is not None:
                n_spins = (TWO_PI * self.g_hz / g_s) ** 2
            else:
                n_spins = spin_count(self.rho_ppm, self.vd_cm3)
        gamma_inh = (
            TWO_PI * self.gamma_fwhm_hz
            if self.gamma_fwhm_hz is not None
            else linewidth_from_density(self.rho_ppm)
        )
        return SpinEnsembleParams(
            g_s=g_s,
            n_spins=n_spins,
            gamma_inh=gamma_inh,
            gamma_0=TWO_PI * self.gamma_0_hz,
            gamma_p=TWO_PI * self.gamma_p_hz,
            a_zz=TWO_PI * self.A_zz_hz,
            n_hyperfine=self.n_hyperfine,
            lineshape=self.lineshape,
        )


class DriveConfig(_Strict):
    power_dbm: Optional[float] = Field(default=-18.0, description="None means no drive")
    delta_hz: float = 0.0
    delta_s_hz: float = 0.0

    def to_params(self, cav: CavityParams) -> DriveParams:
        delta, delta_s = TWO_PI * self.delta_hz, TWO_PI * self.delta_s_hz
        if self.power_dbm is None:
            return DriveParams(delta=delta, delta_s=delta_s)
        return drive_from_dbm(cav, self.power_dbm, delta, delta_s)


class NoiseConfig(_Strict):
    t_port_k: Optional[float] = Field(default=None, gt=0)
    t_cavity_k: Optional[float] = Field(default=None, gt=0)
    t_ambient_k: float = Field(default=300.0, gt=0)
    t_spin_k: Optional[float] = Field(default=None, ge=0)
    amp_noise_figure_db: float = Field(default=DEFAULT_NOISE_FIGURE_DB, ge=0)
    power_gain_db: float = 36.5
    resistance_ohm: float = Field(default=50.0, gt=0)
    phase_noise: List[Tuple[float, float]] = Field(default_factory=lambda: list(DEFAULT_PHASE_NOISE))
    phase_noise_enabled: bool = True
    ambient_field: List[Tuple[float, float]] = Field(
        default_factory=lambda: list(DEFAULT_AMBIENT_FIELD)
    )
    ambient_field_enabled: bool = True
    offset_hz: float = Field(default=15e3, gt=0)
    detuned_delta_s_hz: float = 5e6
    cooling_reference: CoolingReference = CoolingReference.DETUNED

    def to_environment(self) -> NoiseEnvironment:
        return NoiseEnvironment(
            t_port=self.t_port_k,
            t_cavity=self.t_cavity_k,
            t_ambient=self.t_ambient_k,
            t_spin=self.t_spin_k,
            amp_noise_figure_db=self.amp_noise_figure_db,
            power_gain_db=self.power_gain_db,
            resistance=self.resistance_ohm,
            phase_noise=self.phase_noise,
            phase_noise_enabled=self.phase_noise_enabled,
            ambient_field=self.ambient_field,
            ambient_field_enabled=self.ambient_field_enabled,
            offset_hz=self.offset_hz,
            detuned_delta_s=TWO_PI * self.detuned_delta_s_hz,
            cooling_reference=self.cooling_reference,
        )


# ============================================================================
# Subcommand options
# ============================================================================


class SolverConfig(_Strict):
    method: SolverMethod = SolverMethod.EXACT
    direction: SweepDirection = SweepDirection.UP
    n_bins: int = Field(default=2001, ge=1, description="Bins per line for the binned method")


class SpectrumOptions(_Strict):
    delta_span_hz: float = Field(default=3e6, gt=0, description="Δ/2π from −span to +span")
    delta_s_span_hz: float = Field(default=6e6, gt=0)
    delta_points: int = Field(default=401, ge=2)
    delta_s_points: int = Field(default=121, ge=1)


class SweepOptions(_Strict):
    power_min_dbm: float = -50.0
    power_max_dbm: float = -8.0
    points: int = Field(default=43, ge=2)
    t_end_s: Optional[float] = Field(default=None, gt=0, description="Per-point settle time")


class OptimizerOptions(_Strict):
    power_bounds_dbm: Tuple[float, float] = (-50.0, 0.0)
    gamma_p_bounds_hz: Tuple[float, float] = (1e3, 30e3)
    grid: Tuple[int, int] = (50, 50)


class DesignOptions(_Strict):
    rho_range_ppm: Tuple[float, float] = (0.01, 100.0)
    vd_range_cm3: Tuple[float, float] = (1e-4, 1.7)
    q_range: Tuple[float, float] = (1e3, 1e6)
    gs_range_hz: Tuple[float, float] = (1e-3, 1.0)
    points: Tuple[int, int] = (20, 20)
    gamma_p_cap_hz: float = Field(default=DEFAULT_GAMMA_P_CAP / TWO_PI, gt=0)
    aspect_ratio: float = Field(default=2.2, gt=0)
    contours_ft: List[float] = Field(default_factory=lambda: [2.0, 10.0, 100.0, 1000.0])
    phase_noise: bool = Field(default=False, description="Include source phase noise in design cells")


class RunConfig(_Strict):
    """Complete, validated configuration of one CLI run."""

    cavity: CavityConfig = Field(default_factory=CavityConfig)
    spins: SpinConfig = Field(
        default_factory=lambda: SpinConfig(g_hz=190e3, gamma_fwhm_hz=330e3)
    )
    drive: DriveConfig = Field(default_factory=DriveConfig)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    integrator: IntegratorConfig = Field(default_factory=IntegratorConfig)
    spectrum: SpectrumOptions = Field(default_factory=SpectrumOptions)
    sweep: SweepOptions = Field(default_factory=SweepOptions)
    optimizer: OptimizerOptions = Field(default_factory=OptimizerOptions)
    design: DesignOptions = Field(default_factory=DesignOptions)
    measurement: MeasurementScenario = Field(default_factory=MeasurementScenario)

    def cavity_params(self) -> CavityParams:
        return self.cavity.to_params()

    def spin_params(self) -> SpinEnsembleParams:
        return self.spins.to_params(self.cavity.V_cm3)

    def drive_params(self) -> DriveParams:
        return self.drive.to_params(self.cavity_params())

    def environment(self) -> NoiseEnvironment:
        return self.noise.to_environment()

    def dump(self) -> dict:
        return self.model_dump(mode="json")


# ============================================================================
# Loading
# ============================================================================


def format_validation_error(error: ValidationError) -> str:
    """One line per problem, each naming the dotted key."""
    lines = []
    for item in error.errors():
        key = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{key}: {item['msg']}")
    return "; ".join(lines)


def parse_config(data: dict) -> RunConfig:
    """Validate a configuration mapping.

    Raises:
        ConfigValidationError: Naming the first offending key
    """
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]["loc"] if e.errors() else ()
        error = ConfigValidationError(format_validation_error(e))
        error.key = ".".join(str(p) for p in first) or None
        raise error from e


def load_config(file_path: Union[str, Path]) -> RunConfig:
    return parse_config(read_json(file_path))


class PresetLoader:
    """Loads named configuration presets from JSON files."""

    def __init__(self, presets_dir: Union[str, Path, None] = None):
        """Initialize loader.

        Args:
            presets_dir: Directory of ``<name>.json`` presets (defaults to
                CQED_SIM_PRESETS_DIR, then the presets shipped with the package)
        """
        self.presets_dir = Path(presets_dir or PRESETS_DIR or PACKAGE_PRESETS_DIR)

    def available(self) -> List[str]:
        """Preset names, hyphenated (``paper-device``)."""
        return sorted(p.stem.replace("_", "-") for p in self.presets_dir.glob("*.json"))

    def path_for(self, name: str) -> Path:
        name = PRESET_ALIASES.get(name, name)
        return self.presets_dir / f"{name.replace('-', '_')}.json"

    def load(self, name: str) -> RunConfig:
        """Load and validate a preset.

        Raises:
            ConfigValidationError: If the preset does not exist or is invalid
        """
        path = self.path_for(name)
        if not path.exists():
            raise ConfigValidationError(
                f"Preset '{name}' not found in {self.presets_dir}. "
                f"Available: {', '.join(self.available()) or 'none'}",
                key="preset",
            )
        logger.debug(f"Loading preset {name} from {path}")
        return load_config(path)
