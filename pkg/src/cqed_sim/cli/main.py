"""Command-line front end for the simulator.

Usage:
    cqed-sim spectrum --preset paper-device --output output/spectrum.csv
    cqed-sim sensitivity --preset paper-device --optimize --format json
    cqed-sim design-map diamond --contours 2,10,100,1000 --output output/diamond.csv

Every subcommand resolves a RunConfig (preset or JSON file), logs it, runs and writes
CSV or JSON. Exit codes: 0 success, 1 numerical failure, 2 invalid configuration,
3 I/O failure.
"""

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from constants import LOG_LEVEL
from cqed_sim.config import (
    DEFAULT_PRESET,
    PresetLoader,
    RunConfig,
    format_validation_error,
    load_config,
)
from cqed_sim.exceptions import ConfigValidationError, CqedSimError, NumericalError
from cqed_sim.models.device import TWO_PI
from cqed_sim.models.dynamics import EnsembleState
from cqed_sim.models.measurement import FieldWaveform, WaveformKind
from cqed_sim.physics.design import sensitivity_map_cavity, sensitivity_map_diamond
from cqed_sim.physics.dynamics import hysteresis_sweep, integrate, line_bins
from cqed_sim.physics.linear_response import is_strong_coupling, reflection_map
from cqed_sim.physics.measurement import (
    coil_field,
    recover_field,
    readout_noise_profile,
    synthesize_trace,
    welch_psd,
)
from cqed_sim.physics.noise import cooling_depth, noise_budget, phase_noise_crossover
from cqed_sim.physics.nonlinear import nonlinear_map, saturation_threshold, steady_state
from cqed_sim.physics.sensitivity import (
    broadband_spectrum,
    evaluate_operating_point,
    optimize_operating_point,
    readout_fidelity,
    reference_sensitivity,
    room_temperature_limit,
)
from cqed_sim.utils.file_io import write_csv, write_json, write_trace
from cqed_sim.utils.logging_config import configure_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_INVALID = 2
EXIT_IO = 3

BROADBAND_POINTS = 101

SUBCOMMANDS = (
    "spectrum",
    "nonlinear-map",
    "simulate",
    "noise",
    "sensitivity",
    "design-map",
    "measure",
)


# ============================================================================
# Argument parsing
# ============================================================================


def _add_common(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--preset", help="Named preset (default: paper-device)")
    source.add_argument("--config", type=Path, help="JSON configuration file")
    parser.add_argument("--output", type=Path, help="Output file (default: output/<command>.<format>)")
    parser.add_argument("--format", choices=["csv", "json"], default="csv", help="Output format")
    parser.add_argument("--threads", type=int, help="Worker threads (default: CQED_SIM_THREADS or all cores)")
    parser.add_argument("--log-level", default=LOG_LEVEL, help="Logging level (default: %(default)s)")
    parser.add_argument("--seed", type=int, help="Override the measurement seed")
    parser.add_argument(
        "--dump-config",
        action="store_true",
        help="Print the resolved configuration as JSON and exit",
    )


def build_parser() -> argparse.ArgumentParser:
    """Parser with one sub-parser per subcommand."""
    parser = argparse.ArgumentParser(
        prog="cqed-sim",
        description="Cavity-QED spin-ensemble magnetometer simulator",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Linear reflection map of the characterized device
  cqed-sim spectrum --preset paper-device --output output/spectrum.csv

  # Optimize the operating point and report the sensitivity
  cqed-sim sensitivity --preset paper-device --optimize --format json

  # Diamond design map with contour polylines
  cqed-sim design-map diamond --contours 2,10,100,1000 --output output/diamond.csv

  # Synthesize a calibration trace and recover the coil field
  cqed-sim measure --preset paper-device --seed 7 --output output/psd.csv
        """,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    spectrum = sub.add_parser("spectrum", help="Linear reflection map over (Δ, Δ_s)")
    spectrum.add_argument("--grid", choices=["default", "coarse"], default="default")

    nl_map = sub.add_parser("nonlinear-map", help="Nonlinear steady-state map at one power")
    nl_map.add_argument("--power-dbm", type=float, help="Override drive.power_dbm")
    nl_map.add_argument("--grid", choices=["default", "coarse"], default="default")

    simulate = sub.add_parser("simulate", help="Integrate the equations of motion")
    simulate.add_argument("--mode", choices=["trajectory", "hysteresis"], default="trajectory")
    simulate.add_argument("--t-end", type=float, help="Integration time (s)")

    sub.add_parser("noise", help="Noise budget and spin cooling at the configured drive")

    sensitivity = sub.add_parser("sensitivity", help="Signal, noise and magnetic sensitivity")
    sensitivity.add_argument("--optimize", action="store_true", help="Optimize power and pump rate")
    sensitivity.add_argument(
        "--broadband", action="store_true", help="Include η over field frequency in JSON output"
    )

    design = sub.add_parser("design-map", help="Design-space sensitivity maps")
    design.add_argument("kind", choices=["diamond", "cavity"])
    design.add_argument("--contours", help="Comma-separated η levels in fT/√Hz")

    sub.add_parser("measure", help="Synthesize a detector trace and recover the field")

    for name in SUBCOMMANDS:
        _add_common(sub.choices[name])
    return parser


# ============================================================================
# Helpers
# ============================================================================


def resolve_config(args: argparse.Namespace) -> RunConfig:
    if args.config:
        config = load_config(args.config)
    else:
        config = PresetLoader().load(args.preset or DEFAULT_PRESET)
    if args.seed is not None:
        measurement = config.measurement.model_copy(update={"seed": args.seed})
        config = config.model_copy(update={"measurement": measurement})
    return config


def output_path(args: argparse.Namespace) -> Path:
    return args.output or Path("output") / f"{args.command}.{args.format}"


def write_rows(rows: List[Dict[str, Any]], args: argparse.Namespace, extra: Optional[dict] = None) -> Path:
    path = output_path(args)
    if args.format == "json":
        write_json({**(extra or {}), "rows": rows}, path)
    else:
        write_csv(rows, path)
    return path


def _grid(span: float, points: int) -> np.ndarray:
    return np.linspace(-span, span, points) if points > 1 else np.zeros(1)


def _spectrum_grids(config: RunConfig, coarse: bool):
    opts = config.spectrum
    n_d = 41 if coarse else opts.delta_points
    n_s = 13 if coarse else opts.delta_s_points
    return (
        TWO_PI * _grid(opts.delta_span_hz, n_d),
        TWO_PI * _grid(opts.delta_s_span_hz, n_s),
    )


def _log_banner(title: str, config: RunConfig, args: argparse.Namespace) -> None:
    cav, spins = config.cavity, config.spins
    logger.info("=" * 80)
    logger.info(title)
    logger.info("=" * 80)
    logger.info(f"Source: {args.config or args.preset or DEFAULT_PRESET}")
    logger.info(f"Cavity: f_c={cav.f_c_hz:.6g} Hz, kappa_c={cav.kappa_c_hz:.4g} Hz, kappa_c1={cav.kappa_c1_hz:.4g} Hz, V={cav.V_cm3:.4g} cm3")
    logger.info(f"Spins: {spins.model_dump(exclude_none=True)}")
    logger.info(f"Drive: {config.drive.model_dump()}")
    logger.info(f"Output: {output_path(args)} ({args.format})")
    if args.threads:
        logger.info(f"Threads: {args.threads}")
    logger.info("=" * 80)


def _log_summary(title: str, items: Dict[str, Any]) -> None:
    logger.info("\n" + "=" * 80)
    logger.info(title)
    logger.info("=" * 80)
    for key, value in items.items():
        logger.info(f"{key}: {value}")
    logger.info("=" * 80)


# ============================================================================
# Subcommands
# ============================================================================


def cmd_spectrum(config: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    cav, spins = config.cavity_params(), config.spin_params()
    delta, delta_s = _spectrum_grids(config, args.grid == "coarse")
    result = reflection_map(cav, spins, delta, delta_s)
    rows = [
        {
            "delta_hz": d / TWO_PI,
            "delta_s_hz": ds / TWO_PI,
            "re_r": r.real,
            "im_r": r.imag,
            "abs_r2": abs(r) ** 2,
        }
        for d, ds, r in result.rows()
    ]
    strong = is_strong_coupling(cav, spins)
    path = write_rows(rows, args, {"strong_coupling": strong})
    return {"Points": len(rows), "Strong coupling": strong, "Output": path}


def cmd_nonlinear_map(config: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    cav, spins = config.cavity_params(), config.spin_params()
    power = args.power_dbm if args.power_dbm is not None else config.drive.power_dbm
    if power is None:
        raise ConfigValidationError("a drive power is required", key="drive.power_dbm")
    delta, delta_s = _spectrum_grids(config, args.grid == "coarse")
    solutions = nonlinear_map(
        cav,
        spins,
        power,
        delta,
        delta_s,
        direction=config.solver.direction,
        method=config.solver.method,
        threads=args.threads,
    )
    rows = [
        {
            "power_dbm": power,
            "delta_hz": d / TWO_PI,
            "delta_s_hz": ds / TWO_PI,
            "alpha_sq": s.alpha_sq,
            "chi": s.chi,
            "c_alpha": s.c_alpha,
            "re_r": s.r.real,
            "im_r": s.r.imag,
            "branch": s.branch.value,
            "abs_r2": abs(s.r) ** 2,
        }
        for d, ds, s in solutions
    ]
    path = write_rows(rows, args, {"power_dbm": power})
    return {"Power (dBm)": power, "Points": len(rows), "Output": path}


def cmd_simulate(config: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    cav, spins = config.cavity_params(), config.spin_params()
    integrator = config.integrator
    bins = line_bins(spins, integrator.n_bins)
    settle = args.t_end or config.sweep.t_end_s

    if args.mode == "hysteresis":
        sweep = config.sweep
        up = np.linspace(sweep.power_min_dbm, sweep.power_max_dbm, sweep.points)
        powers = np.concatenate([up, up[-2::-1]])
        drive = config.drive.to_params(cav)
        trace = hysteresis_sweep(cav, spins, powers, integrator, drive, bins, settle)
        rows = [
            {"step": i, "power_dbm": p, "alpha_sq": n, "direction": "up" if i <= trace.turning_index else "down"}
            for i, (p, n) in enumerate(zip(trace.powers_dbm.tolist(), trace.alpha_sq.tolist()))
        ]
        path = write_rows(rows, args)
        return {"Sweep points": len(rows), "Output": path}

    drive = config.drive_params()
    t_end = settle or 100.0 / min(cav.kappa, spins.gamma_p)
    state0 = EnsembleState.polarized(spins.n_hyperfine, bins.size)
    trajectory = integrate(state0, cav, spins, drive, integrator, t_end, bins)
    rows = [
        {"t_s": t, "re_alpha": a.real, "im_alpha": a.imag, "alpha_sq": abs(a) ** 2, "mean_inversion": w}
        for t, a, w in zip(trajectory.t.tolist(), trajectory.alpha.tolist(), trajectory.mean_inversion.tolist())
    ]
    path = write_rows(rows, args, {"steady": trajectory.steady, "steps": trajectory.steps})
    return {
        "Samples": len(rows),
        "Steady": trajectory.steady,
        "Final |alpha|^2": f"{trajectory.final_state.alpha_sq:.6g}",
        "Accepted steps": trajectory.steps,
        "Output": path,
    }


def cmd_noise(config: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    cav, spins, env = config.cavity_params(), config.spin_params(), config.environment()
    drive = config.drive_params()
    solution = steady_state(cav, spins, drive, config.solver.direction, config.solver.method)
    budget = noise_budget(cav, spins, drive, env, solution)
    depth = cooling_depth(cav, spins, drive, env)
    try:
        crossover = phase_noise_crossover(cav, spins, env, drive.with_updates(beta_in=0.0))
    except NumericalError as e:
        logger.warning(f"No phase-noise crossover: {e}")
        crossover = None

    fractions = budget.channel_fractions
    row = {
        "power_dbm": config.drive.power_dbm,
        "offset_hz": budget.offset_hz,
        "psd_v2hz_total": budget.total,
        "psd_v2hz_thermal_port": budget.thermal_port,
        "psd_v2hz_thermal_cavity": budget.thermal_cavity,
        "psd_v2hz_thermal_spin": budget.thermal_spin,
        "psd_v2hz_phase": budget.phase,
        "psd_v2hz_amplifier": budget.amplifier,
        "cooling_db": depth,
        "fraction_port": fractions.port,
        "fraction_cavity": fractions.cavity,
        "fraction_spin": fractions.spin,
        "t_spin_k": budget.t_spin,
        "phase_noise_crossover_dbm": "" if crossover is None else crossover,
    }
    path = write_rows([row], args)
    return {"Total noise (V^2/Hz)": f"{budget.total:.4g}", "Cooling depth (dB)": f"{depth:.3f}", "Output": path}


def cmd_sensitivity(config: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    cav, spins, env = config.cavity_params(), config.spin_params(), config.environment()
    if args.optimize:
        opts = config.optimizer
        op = optimize_operating_point(
            cav,
            spins,
            env,
            power_bounds_dbm=tuple(opts.power_bounds_dbm),
            gamma_p_bounds=tuple(TWO_PI * g for g in opts.gamma_p_bounds_hz),
            grid=tuple(opts.grid),
            threads=args.threads,
        )
    else:
        if config.drive.power_dbm is None:
            raise ConfigValidationError("a drive power is required", key="drive.power_dbm")
        op = evaluate_operating_point(
            cav, spins, env, config.drive.power_dbm, direction=config.solver.direction, with_cooling=True
        )

    eta_0, improvement = room_temperature_limit(cav, spins, env, op)
    summary = {
        "optimal_power_dbm": op.power_dbm,
        "gamma_p_hz": op.gamma_p / TWO_PI,
        "eta_ft_sqrthz": op.eta_ft,
        "cooling_db": op.cooling_db,
        "eta_t_sqrthz": op.eta,
        "signal_v_per_hz": op.signal,
        "noise_v2_per_hz": op.noise,
        "chi": op.chi,
        "c_alpha": op.c_alpha,
        "bistable": op.bistable,
        "on_boundary": op.on_boundary,
        "optimized": bool(args.optimize),
        "reference_eta_ft_sqrthz": reference_sensitivity(op.signal_device, env.resistance) * 1e15,
        "room_temperature_eta_ft_sqrthz": eta_0 * 1e15,
        "relative_improvement": improvement,
        "readout_fidelity": readout_fidelity(op.eta, spins),
        "saturation_power_dbm": saturation_threshold(cav, spins).power_dbm,
    }
    spectrum = broadband_spectrum(cav, spins, env, op, np.geomspace(1.0, 1e5, BROADBAND_POINTS))
    rows = [
        {"f_hz": f, "eta_t_sqrthz": e, "eta_instrument": i, "ambient": a}
        for f, e, i, a in zip(
            spectrum.f_hz.tolist(),
            spectrum.eta.tolist(),
            spectrum.eta_instrument.tolist(),
            spectrum.ambient.tolist(),
        )
    ]

    path = output_path(args)
    if args.format == "json":
        payload = dict(summary)
        if args.broadband:
            payload["broadband"] = rows
        write_json(payload, path)
    else:
        write_csv(rows, path)
        write_json(summary, path.with_suffix(".summary.json"))
    return {"Sensitivity (fT/sqrt(Hz))": f"{op.eta_ft:.1f}", "Power (dBm)": f"{op.power_dbm:.2f}", "Output": path}


def _parse_levels(text: Optional[str], default: Sequence[float]) -> List[float]:
    if not text:
        return [float(v) for v in default]
    try:
        levels = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigValidationError(f"invalid contour list '{text}'", key="contours") from e
    if not levels or any(v <= 0 for v in levels):
        raise ConfigValidationError("contour levels must be positive", key="contours")
    return levels


def cmd_design_map(config: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    cav, spins, env = config.cavity_params(), config.spin_params(), config.environment()
    opts = config.design
    levels_ft = _parse_levels(args.contours, opts.contours_ft)
    levels = [v * 1e-15 for v in levels_ft]
    nx, ny = opts.points
    cap = TWO_PI * opts.gamma_p_cap_hz

    if args.kind == "diamond":
        design_map = sensitivity_map_diamond(
            np.geomspace(*opts.rho_range_ppm, nx),
            np.geomspace(*opts.vd_range_cm3, ny),
            cav,
            spins,
            env,
            aspect_ratio=opts.aspect_ratio,
            gamma_p_cap=cap,
            levels=levels,
            threads=args.threads,
            phase_noise=opts.phase_noise,
        )
    else:
        design_map = sensitivity_map_cavity(
            np.geomspace(*opts.q_range, nx),
            TWO_PI * np.geomspace(*opts.gs_range_hz, ny),
            cav,
            spins,
            env,
            aspect_ratio=opts.aspect_ratio,
            gamma_p_cap=cap,
            levels=levels,
            threads=args.threads,
            phase_noise=opts.phase_noise,
        )

    x_name, y_name = design_map.x_name, design_map.y_name
    rows = [
        {
            x_name: c.x,
            y_name: c.y,
            "eta_t_sqrthz": c.eta,
            "feasible": c.feasible,
            "bistable": c.bistable,
            "rho_evaluated_ppm": c.rho_ppm,
            "power_dbm": c.power_dbm,
        }
        for c in design_map.cells
    ]
    contours = {
        f"{level * 1e15:g}": [line.tolist() for line in lines]
        for level, lines in design_map.contours.items()
    }
    path = write_rows(rows, args)
    contour_path = path.with_suffix(".contours.json")
    write_json({"x": x_name, "y": y_name, "levels_ft_sqrthz": levels_ft, "contours": contours}, contour_path)
    best = min(design_map.cells, key=lambda c: c.eta)
    return {
        "Cells": len(rows),
        "Best eta (fT/sqrt(Hz))": f"{best.eta * 1e15:.2f} at {x_name}={best.x:.4g}, {y_name}={best.y:.4g}",
        "Output": path,
        "Contours": contour_path,
    }


def cmd_measure(config: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    cav, spins, env = config.cavity_params(), config.spin_params(), config.environment()
    scenario = config.measurement
    if config.drive.power_dbm is None:
        raise ConfigValidationError("a drive power is required", key="drive.power_dbm")
    op = evaluate_operating_point(cav, spins, env, config.drive.power_dbm)

    waveform = scenario.waveform
    if scenario.coil is not None and waveform.kind != WaveformKind.ZERO:
        waveform = FieldWaveform(**{**waveform.model_dump(), "amplitude_t": coil_field(scenario.coil)})

    trace = synthesize_trace(
        op,
        waveform,
        fs=scenario.fs_hz,
        duration=scenario.duration_s,
        seed=scenario.seed,
        psd=readout_noise_profile(cav, spins, env, op, f_max=scenario.fs_hz / 2.0),
        linear_range_t=scenario.linear_range_t,
    )
    recovery = recover_field(
        trace,
        op,
        frequency_hz=waveform.frequency_hz if waveform.kind == WaveformKind.SINE else None,
        t_on_s=waveform.t_on_s if waveform.kind == WaveformKind.STEP else None,
        segment_len=scenario.segment_len,
        references=scenario.references_t,
    )
    psd = welch_psd(trace, min(scenario.segment_len or 8192, trace.samples.size))

    path = output_path(args)
    if args.format == "json":
        write_json({"psd": psd.rows()}, path)
    else:
        write_csv(psd.rows(), path)
    trace_path = path.with_name(path.stem + "_trace.npy")
    write_trace(trace.samples, trace.fs, trace_path)
    summary = {
        "applied_t": waveform.amplitude_t,
        **recovery.model_dump(),
        "eta_ft_sqrthz": op.eta_ft,
    }
    write_json(summary, path.with_name(path.stem + "_recovery.json"))
    return {
        "Applied field (uT)": f"{waveform.amplitude_t * 1e6:.4g}",
        "Recovered field (uT)": f"{recovery.amplitude_t * 1e6:.4g}",
        "SNR": f"{recovery.snr:.3g}",
        "Reference errors": recovery.reference_errors,
        "Output": path,
        "Trace": trace_path,
    }


COMMANDS = {
    "spectrum": cmd_spectrum,
    "nonlinear-map": cmd_nonlinear_map,
    "simulate": cmd_simulate,
    "noise": cmd_noise,
    "sensitivity": cmd_sensitivity,
    "design-map": cmd_design_map,
    "measure": cmd_measure,
}


# ============================================================================
# Entry points
# ============================================================================


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, dispatch the subcommand and map failures to exit codes."""
    args = build_parser().parse_args(argv)
    configure_logging(level=args.log_level.upper())

    try:
        config = resolve_config(args)
        if args.dump_config:
            text = json.dumps(config.dump(), indent=2)
            if args.output:
                args.output.parent.mkdir(parents=True, exist_ok=True)
                args.output.write_text(text + "\n", encoding="utf-8")
            else:
                sys.stdout.write(text + "\n")
            return EXIT_OK

        _log_banner(f"cqed-sim {args.command}", config, args)
        start = time.time()
        summary = COMMANDS[args.command](config, args)
        summary["Elapsed (s)"] = f"{time.time() - start:.2f}"
        _log_summary(f"{args.command.upper()} SUMMARY", summary)
        return EXIT_OK

    except ValidationError as e:
        logger.error(f"Invalid configuration: {format_validation_error(e)}")
        return EXIT_INVALID
    except ConfigValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_INVALID
    except OSError as e:
        logger.error(f"I/O failure: {e}")
        return EXIT_IO
    except CqedSimError as e:
        diagnostics = getattr(e, "diagnostics", None)
        logger.error(f"Simulation failed: {e}", extra={"diagnostics": diagnostics} if diagnostics else {})
        return EXIT_NUMERICAL


def main() -> int:
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
