"""Command-line front end.

Exit codes: 0 success, 1 malformed input, 2 I/O failure, 3 optimization
finished above its error threshold (the best result is still written).
"""
import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from armd import __version__
from armd.analysis import (
    adiabatic_projection, adiabatic_spectrum, detect_phase_jumps, detuning_scan, dynamical_phase,
)
from armd.config import settings
from armd.dynamics import TrajectoryRecord, read_trajectory_csv, trajectory
from armd.exceptions import ArmdError, ConfigurationError, InvalidInputError
from armd.gates import GateReport, gate_report
from armd.logging_conf import log_error, log_function_call, log_gate_report, log_stage_execution, setup_logging
from armd.model import COMPUTATIONAL_NAMES, GateConfiguration
from armd.optimize import problem_from_document, result_document, search
from armd.presets import PRESET_DESCRIPTIONS, PRESET_NAMES, preset
from armd.pulse import TWO_PI, PulseSet, eval_waveform, waveform_metrics
from armd.pulse_file import parse_problem_file, read_pulse_file, serialize_pulse_file, write_pulse_file


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_IO = 2
EXIT_ABOVE_THRESHOLD = 3

_INFINITE = ("inf", "infinite")


class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors (exit 1), not argparse's exit 2."""

    def error(self, message):
        raise InvalidInputError(f"{self.prog}: {message}")


def _blockade_arg(text: str) -> float:
    if text.strip().lower() in _INFINITE:
        return math.inf
    value = float(text)
    if not (value > 0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError(f"blockade must be positive or 'inf', got {text}")
    return value


# =============================================================================
# SHARED HELPERS
# =============================================================================

def _write_json(path: Path, payload: Any) -> Path:
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path


def _out_dir(path: str) -> Path:
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def _with_overrides(config: GateConfiguration, delta: Optional[float],
                    blockade: Optional[float]) -> GateConfiguration:
    changes: Dict[str, Any] = {}
    if delta is not None:
        changes["delta_2pi_mhz"] = delta
    if blockade is not None:
        changes["blockade_2pi_mhz"] = None if math.isinf(blockade) else blockade
    if not changes:
        return config
    return GateConfiguration(**{**config.model_dump(), **changes})


def _load_gate(args) -> Tuple[GateConfiguration, PulseSet]:
    """Configuration and pulses from --preset or --pulse, with flag overrides."""
    if getattr(args, "preset", None):
        config, pulses = preset(args.preset)
    elif getattr(args, "pulse", None):
        config, pulses = read_pulse_file(args.pulse)
    else:
        raise InvalidInputError("give a source: --preset NAME or --pulse FILE")
    config = _with_overrides(config, args.delta, args.blockade)
    if config.requires_delta:
        raise ConfigurationError(
            f"the {config.scheme.value} scheme needs the one-photon detuning delta: "
            "pass --delta <2pi-MHz> or set delta_2pi_MHz in the pulse file"
        )
    return config, pulses


def _trajectories(config: GateConfiguration, pulses: PulseSet, n_steps: int) -> Dict[str, TrajectoryRecord]:
    return {name: trajectory(config, pulses, name, n_steps=n_steps) for name in COMPUTATIONAL_NAMES}


def _waveform_frame(config: GateConfiguration, pulses: PulseSet, times: np.ndarray) -> pd.DataFrame:
    columns = {"t_us": times}
    for name, w in pulses.items():
        columns[f"{name}_2pi_MHz"] = np.asarray(eval_waveform(w, times)) / TWO_PI
    return pd.DataFrame(columns)


def _simulate_into(directory: Path, config: GateConfiguration, pulses: PulseSet,
                   n_steps: int) -> Tuple[GateReport, Dict[str, TrajectoryRecord]]:
    report = gate_report(config, pulses, n_steps=n_steps)
    trajectories = _trajectories(config, pulses, n_steps)
    times = next(iter(trajectories.values())).times

    _waveform_frame(config, pulses, times).to_csv(directory / "waveforms.csv", index=False)
    for name, record in trajectories.items():
        record.to_csv(directory / f"trajectory_{name}.csv")
    _write_json(directory / "report.json", report.model_dump(mode="json"))
    write_pulse_file(directory / "pulse.json", config, pulses)
    _write_json(directory / "waveform_metrics.json", waveform_metrics(pulses, config.duration_us))
    return report, trajectories


def _analyze_into(directory: Path, trajectories: Dict[str, TrajectoryRecord],
                  gate: Optional[Tuple[GateConfiguration, PulseSet]],
                  detuning_max: Optional[float] = None, scan_points: int = 11,
                  n_steps: Optional[int] = None) -> Tuple[Dict[str, Any], Dict[str, Any]]:
    """Write the analysis files; returns the fastness summary and the phase split per input
    (both empty without a gate)."""
    jumps = {}
    for name, record in trajectories.items():
        label = record.initial_label
        jumps[name] = [] if label is None else [
            jump.model_dump() for jump in detect_phase_jumps(record, label)
        ]
    _write_json(directory / "jumps.json", jumps)

    if gate is None:
        logger.warning("No pulse file next to the trajectories; skipping phase and spectrum analysis")
        return {}, {}
    config, pulses = gate

    phases, projections = {}, {}
    for name, record in trajectories.items():
        try:
            phases[name] = dynamical_phase(record, config, pulses).model_dump()
        except ArmdError as exc:
            phases[name] = {"undefined": str(exc)}
        projection = adiabatic_projection(record, config, pulses)
        projections[name] = {
            "sector": projection.sector,
            "mean_dominant_weight": projection.mean_dominant_weight,
            "regime": projection.regime,
        }
    _write_json(directory / "phases.json", phases)
    _write_json(directory / "projection.json", projections)

    spectrum = adiabatic_spectrum(config, pulses)
    spectrum.to_frame().to_csv(directory / "spectrum.csv", index=False)
    summary = spectrum.summary()
    _write_json(directory / "fastness.json", summary)

    if detuning_max is not None:
        offsets = np.linspace(-detuning_max, detuning_max, scan_points)
        rows = [
            {
                "detuning_2pi_MHz": offset,
                "error": report.error,
                "fidelity": report.fidelity,
                "conditional_phase_rad": report.conditional_phase_rad,
            }
            for offset, report in detuning_scan(config, pulses, offsets.tolist(), n_steps=n_steps)
        ]
        pd.DataFrame(rows).to_csv(directory / "robustness.csv", index=False)
    return summary, phases


# =============================================================================
# COMMANDS
# =============================================================================

@log_function_call("simulate")
def cmd_simulate(args) -> int:
    config, pulses = _load_gate(args)
    directory = _out_dir(args.out)
    with log_stage_execution("simulate", scheme=config.scheme.value, n_steps=args.steps):
        report, _ = _simulate_into(directory, config, pulses, args.steps)
    log_gate_report(args.preset or args.pulse, report)
    return EXIT_OK


@log_function_call("optimize")
def cmd_optimize(args) -> int:
    text = Path(args.problem).read_text(encoding="utf-8")
    document, config, pulses = parse_problem_file(text)
    problem, search_settings = problem_from_document(document, config, pulses)
    overrides = {"jobs": args.jobs if args.jobs is not None else settings.default_jobs}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.max_evals is not None:
        overrides["max_evals"] = args.max_evals
    search_settings = search_settings.model_validate({**search_settings.model_dump(), **overrides})

    with log_stage_execution("optimize", algorithm=search_settings.algorithm, seed=search_settings.seed):
        result = search(problem, search_settings)

    out = Path(args.out)
    out.write_text(
        result_document(result, problem).model_dump_json(indent=2, by_alias=True, exclude_none=True) + "\n",
        encoding="utf-8",
    )
    return EXIT_OK if result.reached_threshold else EXIT_ABOVE_THRESHOLD


@log_function_call("analyze")
def cmd_analyze(args) -> int:
    directory = _out_dir(args.out)
    if args.trajectories:
        source = Path(args.trajectories)
        files = sorted(source.glob("trajectory_*.csv"))
        if not files:
            raise FileNotFoundError(f"no trajectory_*.csv files in {source}")
        trajectories = {path.stem[len("trajectory_"):]: read_trajectory_csv(path) for path in files}
        gate = None
        if (source / "pulse.json").exists():
            config, pulses = read_pulse_file(source / "pulse.json")
            gate = (_with_overrides(config, args.delta, args.blockade), pulses)
    else:
        config, pulses = _load_gate(args)
        trajectories = _trajectories(config, pulses, args.steps)
        gate = (config, pulses)

    with log_stage_execution("analyze", n_inputs=len(trajectories)):
        _analyze_into(directory, trajectories, gate, args.detuning_scan, args.scan_points, args.steps)
    return EXIT_OK


@log_function_call("presets")
def cmd_presets(args) -> int:
    if args.action == "list":
        for name in PRESET_NAMES:
            print(f"{name}\t{PRESET_DESCRIPTIONS[name]}")
        return EXIT_OK
    if not args.name:
        raise InvalidInputError(f"presets {args.action} needs a preset name")
    config, pulses = preset(args.name)
    if args.action == "show":
        sys.stdout.write(serialize_pulse_file(config, pulses))
        return EXIT_OK
    if not args.file:
        raise InvalidInputError("presets export needs a target file")
    write_pulse_file(args.file, config, pulses)
    return EXIT_OK


@log_function_call("reproduce")
def cmd_reproduce(args) -> int:
    args.preset, args.pulse, args.blockade = args.figure, None, None
    config, pulses = _load_gate(args)
    directory = _out_dir(args.out)

    with log_stage_execution("reproduce", figure=args.figure):
        report, trajectories = _simulate_into(directory, config, pulses, args.steps)
        summary, phases = _analyze_into(directory, trajectories, (config, pulses))

    row = {
        "figure": args.figure,
        "error": report.error,
        "raw_error": report.raw_error,
        "conditional_phase_rad": report.conditional_phase_rad,
        "fastness": summary["fastness"],
        "mean_gap_2pi_MHz": summary["mean_gap_2pi_MHz"],
    }
    for name in COMPUTATIONAL_NAMES:
        split = phases.get(name, {})
        row[f"total_phase_{name}_rad"] = split.get("total_phase_rad")
        row[f"dynamical_phase_{name}_rad"] = split.get("dynamical_phase_rad")
        row[f"dynamical_fraction_{name}"] = split.get("dynamical_fraction")
    pd.DataFrame([row]).to_csv(directory / "summary.csv", index=False)
    _write_json(directory / "provenance.json", {
        "figure": args.figure,
        "scheme": config.scheme.value,
        "delta_2pi_MHz": config.delta_2pi_mhz,
        "blockade_2pi_MHz": config.blockade_2pi_mhz,
        "n_steps": args.steps,
        "integrator": settings.integrator,
        "version": __version__,
    })
    log_gate_report(args.figure, report)
    return EXIT_OK


# =============================================================================
# PARSER
# =============================================================================

def _add_gate_source(parser: argparse.ArgumentParser, required_out: bool = True):
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--preset", choices=PRESET_NAMES, help="Published pulse set")
    source.add_argument("--pulse", help="Pulse file (JSON)")
    _add_physics(parser)
    parser.add_argument("--out", required=required_out, help="Output directory")


def _add_physics(parser: argparse.ArgumentParser):
    parser.add_argument("--delta", type=float, help="One-photon detuning in 2pi x MHz")
    parser.add_argument("--blockade", type=_blockade_arg, help="Blockade in 2pi x MHz, or 'inf'")
    parser.add_argument("--steps", type=int, default=settings.default_n_steps, help="Time steps")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="armd", description="ARMD Rydberg-blockade gate toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="Simulate a pulse set")
    _add_gate_source(simulate)
    simulate.set_defaults(handler=cmd_simulate)

    optimize = commands.add_parser("optimize", help="Search pulse coefficients")
    optimize.add_argument("problem", help="Problem file (JSON)")
    optimize.add_argument("--out", required=True, help="Result file (JSON)")
    optimize.add_argument("--seed", type=int, help="Override the problem's seed")
    optimize.add_argument("--jobs", type=int, help="Worker processes")
    optimize.add_argument("--max-evals", type=int, dest="max_evals", help="Evaluations per restart")
    optimize.set_defaults(handler=cmd_optimize)

    analyze = commands.add_parser("analyze", help="Phase, spectrum and robustness diagnostics")
    source = analyze.add_mutually_exclusive_group()
    source.add_argument("--preset", choices=PRESET_NAMES, help="Published pulse set")
    source.add_argument("--pulse", help="Pulse file (JSON)")
    source.add_argument("--trajectories", help="Directory written by simulate")
    _add_physics(analyze)
    analyze.add_argument("--out", required=True, help="Output directory")
    analyze.add_argument("--detuning-scan", type=float, dest="detuning_scan",
                         help="Scan a uniform Rydberg detuning over [-MAX, MAX] (2pi x MHz)")
    analyze.add_argument("--scan-points", type=int, dest="scan_points", default=11)
    analyze.set_defaults(handler=cmd_analyze)

    presets = commands.add_parser("presets", help="List, show or export presets")
    presets.add_argument("action", choices=("list", "show", "export"))
    presets.add_argument("name", nargs="?")
    presets.add_argument("file", nargs="?")
    presets.set_defaults(handler=cmd_presets)

    reproduce = commands.add_parser("reproduce", help="Simulate and analyze a published figure")
    reproduce.add_argument("figure", choices=PRESET_NAMES)
    reproduce.add_argument("--delta", type=float, help="One-photon detuning in 2pi x MHz (fig3, fig4)")
    reproduce.add_argument("--steps", type=int, default=settings.default_n_steps)
    reproduce.add_argument("--out", required=True, help="Output directory")
    reproduce.set_defaults(handler=cmd_reproduce)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    setup_logging()
    try:
        args = build_parser().parse_args(argv)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    try:
        return args.handler(args)
    except ValueError as exc:
        log_error(exc, args.command)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        log_error(exc, args.command)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
