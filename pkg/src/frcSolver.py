################################################################################
# FILE: frcSolver.py
# DESCRIPTION: Command-line entry point. Builds or loads a model, sweeps the
#              excitation frequency for one or more forcing amplitudes and
#              writes FRC tables, the run report and plot data.
# AUTHOR: MSCRNT LLC
#
# THIS CODE IS PROPRIETARY PROPERTY OF MSCRNT LLC.
################################################################################

import os
import sys
import json
import logging
import logging.handlers
import argparse
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from dotenv import load_dotenv

# Load environment variables from .env file (before the local modules read their settings)
load_dotenv()

from model import build_oscillator_chain, load_model, uniform_sine_forcing, ModelError
from modal import compute_modes, truncate, project_forcing, UnsupportedModelError, ModeSelectionError
from green import check_nonresonance, linear_response
from collocation import build_grid, assemble_convolution
from solvers import (SolverConfig, SolverError, ModalForce, solve_steady_state, check_contraction,
                     STRATEGIES, REFORMULATED, ORIGINAL)
from continuation import SweepConfig, ContinuationError, sweep, DIRECTIONS, MAX_ABS_ALL_DOFS
from oracle import integrate_to_steady_state, compare_orbit, OracleError
from frc_output import write_frc_csv, write_plot_data, write_report, curve_summary, report_tables
from plot_generator import generate_frc_image

# Configure logging
LOG_DIR = os.getenv("FRC_LOG_DIR", "logs")
os.makedirs(LOG_DIR, exist_ok=True)
log_file = os.path.join(LOG_DIR, "frcSolver.log")

logger = logging.getLogger("frcSolver")
logger.setLevel(logging.INFO)
if not logger.handlers:
    handler = logging.handlers.TimedRotatingFileHandler(log_file, when="midnight", interval=1, backupCount=7, utc=True)
    handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(message)s'))
    logger.addHandler(handler)

# Read defaults from .env (fallback to built-in values if not set)
OUT_DIR = os.getenv("FRC_OUT_DIR", "out")
DEFAULT_N = int(os.getenv("FRC_N", 128))
DEFAULT_TOL = float(os.getenv("FRC_TOL", 1e-9))
DEFAULT_MAX_PICARD = int(os.getenv("FRC_MAX_PICARD", 1000))
DEFAULT_MAX_NEWTON = int(os.getenv("FRC_MAX_NEWTON", 25))
DEFAULT_STRATEGY = os.getenv("FRC_STRATEGY", "picard_then_newton")
DEFAULT_WORKERS = int(os.getenv("FRC_WORKERS", 1))

DEFAULT_CHAIN = (20, 1.0, 1.0, 1.0, 0.5)
ORACLE_POINTS = 3
FORMULATION_CHOICES = (REFORMULATED, ORIGINAL, "both")


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass(frozen=True)
class RunConfig:
    model_path: str = None
    chain: tuple = DEFAULT_CHAIN
    mode_indices: tuple = None
    reduced_modes: tuple = None
    omega_start: float = None
    omega_end: float = None
    steps: int = 0
    force_amps: tuple = (0.01,)
    N: int = DEFAULT_N
    tol: float = DEFAULT_TOL
    max_picard: int = DEFAULT_MAX_PICARD
    max_newton: int = DEFAULT_MAX_NEWTON
    strategy: str = DEFAULT_STRATEGY
    formulation: str = REFORMULATED
    direction: str = "up"
    metric: str = MAX_ABS_ALL_DOFS
    oracle_check: bool = False
    out_dir: str = OUT_DIR
    workers: int = DEFAULT_WORKERS
    plot: bool = False
    contraction: bool = True

    def __post_init__(self):
        if self.omega_start is None or self.omega_end is None or int(self.steps) < 2:
            raise ConfigError("Empty frequency list: give --omega start:end:steps with steps >= 2.")
        if not (self.omega_start > 0 and self.omega_end > 0):
            raise ConfigError(f"Frequencies must be positive, got {self.omega_start}:{self.omega_end}.")
        if not self.force_amps:
            raise ConfigError("At least one forcing amplitude is required.")
        if self.formulation not in FORMULATION_CHOICES:
            raise ConfigError(f"Unknown formulation '{self.formulation}', expected one of {FORMULATION_CHOICES}.")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"Unknown strategy '{self.strategy}', expected one of {STRATEGIES}.")
        if self.direction not in DIRECTIONS:
            raise ConfigError(f"Unknown direction '{self.direction}', expected one of {DIRECTIONS}.")
        if int(self.workers) < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}.")
        if self.model_path is None and (self.chain is None or len(self.chain) != 5):
            raise ConfigError("Builtin chain needs five parameters n,m,k,c,kappa.")

    @property
    def formulations(self):
        return (REFORMULATED, ORIGINAL) if self.formulation == "both" else (self.formulation,)

    def solver_config(self, formulation):
        try:
            return SolverConfig(tol=self.tol, max_picard=self.max_picard, max_newton=self.max_newton,
                                strategy=self.strategy, formulation=formulation)
        except SolverError as e:
            raise ConfigError(str(e)) from e

    def sweep_config(self):
        try:
            return SweepConfig(self.omega_start, self.omega_end, int(self.steps), self.direction,
                               self.metric, int(self.N))
        except ContinuationError as e:
            raise ConfigError(str(e)) from e


# Value parsers (flags are strings, JSON config values may already be typed) ------

def _floats(value):
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    return tuple(float(v) for v in str(value).split(",") if v.strip())


def _flag(value):
    """JSON booleans pass through; strings must spell true or false."""
    if isinstance(value, str):
        text = value.strip().lower()
        if text not in ("true", "false"):
            raise ConfigError(f"Expected true or false, got '{value}'.")
        return text == "true"
    return bool(value)


def parse_indices(value):
    """'1,2,3' or '1-3' (or a JSON list) -> (1, 2, 3)."""
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    indices = []
    for part in str(value).split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            indices.extend(range(int(lo), int(hi) + 1))
        elif part:
            indices.append(int(part))
    return tuple(indices)


def parse_omega(value):
    """'a:b:steps' (or {start, end, steps}) -> (a, b, steps)."""
    if isinstance(value, dict):
        return float(value["start"]), float(value["end"]), int(value["steps"])
    parts = str(value).split(":")
    if len(parts) != 3:
        raise ConfigError(f"Frequency range must look like start:end:steps, got '{value}'.")
    return float(parts[0]), float(parts[1]), int(parts[2])


def parse_chain(value):
    chain = _floats(value)
    if len(chain) != 5:
        raise ConfigError(f"--chain needs n,m,k,c,kappa, got '{value}'.")
    return (int(chain[0]),) + chain[1:]


def build_parser():
    parser = argparse.ArgumentParser(
        prog="frcSolver",
        description="Forced response curves of periodically forced nonlinear mechanical systems.")
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--model", help="JSON model file")
    source.add_argument("--chain", help="builtin oscillator chain n,m,k,c,kappa (default 20,1,1,1,0.5)")
    parser.add_argument("--config", help="JSON run configuration (flags override it)")
    parser.add_argument("--modes", help="retained modes, e.g. 1,2,3 or 1-20 (default: all)")
    parser.add_argument("--reduced-modes", dest="reduced_modes",
                        help="also sweep this reduced mode set and compare it with the full one")
    parser.add_argument("--omega", help="frequency grid start:end:steps")
    parser.add_argument("--force-amp", dest="force_amp", help="forcing amplitude(s), comma separated")
    parser.add_argument("--N", type=int, help="collocation nodes")
    parser.add_argument("--tol", type=float, help="convergence tolerance")
    parser.add_argument("--max-picard", dest="max_picard", type=int)
    parser.add_argument("--max-newton", dest="max_newton", type=int)
    parser.add_argument("--strategy", choices=STRATEGIES)
    parser.add_argument("--formulation", choices=FORMULATION_CHOICES)
    parser.add_argument("--direction", choices=DIRECTIONS)
    parser.add_argument("--metric", help="max_abs_all_dofs or max_abs_dof(i)")
    parser.add_argument("--oracle-check", dest="oracle_check", action="store_true", default=None,
                        help="verify off-resonant points by time integration")
    parser.add_argument("--no-contraction", dest="contraction", action="store_false", default=None,
                        help="skip the advisory contraction reports")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--workers", type=int, help="parallel amplitude sweeps")
    parser.add_argument("--plot", action="store_true", default=None, help="render a PNG of the curves")
    return parser


def load_config(args):
    """Defaults < environment < JSON config file < command-line flags."""
    settings = {}
    if args.config:
        try:
            with open(args.config) as handle:
                settings = json.load(handle)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot read config file {args.config}: {e}") from e
        if not isinstance(settings, dict):
            raise ConfigError(f"Config file {args.config} must hold a JSON object.")

    flags = {k: v for k, v in vars(args).items() if v is not None and k != "config"}
    if "model" in flags:
        settings.pop("chain", None)
    if "chain" in flags:
        settings.pop("model", None)
    settings.update(flags)

    known = {"model", "chain", "modes", "reduced_modes", "omega", "force_amp", "N", "tol", "max_picard",
             "max_newton", "strategy", "formulation", "direction", "metric", "oracle_check", "contraction",
             "out", "workers", "plot"}
    unknown = set(settings) - known
    if unknown:
        raise ConfigError(f"Unknown configuration keys: {sorted(unknown)}")

    try:
        kwargs = {}
        if settings.get("model"):
            kwargs["model_path"] = settings["model"]
            kwargs["chain"] = None
        elif "chain" in settings:
            kwargs["chain"] = parse_chain(settings["chain"])
        if "omega" in settings:
            kwargs["omega_start"], kwargs["omega_end"], kwargs["steps"] = parse_omega(settings["omega"])
        if "force_amp" in settings:
            kwargs["force_amps"] = _floats(settings["force_amp"])
        elif "model_path" in kwargs:
            # a model file carries its own forcing; scale 1 reproduces it
            kwargs["force_amps"] = (1.0,)
        kwargs["mode_indices"] = parse_indices(settings.get("modes"))
        kwargs["reduced_modes"] = parse_indices(settings.get("reduced_modes"))
        for key, cast in (("N", int), ("tol", float), ("max_picard", int), ("max_newton", int),
                          ("workers", int), ("strategy", str), ("formulation", str), ("direction", str),
                          ("metric", str), ("oracle_check", _flag), ("contraction", _flag), ("plot", _flag)):
            if key in settings:
                kwargs[key] = cast(settings[key])
        if "out" in settings:
            kwargs["out_dir"] = settings["out"]
    except (TypeError, ValueError, KeyError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"Invalid configuration value: {e}") from e
    return RunConfig(**kwargs)


# Run ----------------------------------------------------------------------------

def _load(config):
    if config.model_path:
        model, forcing = load_model(config.model_path)
        return model, forcing, False
    n, mass, k, c, kappa = config.chain
    model = build_oscillator_chain(n, mass, k, c, kappa)
    return model, uniform_sine_forcing(model.n, 1.0), True


def _bases(config, model):
    full = compute_modes(model)
    try:
        bases = [("full", truncate(full, config.mode_indices) if config.mode_indices else full)]
        if config.reduced_modes:
            bases.append(("reduced", truncate(full, config.reduced_modes)))
    except ModeSelectionError as e:
        raise ConfigError(str(e)) from e
    return bases


def _contraction_reports(model, basis, forcing, omegas, config, cfg):
    reports = []
    force = ModalForce(model, basis)
    for omega in omegas:
        T = 2.0 * np.pi / omega
        if check_nonresonance(basis, T):
            continue
        grid = build_grid(config.N, T)
        A = assemble_convolution(basis, grid)
        eta_lin = linear_response(basis, project_forcing(basis, forcing), T, grid, operator=A)
        zeta0 = force(eta_lin)
        report = check_contraction(basis, A, model, zeta0, None, cfg, eta_lin)
        reports.append({"omega": omega, "q": report.q, "delta": report.radius,
                        "delta_required": report.delta_required, "first_error": report.first_error,
                        "gamma": report.gamma, "gamma_discrete": report.gamma_discrete,
                        "predicted_convergent": report.predicted_convergent})
        if not report.predicted_convergent:
            logger.warning(f"Contraction not guaranteed at omega={omega:.6g} (q={report.q:.3g}).")
    return reports


def _amplitude_job(config, model, base_forcing, bases, amplitude):
    """All curves (basis x formulation) of one forcing amplitude."""
    forcing = base_forcing.scaled(amplitude)
    sweep_cfg = config.sweep_config()
    curves = []
    for basis_label, basis in bases:
        for formulation in config.formulations:
            cfg = config.solver_config(formulation)
            points = sweep(model, basis, forcing, sweep_cfg, cfg)
            curve = {"amplitude": amplitude, "basis": basis_label, "modes": list(basis.mode_indices),
                     "formulation": formulation, "points": points}
            curve.update(curve_summary(points))
            if config.contraction and formulation == REFORMULATED:
                curve["contraction"] = _contraction_reports(
                    model, basis, forcing, sorted({p.omega for p in points}), config, cfg)
            curves.append(curve)
            logger.info(f"Curve F={amplitude:g} {basis_label}/{formulation}: "
                        f"{curve['converged_points']}/{len(points)} converged, "
                        f"picard={curve['picard_iters']}, newton={curve['newton_iters']}")
    return curves


def _rom_accuracy(curves):
    summary = []
    for curve in curves:
        if curve["basis"] != "reduced":
            continue
        full = next((c for c in curves if c["basis"] == "full" and c["amplitude"] == curve["amplitude"]
                     and c["formulation"] == curve["formulation"]), None)
        if full is None:
            continue
        peak_full = max((p.amplitude for p in full["points"] if p.converged), default=float("nan"))
        peak_reduced = max((p.amplitude for p in curve["points"] if p.converged), default=float("nan"))
        # undefined for a zero or missing full-model peak
        relative = abs(peak_reduced - peak_full) / peak_full if np.isfinite(peak_full) and peak_full > 0 \
            else float("nan")
        summary.append({"amplitude": curve["amplitude"], "formulation": curve["formulation"],
                        "peak_full": peak_full, "peak_reduced": peak_reduced, "relative_difference": relative})
    return summary


def _oracle_checks(config, model, base_forcing, basis, curve):
    """Time-integration check at the converged points farthest from every natural frequency."""
    candidates = [p for p in curve["points"] if p.converged]
    safe = {r["omega"] for r in curve.get("contraction", []) if r["predicted_convergent"]}
    if safe:
        candidates = [p for p in candidates if p.omega in safe] or candidates
    candidates.sort(key=lambda p: -np.min(np.abs(p.omega - basis.omega0)))
    forcing = base_forcing.scaled(curve["amplitude"])
    cfg = config.solver_config(REFORMULATED)
    checks = []
    for point in candidates[:ORACLE_POINTS]:
        try:
            solution = solve_steady_state(model, basis, build_grid(config.N, 1.0), forcing, point.omega, cfg=cfg)
            orbit = integrate_to_steady_state(model, forcing, point.omega)
            comparison = compare_orbit(solution, basis, orbit)
            checks.append({"omega": point.omega, "sup_error": comparison.sup_error,
                           "rms_error": comparison.rms_error, "per_dof": comparison.per_dof,
                           "phase_shift": comparison.phase_shift, "periods": orbit.periods_integrated})
        except OracleError as e:
            logger.warning(f"Oracle check failed at omega={point.omega:.6g}: {e}")
            checks.append({"omega": point.omega, "error": str(e)})
    return checks


def run(config):
    """Executes the configured sweeps and writes all outputs. Returns the exit status."""
    try:
        model, base_forcing, builtin = _load(config)
        bases = _bases(config, model)
    except (ModelError, UnsupportedModelError, ConfigError) as e:
        logger.error(f"Run aborted: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 2

    try:
        # validate the settings once before dispatching workers
        config.sweep_config()
        config.solver_config(config.formulations[0])
    except ConfigError as e:
        logger.error(f"Run aborted: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 2

    logger.info(f"Run started: {model.label}, amplitudes={config.force_amps}, "
                f"formulations={config.formulations}, bases={[label for label, _ in bases]}")
    with ThreadPoolExecutor(max_workers=int(config.workers)) as pool:
        jobs = [pool.submit(_amplitude_job, config, model, base_forcing, bases, F) for F in config.force_amps]
        curves = [curve for job in jobs for curve in job.result()]

    os.makedirs(config.out_dir, exist_ok=True)
    for curve in curves:
        name = f"frc_F{curve['amplitude']:g}_{curve['basis']}_{curve['formulation']}.csv"
        curve["csv"] = write_frc_csv(curve["points"], os.path.join(config.out_dir, name))

    labelled = [(f"F={c['amplitude']:g} {c['basis']} {c['formulation']}", c["points"]) for c in curves]
    write_plot_data(labelled, os.path.join(config.out_dir, "frc_plot.dat"))

    report = {
        "model": model.label,
        "n": model.n,
        "builtin_chain": builtin,
        "N": config.N,
        "tol": config.tol,
        "strategy": config.strategy,
        "direction": config.direction,
        "metric": config.metric,
        "omega": {"start": config.omega_start, "end": config.omega_end, "steps": config.steps},
        "curves": [],
        "rom_accuracy": _rom_accuracy(curves),
    }
    for curve in curves:
        entry = {k: v for k, v in curve.items() if k != "points"}
        entry["points"] = [{"omega": p.omega, "amplitude": p.amplitude, "converged": p.converged,
                            "picard_iters": p.picard_iters, "newton_iters": p.newton_iters,
                            "picard_time": p.picard_time, "newton_time": p.newton_time,
                            "nonlinear_time": p.nonlinear_time, "solver_path": p.solver_path,
                            "leg": p.leg} for p in curve["points"]]
        report["curves"].append(entry)

    if config.oracle_check:
        full_basis = bases[0][1]
        first = next(c for c in curves if c["basis"] == "full" and c["amplitude"] == config.force_amps[0])
        report["oracle"] = _oracle_checks(config, model, base_forcing, full_basis, first)

    if config.plot:
        image_path = generate_frc_image(
            [(label, [p.omega for p in points], [p.amplitude for p in points]) for label, points in labelled],
            title=model.label)
        report["plot"] = image_path

    write_report(report, os.path.join(config.out_dir, "report.json"))
    print(report_tables(report))
    logger.info("Run finished.")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 2
    return run(config)


if __name__ == "__main__":
    logger.info("Starting frcSolver...")
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        logger.info("Shutting down frcSolver...")
        sys.exit(130)
