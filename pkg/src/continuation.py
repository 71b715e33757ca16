################################################################################
# FILE: continuation.py
# DESCRIPTION: Sequential continuation over excitation frequency (forced
#              response curves), amplitude extraction and refinement studies.
# AUTHOR: MSCRNT LLC
#
# THIS CODE IS PROPRIETARY PROPERTY OF MSCRNT LLC.
################################################################################

import os
import re
import logging
import logging.handlers
from dataclasses import dataclass, field

import numpy as np

from green import ResonanceError
from collocation import build_grid, interpolate, sup_norm, CollocationError
from solvers import solve_steady_state, SolverConfig, SolverError, SolverPath

# Configure logging
LOG_DIR = os.getenv("FRC_LOG_DIR", "logs")
os.makedirs(LOG_DIR, exist_ok=True)
log_file = os.path.join(LOG_DIR, "frcSolver.log")

logger = logging.getLogger("continuation")
logger.setLevel(logging.INFO)
if not logger.handlers:
    handler = logging.handlers.TimedRotatingFileHandler(log_file, when="midnight", interval=1, backupCount=7, utc=True)
    handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(message)s'))
    logger.addHandler(handler)

UP = "up"
DOWN = "down"
BOTH = "both"
DIRECTIONS = (UP, DOWN, BOTH)

MAX_ABS_ALL_DOFS = "max_abs_all_dofs"
_DOF_METRIC = re.compile(r"^max_abs_dof\((\d+)\)$")


class ContinuationError(ValueError):
    """Invalid sweep settings or amplitude requests."""


class StudyError(ContinuationError):
    """A refinement study member failed to converge."""


def parse_metric(metric):
    """'max_abs_all_dofs' -> None, 'max_abs_dof(i)' -> i (1-based)."""
    if metric == MAX_ABS_ALL_DOFS:
        return None
    match = _DOF_METRIC.match(metric.strip())
    if not match or int(match.group(1)) < 1:
        raise ContinuationError(f"Unknown amplitude metric '{metric}'.")
    return int(match.group(1))


@dataclass(frozen=True)
class SweepConfig:
    omega_start: float
    omega_end: float
    steps: int
    direction: str = UP
    amplitude_metric: str = MAX_ABS_ALL_DOFS
    N: int = 128
    warm_start: bool = True

    def __post_init__(self):
        if not (self.omega_start > 0 and self.omega_end > 0):
            raise ContinuationError(f"Frequency bounds must be positive ({self.omega_start}, {self.omega_end}).")
        if int(self.steps) != self.steps or self.steps < 2:
            raise ContinuationError(f"A sweep needs at least 2 steps, got {self.steps}.")
        if self.direction not in DIRECTIONS:
            raise ContinuationError(f"Unknown direction '{self.direction}', expected one of {DIRECTIONS}.")
        parse_metric(self.amplitude_metric)

    def frequencies(self):
        """[(omega, leg), ...] in visiting order."""
        lo, hi = sorted((self.omega_start, self.omega_end))
        grid = np.linspace(lo, hi, int(self.steps))
        if self.direction == UP:
            return [(w, UP) for w in grid]
        if self.direction == DOWN:
            return [(w, DOWN) for w in grid[::-1]]
        return [(w, UP) for w in grid] + [(w, DOWN) for w in grid[::-1]]


@dataclass
class FRCPoint:
    omega: float
    amplitude: float
    converged: bool
    picard_iters: int = 0
    newton_iters: int = 0
    picard_time: float = 0.0
    newton_time: float = 0.0
    nonlinear_time: float = 0.0
    solver_path: SolverPath = SolverPath.NONE
    final_residual: float = float("nan")
    leg: str = UP
    solution: object = field(default=None, repr=False, compare=False)

    @property
    def picard_only(self):
        return self.converged and self.solver_path == SolverPath.PICARD


def amplitude(model, basis, solution, metric=MAX_ABS_ALL_DOFS):
    """Max over nodes of |x_i| for x = U eta (all DOFs, or the 1-based DOF of the metric)."""
    if not solution.converged:
        raise ContinuationError(f"Amplitude requested for a non-converged solution at omega={solution.omega:.6g}.")
    dof = parse_metric(metric)
    x = solution.eta_nodal @ basis.U.T
    if dof is None:
        return float(np.max(np.abs(x))) if x.size else 0.0
    if dof > model.n:
        raise ContinuationError(f"DOF {dof} outside 1..{model.n}.")
    return float(np.max(np.abs(x[:, dof - 1])))


def _failed_point(omega, leg):
    return FRCPoint(omega=float(omega), amplitude=float("nan"), converged=False, leg=leg)


def sweep(model, basis, forcing, sweep_cfg, cfg=None, keep_solutions=False):
    """Sequential continuation in omega; each solve is warm-started from the last converged zeta."""
    cfg = cfg or SolverConfig()
    grid = build_grid(sweep_cfg.N, 1.0)
    points = []
    previous = None
    converged_count = 0

    logger.info(f"Sweep {sweep_cfg.omega_start:.6g} -> {sweep_cfg.omega_end:.6g} ({sweep_cfg.steps} steps, "
                f"{sweep_cfg.direction}, {cfg.formulation}, m={basis.m}, N={sweep_cfg.N})")
    for omega, leg in sweep_cfg.frequencies():
        warm = previous if sweep_cfg.warm_start else None
        try:
            solution = solve_steady_state(model, basis, grid, forcing, omega, warm_start=warm, cfg=cfg)
        except (ResonanceError, SolverError, CollocationError, np.linalg.LinAlgError, FloatingPointError) as e:
            logger.warning(f"Sweep point omega={omega:.6g} failed: {e}")
            points.append(_failed_point(omega, leg))
            previous = None
            continue

        if solution.converged:
            value = amplitude(model, basis, solution, sweep_cfg.amplitude_metric)
            previous = solution.zeta_nodal
            converged_count += 1
        else:
            # cold restart at the next frequency
            value = float("nan")
            previous = None
        points.append(FRCPoint(
            omega=float(omega), amplitude=value, converged=solution.converged,
            picard_iters=solution.picard_iters, newton_iters=solution.newton_iters,
            picard_time=solution.picard_time, newton_time=solution.newton_time,
            nonlinear_time=solution.nonlinear_time, solver_path=solution.solver_path,
            final_residual=solution.final_residual, leg=leg,
            solution=solution if keep_solutions else None))

    logger.info(f"Sweep finished: {converged_count}/{len(points)} points converged.")
    return points


def refinement_study(model, basis, forcing, omega, N_list, cfg=None):
    """[(N, solution, error vs finest), ...]; errors in the sup norm of x at each grid's nodes."""
    cfg = cfg or SolverConfig()
    N_list = [int(N) for N in N_list]
    if len(N_list) < 2 or any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise StudyError(f"N_list must be strictly ascending with at least two entries, got {N_list}.")

    solutions = []
    for N in N_list:
        solution = solve_steady_state(model, basis, build_grid(N, 1.0), forcing, omega, cfg=cfg)
        if not solution.converged:
            raise StudyError(f"Refinement study at omega={omega:.6g}: N={N} did not converge "
                             f"({solution.diagnostics}).")
        solutions.append(solution)

    T = 2.0 * np.pi / omega
    finest_grid = build_grid(N_list[-1], T)
    finest_x = solutions[-1].eta_nodal @ basis.U.T
    results = []
    for N, solution in zip(N_list, solutions):
        grid = build_grid(N, T)
        x = solution.eta_nodal @ basis.U.T
        reference = interpolate(finest_grid, finest_x, grid.nodes)
        error = sup_norm(x - reference)
        results.append((N, solution, error))
        logger.info(f"Refinement study omega={omega:.6g}: N={N}, error={error:.3e}")
    return results
