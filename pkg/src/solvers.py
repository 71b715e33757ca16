################################################################################
# FILE: solvers.py
# DESCRIPTION: Picard and Newton-Raphson iterations for the reformulated (zeta)
#              and original (eta) collocation systems, the contraction check
#              and the single-frequency steady-state driver.
# AUTHOR: MSCRNT LLC
#
# THIS CODE IS PROPRIETARY PROPERTY OF MSCRNT LLC.
################################################################################

import os
import time
import logging
import logging.handlers
from enum import Enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from model import eval_nonlinearity, eval_nonlinearity_jacobian, lipschitz_on_ball
from modal import project_forcing
from green import linear_response, gamma_bound, check_nonresonance, ResonanceError, CLOSED_FORM, QUADRATURE
from collocation import (build_grid, assemble_convolution, apply_convolution, kernel_generators,
                         circulant, dense_apply, coupled_operator_bound, sup_norm, DENSE, FFT)

# Configure logging
LOG_DIR = os.getenv("FRC_LOG_DIR", "logs")
os.makedirs(LOG_DIR, exist_ok=True)
log_file = os.path.join(LOG_DIR, "frcSolver.log")

logger = logging.getLogger("solvers")
logger.setLevel(logging.INFO)
if not logger.handlers:
    handler = logging.handlers.TimedRotatingFileHandler(log_file, when="midnight", interval=1, backupCount=7, utc=True)
    handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(message)s'))
    logger.addHandler(handler)

REFORMULATED = "reformulated"
ORIGINAL = "original"
FORMULATIONS = (REFORMULATED, ORIGINAL)

PICARD_THEN_NEWTON = "picard_then_newton"
PICARD_ONLY = "picard_only"
NEWTON_ONLY = "newton_only"
STRATEGIES = (PICARD_THEN_NEWTON, PICARD_ONLY, NEWTON_ONLY)

PIVOT_RATIO_TOL = 1e-14


class SolverError(ValueError):
    """Inconsistent solver inputs (shapes, configuration)."""


class SolverPath(str, Enum):
    NONE = "none"
    PICARD = "picard"
    NEWTON = "newton"
    PICARD_THEN_NEWTON = "picard_then_newton"


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-9
    max_picard: int = 1000
    max_newton: int = 25
    divergence_window: int = 5
    strategy: str = PICARD_THEN_NEWTON
    formulation: str = REFORMULATED
    linear_path: str = CLOSED_FORM
    convolution: str = DENSE

    def __post_init__(self):
        if not self.tol > 0:
            raise SolverError(f"tol must be positive, got {self.tol}.")
        for name in ("max_picard", "max_newton", "divergence_window"):
            if int(getattr(self, name)) < 1:
                raise SolverError(f"{name} must be >= 1, got {getattr(self, name)}.")
        if self.strategy not in STRATEGIES:
            raise SolverError(f"Unknown strategy '{self.strategy}', expected one of {STRATEGIES}.")
        if self.formulation not in FORMULATIONS:
            raise SolverError(f"Unknown formulation '{self.formulation}', expected one of {FORMULATIONS}.")
        if self.linear_path not in (CLOSED_FORM, QUADRATURE):
            raise SolverError(f"Unknown linear response path '{self.linear_path}'.")
        if self.convolution not in (DENSE, FFT):
            raise SolverError(f"Unknown convolution method '{self.convolution}'.")


@dataclass
class PeriodicSolution:
    zeta_nodal: np.ndarray
    eta_nodal: np.ndarray
    omega: float
    converged: bool
    picard_iters: int = 0
    newton_iters: int = 0
    final_residual: float = float("nan")
    solver_path: SolverPath = SolverPath.NONE
    formulation: str = REFORMULATED
    eta_lin: np.ndarray = field(default=None, repr=False)
    picard_time: float = 0.0
    newton_time: float = 0.0
    nonlinear_time: float = 0.0
    picard_history: list = field(default_factory=list, repr=False)
    newton_history: list = field(default_factory=list, repr=False)
    diagnostics: str = ""

    @property
    def period(self):
        return 2.0 * np.pi / self.omega


@dataclass(frozen=True)
class ContractionReport:
    q: float
    delta_required: float
    first_error: float
    predicted_convergent: bool
    radius: float
    gamma: float
    gamma_discrete: float
    lipschitz: float


class ModalForce:
    """G(eta) = -U^T S(U eta) at every node, with a clock on S / DS evaluations."""

    def __init__(self, model, basis):
        self.model = model
        self.U = basis.U
        self.elapsed = 0.0

    @property
    def is_constant(self):
        return self.model.is_linear

    def __call__(self, eta):
        start = time.perf_counter()
        force = -eval_nonlinearity(self.model, eta @ self.U.T) @ self.U
        self.elapsed += time.perf_counter() - start
        return force

    def stiffness(self, eta):
        """B_p = U^T DS(U eta_p) U, shape (N, m, m)."""
        start = time.perf_counter()
        blocks = self.U.T @ eval_nonlinearity_jacobian(self.model, eta @ self.U.T) @ self.U
        self.elapsed += time.perf_counter() - start
        return blocks


def _check_shape(name, array, shape):
    array = np.asarray(array, dtype=float)
    if array.shape != shape:
        raise SolverError(f"{name} has shape {array.shape}, expected {shape}.")
    return array


def _convolve(A, z, cfg):
    return apply_convolution(A, z, method=cfg.convolution if cfg is not None else DENSE)


def recover_eta(A, eta_lin, zeta, cfg=None):
    """eta = eta_lin + A zeta."""
    shape = (A.N, A.m)
    eta_lin = _check_shape("eta_lin", eta_lin, shape)
    zeta = _check_shape("zeta", zeta, shape)
    return eta_lin + _convolve(A, zeta, cfg)


# Picard ------------------------------------------------------------------------

def _picard_loop(step, start, cfg, constant_map):
    """Iterate x <- step(x) on the modal force until successive changes drop below tol.

    Returns (final, best, iterations, converged, history, reason).
    """
    current = start
    best, best_diff = start, np.inf
    history = []
    rises = 0
    for iteration in range(1, cfg.max_picard + 1):
        new = step(current)
        diff = sup_norm(new - current)
        if constant_map:
            # the image of a constant map is its fixed point
            history.append(0.0)
            return new, new, iteration, True, history, "constant map"
        history.append(diff)
        if not np.isfinite(diff):
            return current, best, iteration, False, history, "non-finite iterate"
        if diff < best_diff:
            best, best_diff = new, diff
        if diff <= cfg.tol:
            return new, new, iteration, True, history, ""
        rises = rises + 1 if len(history) > 1 and diff > history[-2] else 0
        if rises >= cfg.divergence_window:
            return new, best, iteration, False, history, f"diverging ({rises} consecutive increases)"
        current = new
    return current, best, cfg.max_picard, False, history, "iteration cap reached"


def picard_reformulated(model, basis, A, eta_lin, zeta0, cfg, force=None):
    """zeta_l = G(eta_lin + A zeta_{l-1}); A is applied, never reassembled."""
    shape = (A.N, basis.m)
    eta_lin = _check_shape("eta_lin", eta_lin, shape)
    zeta0 = _check_shape("zeta0", zeta0, shape)
    force = force or ModalForce(model, basis)

    start = time.perf_counter()
    final, best, iters, converged, history, reason = _picard_loop(
        lambda z: force(recover_eta(A, eta_lin, z, cfg)), zeta0, cfg, force.is_constant)
    elapsed = time.perf_counter() - start
    zeta = final if converged else best
    eta = recover_eta(A, eta_lin, zeta, cfg)

    if converged:
        logger.debug(f"Picard (reformulated) converged in {iters} iterations at omega={2 * np.pi / A.T:.6g}")
    else:
        logger.debug(f"Picard (reformulated) stopped after {iters} iterations: {reason}")
    return PeriodicSolution(
        zeta_nodal=zeta, eta_nodal=eta, omega=2.0 * np.pi / A.T, converged=converged,
        picard_iters=iters, final_residual=history[-1] if history else 0.0,
        solver_path=SolverPath.PICARD, formulation=REFORMULATED, eta_lin=eta_lin,
        picard_time=elapsed, nonlinear_time=force.elapsed, picard_history=history, diagnostics=reason)


def picard_original(model, basis, grid, eta_lin, eta0, cfg, force0=None, force=None):
    """eta_l = eta_lin + A G(eta_{l-1}) with the Green's kernels evaluated inside every step.

    The iteration is carried on g = G(eta) so that its stopping test matches the
    reformulated one; `force0` (a zeta-type warm start) replaces G(eta0) when given.
    """
    shape = (grid.N, basis.m)
    eta_lin = _check_shape("eta_lin", eta_lin, shape)
    force = force or ModalForce(model, basis)
    if force0 is None:
        g0 = force(_check_shape("eta0", eta0, shape))
    else:
        g0 = _check_shape("force0", force0, shape)

    def convolve_fresh(g):
        return dense_apply(circulant(kernel_generators(basis, grid.T, grid.N)), g)

    start = time.perf_counter()
    final, best, iters, converged, history, reason = _picard_loop(
        lambda g: force(eta_lin + convolve_fresh(g)), g0, cfg, force.is_constant)
    g = final if converged else best
    eta = eta_lin + convolve_fresh(g)
    elapsed = time.perf_counter() - start

    if converged:
        logger.debug(f"Picard (original) converged in {iters} iterations at omega={2 * np.pi / grid.T:.6g}")
    else:
        logger.debug(f"Picard (original) stopped after {iters} iterations: {reason}")
    return PeriodicSolution(
        zeta_nodal=g, eta_nodal=eta, omega=2.0 * np.pi / grid.T, converged=converged,
        picard_iters=iters, final_residual=history[-1] if history else 0.0,
        solver_path=SolverPath.PICARD, formulation=ORIGINAL, eta_lin=eta_lin,
        picard_time=elapsed, nonlinear_time=force.elapsed, picard_history=history, diagnostics=reason)


# Newton ------------------------------------------------------------------------

def reformulated_residual(A, eta_lin, zeta, force, cfg=None):
    """F(zeta) = zeta - G(eta_lin + A zeta)."""
    return zeta - force(recover_eta(A, eta_lin, zeta, cfg))


def reformulated_jacobian(A, eta_lin, zeta, force, cfg=None):
    """J = I + B A_hat; J[p,i,q,j] = delta + B_p[i,j] a_j[p,q]."""
    N, m = zeta.shape
    B = force.stiffness(recover_eta(A, eta_lin, zeta, cfg))
    kernels = A.dense.transpose(1, 2, 0)
    J = (B[:, :, None, :] * kernels[:, None, :, :]).reshape(N * m, N * m)
    J[np.diag_indices_from(J)] += 1.0
    return J


def original_residual(A, eta_lin, eta, force, cfg=None):
    """F(eta) = eta - eta_lin - A G(eta)."""
    return eta - eta_lin - _convolve(A, force(eta), cfg)


def original_jacobian(A, eta_lin, eta, force, cfg=None):
    """J = I + A_hat B; J[p,i,q,j] = delta + a_i[p,q] B_q[i,j]."""
    N, m = eta.shape
    B = force.stiffness(eta)
    kernels = A.dense.transpose(1, 0, 2)
    J = (kernels[:, :, :, None] * B.transpose(1, 0, 2)[None, :, :, :]).reshape(N * m, N * m)
    J[np.diag_indices_from(J)] += 1.0
    return J


def _newton_loop(residual_fn, jacobian_fn, start, cfg):
    """Returns (x, iterations, residual, history, reason)."""
    x = start
    F = residual_fn(x)
    r = sup_norm(F)
    history = [r]
    iters = 0
    reason = ""
    while r > cfg.tol and iters < cfg.max_newton:
        J = jacobian_fn(x)
        lu, piv = scipy.linalg.lu_factor(J, check_finite=False)
        pivots = np.abs(np.diag(lu))
        ratio = pivots.min() / pivots.max() if pivots.max() > 0 else 0.0
        if ratio < PIVOT_RATIO_TOL:
            reason = f"singular Jacobian (pivot ratio {ratio:.3e})"
            break
        step = scipy.linalg.lu_solve((lu, piv), -F.reshape(-1), check_finite=False)
        x = x + step.reshape(x.shape)
        iters += 1
        F = residual_fn(x)
        r = sup_norm(F)
        history.append(r)
        if not np.isfinite(r):
            reason = "non-finite residual"
            break
    if r > cfg.tol and not reason:
        reason = "iteration cap reached"
    return x, iters, r, history, reason


def newton_reformulated(model, basis, A, eta_lin, zeta0, cfg, force=None):
    shape = (A.N, basis.m)
    eta_lin = _check_shape("eta_lin", eta_lin, shape)
    zeta0 = _check_shape("zeta0", zeta0, shape)
    force = force or ModalForce(model, basis)

    start = time.perf_counter()
    zeta, iters, r, history, reason = _newton_loop(
        lambda z: reformulated_residual(A, eta_lin, z, force, cfg),
        lambda z: reformulated_jacobian(A, eta_lin, z, force, cfg),
        zeta0, cfg)
    eta = recover_eta(A, eta_lin, zeta, cfg)
    elapsed = time.perf_counter() - start

    converged = bool(r <= cfg.tol)
    if not converged:
        logger.debug(f"Newton (reformulated) failed after {iters} steps: {reason}")
    return PeriodicSolution(
        zeta_nodal=zeta, eta_nodal=eta, omega=2.0 * np.pi / A.T, converged=converged,
        newton_iters=iters, final_residual=r, solver_path=SolverPath.NEWTON,
        formulation=REFORMULATED, eta_lin=eta_lin, newton_time=elapsed,
        nonlinear_time=force.elapsed, newton_history=history, diagnostics=reason)


def newton_original(model, basis, A, eta_lin, eta0, cfg, force=None):
    shape = (A.N, basis.m)
    eta_lin = _check_shape("eta_lin", eta_lin, shape)
    eta0 = _check_shape("eta0", eta0, shape)
    force = force or ModalForce(model, basis)

    start = time.perf_counter()
    eta, iters, r, history, reason = _newton_loop(
        lambda e: original_residual(A, eta_lin, e, force, cfg),
        lambda e: original_jacobian(A, eta_lin, e, force, cfg),
        eta0, cfg)
    zeta = force(eta)
    elapsed = time.perf_counter() - start

    converged = bool(r <= cfg.tol)
    if not converged:
        logger.debug(f"Newton (original) failed after {iters} steps: {reason}")
    return PeriodicSolution(
        zeta_nodal=zeta, eta_nodal=eta, omega=2.0 * np.pi / A.T, converged=converged,
        newton_iters=iters, final_residual=r, solver_path=SolverPath.NEWTON,
        formulation=ORIGINAL, eta_lin=eta_lin, newton_time=elapsed,
        nonlinear_time=force.elapsed, newton_history=history, diagnostics=reason)


# Contraction check -------------------------------------------------------------

def check_contraction(basis, A, model, zeta0, radius, cfg, eta_lin):
    """Advisory test of the fixed-point conditions on the ball of radius delta around zeta0.

    q = ||P^N|| ||U^T|| L_S ||U|| Gamma with ||P^N|| = 1, Gamma taken as the larger of
    the closed-form value and the discrete bound of A, and L_S bounded on the ball
    of physical states the iterates can reach. radius=None searches for the
    smallest admissible delta.
    """
    shape = (A.N, basis.m)
    zeta0 = _check_shape("zeta0", zeta0, shape)
    eta_lin = _check_shape("eta_lin", eta_lin, shape)
    force = ModalForce(model, basis)

    gamma = gamma_bound(basis, A.T)
    gamma_discrete = coupled_operator_bound(A)
    gamma_eff = max(gamma, gamma_discrete)
    u_norm = basis.spectral_norm

    first_error = sup_norm(force(recover_eta(A, eta_lin, zeta0, cfg)) - zeta0)
    base = sup_norm(eta_lin)
    start = sup_norm(zeta0)

    def factor(delta):
        r_x = u_norm * (base + gamma_eff * (start + delta))
        lipschitz = lipschitz_on_ball(model, r_x) if r_x > 0 else 0.0
        return u_norm * lipschitz * u_norm * gamma_eff, lipschitz

    if radius is None:
        radius = max(2.0 * first_error, np.finfo(float).tiny)
        for _ in range(60):
            q, _ = factor(radius)
            if q >= 1.0:
                break
            needed = first_error / (1.0 - q)
            if needed <= radius:
                break
            radius = 2.0 * needed

    q, lipschitz = factor(radius)
    delta_required = first_error / (1.0 - q) if q < 1.0 else float("inf")
    predicted = bool(q < 1.0 and radius >= delta_required)
    report = ContractionReport(float(q), float(delta_required), float(first_error), predicted,
                               float(radius), gamma, gamma_discrete, float(lipschitz))
    logger.info(f"Contraction check at omega={2 * np.pi / A.T:.6g}: q={q:.4g}, "
                f"delta={radius:.3e}, |E|={first_error:.3e}, predicted={predicted}")
    return report


# Single-frequency driver -------------------------------------------------------

def solve_steady_state(model, basis, grid, forcing, omega, warm_start=None, cfg=None, operator=None):
    """Steady state at one excitation frequency following cfg.strategy / cfg.formulation.

    `grid` supplies N; the nodes are rebuilt for T = 2 pi / omega. `operator` is reused
    when it was assembled for the same basis and grid.
    """
    cfg = cfg or SolverConfig()
    if not omega > 0:
        raise SolverError(f"Excitation frequency must be positive, got {omega}.")
    T = 2.0 * np.pi / omega
    grid = build_grid(grid.N, T)
    violations = check_nonresonance(basis, T)
    if violations:
        raise ResonanceError(violations, T)

    force = ModalForce(model, basis)
    shape = (grid.N, basis.m)
    reformulated = cfg.formulation == REFORMULATED
    needs_operator = reformulated or cfg.linear_path == QUADRATURE or cfg.strategy == NEWTON_ONLY

    picard_time = newton_time = 0.0
    start = time.perf_counter()
    A = None
    if needs_operator:
        if (operator is not None and operator.basis is basis
                and operator.N == grid.N and np.isclose(operator.T, T, rtol=1e-14, atol=0.0)):
            A = operator
        else:
            A = assemble_convolution(basis, grid)
    modal_forcing = project_forcing(basis, forcing)
    eta_lin = linear_response(basis, modal_forcing, T, grid, path=cfg.linear_path, operator=A)
    zeta0 = force(eta_lin) if warm_start is None else _check_shape("warm_start", warm_start, shape)
    setup_time = time.perf_counter() - start

    picard = None
    if cfg.strategy != NEWTON_ONLY:
        if reformulated:
            picard = picard_reformulated(model, basis, A, eta_lin, zeta0, cfg, force=force)
        else:
            picard = picard_original(model, basis, grid, eta_lin, eta_lin, cfg, force0=zeta0, force=force)
        picard_time = picard.picard_time + setup_time
        result = picard
        path = SolverPath.PICARD
    else:
        newton_time = setup_time

    if cfg.strategy == NEWTON_ONLY or (cfg.strategy == PICARD_THEN_NEWTON and not picard.converged):
        seed = zeta0
        if picard is not None and np.all(np.isfinite(picard.zeta_nodal)):
            seed = picard.zeta_nodal
        newton_start = time.perf_counter()
        if A is None:
            A = assemble_convolution(basis, grid)
        if reformulated:
            newton = newton_reformulated(model, basis, A, eta_lin, seed, cfg, force=force)
        else:
            eta_seed = picard.eta_nodal if picard is not None and np.all(np.isfinite(picard.eta_nodal)) \
                else recover_eta(A, eta_lin, seed, cfg)
            newton = newton_original(model, basis, A, eta_lin, eta_seed, cfg, force=force)
        newton_time += time.perf_counter() - newton_start
        result = newton
        path = SolverPath.NEWTON if picard is None else SolverPath.PICARD_THEN_NEWTON

    diagnostics = result.diagnostics
    if picard is not None and result is not picard:
        diagnostics = f"picard: {picard.diagnostics}; newton: {result.diagnostics or 'ok'}"
    solution = PeriodicSolution(
        zeta_nodal=result.zeta_nodal, eta_nodal=result.eta_nodal, omega=float(omega),
        converged=result.converged,
        picard_iters=picard.picard_iters if picard is not None else 0,
        newton_iters=result.newton_iters, final_residual=result.final_residual,
        solver_path=path, formulation=cfg.formulation, eta_lin=eta_lin,
        picard_time=picard_time, newton_time=newton_time, nonlinear_time=force.elapsed,
        picard_history=picard.picard_history if picard is not None else [],
        newton_history=result.newton_history, diagnostics=diagnostics)

    if solution.converged:
        logger.info(f"Solved omega={omega:.6g} ({cfg.formulation}, {path.value}): "
                    f"picard={solution.picard_iters}, newton={solution.newton_iters}, "
                    f"residual={solution.final_residual:.3e}")
    else:
        logger.warning(f"No convergence at omega={omega:.6g} ({cfg.formulation}, {path.value}): {diagnostics}")
    return solution


if __name__ == "__main__":
    from model import build_oscillator_chain, uniform_sine_forcing
    from modal import compute_modes

    chain = build_oscillator_chain(2)
    basis = compute_modes(chain)
    grid = build_grid(128, 1.0)
    for omega in (0.5, 1.0, 1.5):
        sol = solve_steady_state(chain, basis, grid, uniform_sine_forcing(2, 0.01), omega)
        print(f"omega={omega}: converged={sol.converged} picard={sol.picard_iters} newton={sol.newton_iters}")
