################################################################################
# FILE: oracle.py
# DESCRIPTION: Reference steady states by direct time integration of the full
#              equations of motion (fixed-step RK4 from rest) and comparison of
#              collocation solutions against them.
# AUTHOR: MSCRNT LLC
#
# THIS CODE IS PROPRIETARY PROPERTY OF MSCRNT LLC.
################################################################################

import os
import logging
import logging.handlers
from dataclasses import dataclass

import numpy as np

from model import eval_nonlinearity, eval_forcing

# Configure logging
LOG_DIR = os.getenv("FRC_LOG_DIR", "logs")
os.makedirs(LOG_DIR, exist_ok=True)
log_file = os.path.join(LOG_DIR, "frcSolver.log")

logger = logging.getLogger("oracle")
logger.setLevel(logging.INFO)
if not logger.handlers:
    handler = logging.handlers.TimedRotatingFileHandler(log_file, when="midnight", interval=1, backupCount=7, utc=True)
    handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(message)s'))
    logger.addHandler(handler)

STEPS_PER_PERIOD = 2048
SETTLE_TOL = 1e-8
MAX_PERIODS = 2000


class OracleError(RuntimeError):
    """Time integration could not produce (or compare) a settled orbit."""


@dataclass(frozen=True)
class SteadyOrbit:
    samples: np.ndarray
    omega: float
    periods_integrated: int
    settle_residual: float
    settled: bool = True

    @property
    def period(self):
        return 2.0 * np.pi / self.omega

    @property
    def phases(self):
        return np.arange(len(self.samples)) * (self.period / len(self.samples))


@dataclass(frozen=True)
class OrbitComparison:
    sup_error: float
    rms_error: float
    per_dof: np.ndarray
    phase_shift: float
    node_spacing: float


def integrate_to_steady_state(model, forcing, omega, settle_tol=SETTLE_TOL, max_periods=MAX_PERIODS,
                              steps_per_period=STEPS_PER_PERIOD):
    """Classical RK4 on x'' = M^-1 (f - C x' - K x - S(x)) from rest, period by period."""
    if not omega > 0:
        raise OracleError(f"Excitation frequency must be positive, got {omega}.")
    if np.min(np.linalg.eigvalsh(0.5 * (model.C + model.C.T))) <= 0.0:
        raise OracleError("Time-integration oracle needs strictly positive damping in every direction.")

    n = model.n
    M_inv = np.linalg.inv(model.M)
    C, K = model.C, model.K
    T = 2.0 * np.pi / omega
    h = T / steps_per_period

    def rhs(t, x, v):
        return v, M_inv @ (eval_forcing(forcing, t, omega) - C @ v - K @ x - eval_nonlinearity(model, x))

    x = np.zeros(n)
    v = np.zeros(n)
    previous = None
    residuals = []
    for period in range(1, max_periods + 1):
        samples = np.empty((steps_per_period, n))
        t0 = (period - 1) * T
        for step in range(steps_per_period):
            samples[step] = x
            t = t0 + step * h
            k1x, k1v = rhs(t, x, v)
            k2x, k2v = rhs(t + 0.5 * h, x + 0.5 * h * k1x, v + 0.5 * h * k1v)
            k3x, k3v = rhs(t + 0.5 * h, x + 0.5 * h * k2x, v + 0.5 * h * k2v)
            k4x, k4v = rhs(t + h, x + h * k3x, v + h * k3v)
            x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            v = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if not np.all(np.isfinite(x)):
            raise OracleError(f"Time integration blew up at omega={omega:.6g} after {period} periods.")

        if previous is not None:
            residual = float(np.max(np.abs(samples - previous)))
            residuals.append(residual)
            if residual <= settle_tol:
                logger.info(f"Oracle settled at omega={omega:.6g} after {period} periods (residual {residual:.2e}).")
                samples.setflags(write=False)
                return SteadyOrbit(samples, float(omega), period, residual)
        previous = samples

    decay = residuals[-1] / residuals[-2] if len(residuals) >= 2 and residuals[-2] > 0 else float("nan")
    message = (f"Orbit at omega={omega:.6g} not settled after {max_periods} periods: "
               f"residual {residuals[-1] if residuals else float('nan'):.3e}, "
               f"per-period decay factor {decay:.4f}")
    logger.error(message)
    raise OracleError(message)


def compare_orbit(solution, basis, orbit):
    """Errors of x = U eta against the orbit on the solution's nodes, after a phase-shift scan."""
    if not np.isclose(solution.omega, orbit.omega, rtol=1e-12, atol=0.0):
        raise OracleError(f"Frequency mismatch: solution {solution.omega}, orbit {orbit.omega}.")
    if not orbit.settled:
        raise OracleError("Orbit is not settled.")

    T = orbit.period
    x = solution.eta_nodal @ basis.U.T
    N = len(x)
    nodes = np.arange(N) * (T / N)
    phases = orbit.phases

    def sampled(shift):
        return np.stack([np.interp(nodes + shift, phases, column, period=T) for column in orbit.samples.T],
                        axis=-1)

    shifts = phases.copy()
    shifts[shifts > 0.5 * T] -= T
    best_shift, best_error = 0.0, np.inf
    for shift in shifts:
        error = float(np.max(np.abs(x - sampled(shift))))
        if error < best_error:
            best_shift, best_error = float(shift), error

    difference = x - sampled(best_shift)
    per_dof = np.max(np.abs(difference), axis=0)
    rms = float(np.sqrt(np.mean(difference ** 2)))
    logger.info(f"Oracle comparison at omega={orbit.omega:.6g}: sup={best_error:.3e}, "
                f"rms={rms:.3e}, shift={best_shift:.3e}")
    return OrbitComparison(best_error, rms, per_dof, best_shift, T / N)
