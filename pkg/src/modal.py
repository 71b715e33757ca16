################################################################################
# FILE: modal.py
# DESCRIPTION: Undamped modal analysis, damping ratios, complex eigenvalue
#              constants and modal truncation (Galerkin projection).
# AUTHOR: MSCRNT LLC
#
# THIS CODE IS PROPRIETARY PROPERTY OF MSCRNT LLC.
################################################################################

import os
import logging
import logging.handlers
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from model import ForcingSpec, Harmonic

# Configure logging
LOG_DIR = os.getenv("FRC_LOG_DIR", "logs")
os.makedirs(LOG_DIR, exist_ok=True)
log_file = os.path.join(LOG_DIR, "frcSolver.log")

logger = logging.getLogger("modal")
logger.setLevel(logging.INFO)
if not logger.handlers:
    handler = logging.handlers.TimedRotatingFileHandler(log_file, when="midnight", interval=1, backupCount=7, utc=True)
    handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(message)s'))
    logger.addHandler(handler)

PROPORTIONAL_DAMPING_TOL = 1e-8
CRITICAL_TOL = 1e-12
RIGID_BODY_TOL = 1e-10

UNDERDAMPED = "underdamped"
CRITICAL = "critical"
OVERDAMPED = "overdamped"


class UnsupportedModelError(ValueError):
    """Model cannot be decoupled by undamped modes (rigid body, non-proportional C, ...)."""


class ModeSelectionError(ValueError):
    """Bad mode index set passed to truncate()."""


@dataclass(frozen=True)
class ModeConstants:
    regime: str
    alpha: float
    omega: float
    beta: complex
    gamma: complex
    lambda_pair: tuple


@dataclass(frozen=True)
class ModalBasis:
    n: int
    m: int
    U: np.ndarray
    omega0: np.ndarray
    zeta: np.ndarray
    modes: tuple
    mode_indices: tuple

    @property
    def spectral_norm(self):
        """||U_m||_2 (equal to ||U_m^T||_2)."""
        return float(np.linalg.norm(self.U, 2))


def eigen_constants(omega0, zeta):
    """Roots of lambda^2 + 2 zeta omega0 lambda + omega0^2 and the derived constants.

    beta is the root with the minus sign in front of the square root, gamma the
    one with the plus sign; alpha = Re(gamma), omega = |Im(gamma)|.
    """
    if abs(zeta - 1.0) <= CRITICAL_TOL:
        root = -omega0
        return ModeConstants(CRITICAL, float(root), 0.0, complex(root), complex(root),
                             (complex(root), complex(root)))
    disc = np.sqrt(complex(zeta * zeta - 1.0))
    beta = (-zeta - disc) * omega0
    gamma = (-zeta + disc) * omega0
    regime = UNDERDAMPED if zeta < 1.0 else OVERDAMPED
    return ModeConstants(regime, float(gamma.real), float(abs(gamma.imag)),
                         complex(beta), complex(gamma), (complex(beta), complex(gamma)))


def compute_modes(model):
    """All n mass-normalised undamped modes, ascending frequencies."""
    try:
        eigvals, vectors = scipy.linalg.eigh(model.K, model.M)
    except (np.linalg.LinAlgError, ValueError) as e:
        logger.error(f"Generalized eigenproblem failed for {model.label}: {e}")
        raise UnsupportedModelError(f"Eigen-solver failure: {e}") from e

    scale = max(np.max(np.abs(eigvals)), 1.0)
    if np.min(eigvals) <= RIGID_BODY_TOL * scale:
        raise UnsupportedModelError(
            f"Model '{model.label}' has a zero-frequency (rigid-body) mode; not supported.")

    # sign convention: first significant entry of each mode positive
    for j in range(vectors.shape[1]):
        column = vectors[:, j]
        first = np.flatnonzero(np.abs(column) > 1e-12 * np.max(np.abs(column)))[0]
        if column[first] < 0:
            vectors[:, j] = -column

    modal_damping = vectors.T @ model.C @ vectors
    diag = np.diag(modal_damping).copy()
    off = modal_damping - np.diag(diag)
    if np.max(np.abs(off), initial=0.0) > PROPORTIONAL_DAMPING_TOL * max(np.max(np.abs(diag)), 1e-300):
        raise UnsupportedModelError(
            f"Damping of '{model.label}' is not proportional: U^T C U has off-diagonal "
            f"magnitude {np.max(np.abs(off)):.3e}.")

    omega0 = np.sqrt(eigvals)
    zeta = diag / (2.0 * omega0)
    if np.any(zeta < -1e-14):
        raise UnsupportedModelError(f"Negative modal damping in '{model.label}'.")
    zeta = np.maximum(zeta, 0.0)

    U = np.array(vectors)
    U.setflags(write=False)
    omega0.setflags(write=False)
    zeta.setflags(write=False)
    modes = tuple(eigen_constants(w, z) for w, z in zip(omega0, zeta))
    logger.info(f"Computed {model.n} modes for '{model.label}': "
                f"omega0 in [{omega0[0]:.6g}, {omega0[-1]:.6g}], zeta in [{zeta.min():.4g}, {zeta.max():.4g}]")
    return ModalBasis(model.n, model.n, U, omega0, zeta, modes, tuple(range(1, model.n + 1)))


def truncate(basis, mode_indices):
    """Keep the listed modes (1-based positions in `basis`), in the given order."""
    mode_indices = [int(i) for i in mode_indices]
    if not mode_indices:
        raise ModeSelectionError("At least one mode must be retained.")
    if len(set(mode_indices)) != len(mode_indices):
        raise ModeSelectionError(f"Duplicate mode index in {mode_indices}.")
    bad = [i for i in mode_indices if not 1 <= i <= basis.m]
    if bad:
        raise ModeSelectionError(f"Mode indices {bad} outside 1..{basis.m}.")

    cols = [i - 1 for i in mode_indices]
    U = basis.U[:, cols]
    omega0 = basis.omega0[cols]
    zeta = basis.zeta[cols]
    for array in (U, omega0, zeta):
        array.setflags(write=False)
    logger.info(f"Truncated basis to modes {mode_indices}.")
    return ModalBasis(basis.n, len(cols), U, omega0, zeta,
                      tuple(basis.modes[c] for c in cols),
                      tuple(basis.mode_indices[c] for c in cols))


def project_forcing(basis, forcing):
    """phi(t) = U_m^T f(t), harmonic by harmonic."""
    if forcing.n != basis.n:
        raise ValueError(f"Forcing has dimension {forcing.n}, basis expects {basis.n}.")
    return ForcingSpec(basis.m, tuple(Harmonic(h.k, basis.U.T @ h.cos, basis.U.T @ h.sin)
                                      for h in forcing.harmonics))
