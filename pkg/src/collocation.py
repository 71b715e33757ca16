################################################################################
# FILE: collocation.py
# DESCRIPTION: Uniform periodic collocation grid, hat-function interpolation and
#              the precomputed discrete convolution operator A_N (circulant per
#              mode, applied densely or through the FFT).
# AUTHOR: MSCRNT LLC
#
# THIS CODE IS PROPRIETARY PROPERTY OF MSCRNT LLC.
################################################################################

import os
import logging
import logging.handlers
import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from green import GreenKernel, green_value, check_nonresonance, ResonanceError

# Configure logging
LOG_DIR = os.getenv("FRC_LOG_DIR", "logs")
os.makedirs(LOG_DIR, exist_ok=True)
log_file = os.path.join(LOG_DIR, "frcSolver.log")

logger = logging.getLogger("collocation")
logger.setLevel(logging.INFO)
if not logger.handlers:
    handler = logging.handlers.TimedRotatingFileHandler(log_file, when="midnight", interval=1, backupCount=7, utc=True)
    handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(message)s'))
    logger.addHandler(handler)

MIN_NODES = 4

DENSE = "dense"
FFT = "fft"

# Assembly instrumentation
_assembly_lock = threading.Lock()
_assembly_count = 0


class CollocationError(ValueError):
    """Bad grid parameters or nodal arrays of the wrong shape."""


def assembly_count():
    return _assembly_count


def reset_assembly_count():
    global _assembly_count
    with _assembly_lock:
        _assembly_count = 0


@dataclass(frozen=True)
class CollocationGrid:
    N: int
    T: float
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def spacing(self):
        return self.T / self.N


@dataclass(frozen=True)
class ConvolutionOperator:
    """A_j[p, q] = w_q L_j(t_p - t_q), held as circulant generators c_j[k] = A_j[k, 0]."""

    basis: object = field(repr=False)
    grid: CollocationGrid
    generators: np.ndarray
    dense: np.ndarray = field(repr=False)
    spectra: np.ndarray = field(repr=False)

    @property
    def m(self):
        return self.generators.shape[0]

    @property
    def N(self):
        return self.generators.shape[1]

    @property
    def T(self):
        return self.grid.T


def build_grid(N, T):
    if int(N) != N or N < MIN_NODES:
        raise CollocationError(f"Need an integer N >= {MIN_NODES} collocation nodes, got {N}.")
    if not T > 0:
        raise CollocationError(f"Period must be positive, got {T}.")
    N = int(N)
    nodes = np.arange(N) * (T / N)
    weights = np.full(N, T / N)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return CollocationGrid(N, float(T), nodes, weights)


def kernel_generators(basis, T, N):
    """(m, N) array c_j[k] = (T/N) * L_j(k T / N)."""
    lags = np.arange(N) * (T / N)
    return np.stack([(T / N) * green_value(GreenKernel(mode, T), lags) for mode in basis.modes])


def circulant(generators):
    """(m, N) generators -> (m, N, N) matrices with A[j, p, q] = c_j[(p - q) mod N]."""
    N = generators.shape[-1]
    index = (np.arange(N)[:, None] - np.arange(N)[None, :]) % N
    return generators[:, index]


def dense_apply(dense, z):
    """(m, N, N) blocks applied to nodal (N, m) values."""
    return np.einsum("jpq,qj->pj", dense, z)


def assemble_convolution(basis, grid):
    global _assembly_count
    violations = check_nonresonance(basis, grid.T)
    if violations:
        raise ResonanceError(violations, grid.T)

    generators = kernel_generators(basis, grid.T, grid.N)
    dense = circulant(generators)
    spectra = scipy.fft.rfft(generators, axis=-1)
    for array in (generators, dense, spectra):
        array.setflags(write=False)

    with _assembly_lock:
        _assembly_count += 1
    logger.debug(f"Assembled convolution operator: m={basis.m}, N={grid.N}, T={grid.T:.6g}")
    return ConvolutionOperator(basis, grid, generators, dense, spectra)


def _check_nodal(A, z):
    z = np.asarray(z, dtype=float)
    if z.shape != (A.N, A.m):
        raise CollocationError(f"Nodal array has shape {z.shape}, operator expects ({A.N}, {A.m}).")
    return z


def apply_convolution(A, z, method=DENSE):
    z = _check_nodal(A, z)
    if method == DENSE:
        return dense_apply(A.dense, z)
    if method == FFT:
        product = A.spectra * scipy.fft.rfft(z.T, axis=-1)
        return scipy.fft.irfft(product, n=A.N, axis=-1).T
    raise CollocationError(f"Unknown convolution method '{method}'.")


def operator_inf_norm(A):
    """max_j ||A_j||_inf; a circulant's row sums all equal sum_k |c_j[k]|."""
    if A.generators.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(A.generators), axis=-1)))


def coupled_operator_bound(A):
    """Bound for A on nodal m-vectors under the max-over-nodes Euclidean norm."""
    return float(np.sum(np.max(np.abs(A.generators), axis=0)))


def hat_basis(grid, t):
    """(len(t), N) matrix of periodic hat functions v_i(t)."""
    t = np.atleast_1d(np.asarray(t, dtype=float)) % grid.T
    s = t / grid.spacing
    left = np.floor(s).astype(int) % grid.N
    frac = s - np.floor(s)
    values = np.zeros((len(t), grid.N))
    rows = np.arange(len(t))
    values[rows, left] += 1.0 - frac
    values[rows, (left + 1) % grid.N] += frac
    return values


def interpolate(grid, nodal, t):
    """Periodic piecewise-linear interpolant of nodal values (N,) or (N, m) at t."""
    nodal = np.asarray(nodal, dtype=float)
    if nodal.shape[0] != grid.N:
        raise CollocationError(f"Expected {grid.N} nodal values, got {nodal.shape[0]}.")
    t = np.asarray(t, dtype=float)
    if nodal.ndim == 1:
        return np.interp(t, grid.nodes, nodal, period=grid.T)
    return np.stack([np.interp(t, grid.nodes, column, period=grid.T) for column in nodal.T], axis=-1)


def sup_norm(nodal):
    """max over nodes of the Euclidean norm of the value at the node."""
    nodal = np.asarray(nodal, dtype=float)
    if nodal.size == 0:
        return 0.0
    if nodal.ndim == 1:
        return float(np.max(np.abs(nodal)))
    return float(np.max(np.linalg.norm(nodal, axis=-1)))
