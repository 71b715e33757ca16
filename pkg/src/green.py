################################################################################
# FILE: green.py
# DESCRIPTION: Periodic Green's functions of damped single-DOF modal equations,
#              the non-resonance check, the linear periodic response and the
#              operator-norm bound Gamma(T).
# AUTHOR: MSCRNT LLC
#
# THIS CODE IS PROPRIETARY PROPERTY OF MSCRNT LLC.
################################################################################

import os
import logging
import logging.handlers
from dataclasses import dataclass

import numpy as np

from modal import ModeConstants, UNDERDAMPED, CRITICAL

# Configure logging
LOG_DIR = os.getenv("FRC_LOG_DIR", "logs")
os.makedirs(LOG_DIR, exist_ok=True)
log_file = os.path.join(LOG_DIR, "frcSolver.log")

logger = logging.getLogger("green")
logger.setLevel(logging.INFO)
if not logger.handlers:
    handler = logging.handlers.TimedRotatingFileHandler(log_file, when="midnight", interval=1, backupCount=7, utc=True)
    handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(message)s'))
    logger.addHandler(handler)

RESONANCE_TOL = 1e-9
DOMAIN_SLACK = 1e-12

CLOSED_FORM = "closed_form"
QUADRATURE = "quadrature"


class ResonanceError(ValueError):
    """An eigenvalue sits on i * (2 pi / T) * l; no unique T-periodic response."""

    def __init__(self, violations, T):
        self.violations = list(violations)
        self.T = T
        listed = ", ".join(f"mode {j} (l={l})" for j, l in self.violations)
        super().__init__(f"Resonance at T={T:.6g}: {listed}")


@dataclass(frozen=True)
class GreenKernel:
    mode: ModeConstants
    period: float


def check_nonresonance(basis, T):
    """Return [(mode position, l), ...] for eigenvalues within tolerance of i*(2pi/T)*l."""
    if T <= 0:
        raise ValueError(f"Period must be positive, got {T}.")
    base = 2.0 * np.pi / T
    violations = []
    for position, mode in enumerate(basis.modes, start=1):
        for lam in mode.lambda_pair:
            l = int(np.rint(lam.imag / base))
            if abs(lam - 1j * base * l) <= RESONANCE_TOL * base:
                violations.append((position, abs(l)))
    return sorted(set(violations))


def green_value(kernel, t):
    """L(t, T) for t in (-T, T]; works elementwise on arrays. h(0) = 1."""
    T = kernel.period
    t = np.asarray(t, dtype=float)
    if np.any(t <= -T * (1.0 + DOMAIN_SLACK)) or np.any(t > T * (1.0 + DOMAIN_SLACK)):
        raise ValueError(f"Green's function argument outside (-T, T] with T={T}.")

    mode = kernel.mode
    heaviside = (t >= 0.0).astype(float)
    t_plus = np.maximum(t, 0.0)

    if mode.regime == UNDERDAMPED:
        a, w = mode.alpha, mode.omega
        r = np.exp(a * T)
        periodic = (np.exp(a * (t + T)) * (np.sin(w * (t + T)) - r * np.sin(w * t))
                    / (1.0 + r * r - 2.0 * r * np.cos(w * T)))
        causal = heaviside * np.exp(a * t_plus) * np.sin(w * t)
        value = (periodic + causal) / w
    elif mode.regime == CRITICAL:
        a = mode.alpha
        r = np.exp(a * T)
        value = (np.exp(a * (t + T)) * ((1.0 - r) * t + T) / (1.0 - r) ** 2
                 + heaviside * t * np.exp(a * t_plus))
    else:
        b, g = mode.beta.real, mode.gamma.real
        value = (np.exp(b * (t + T)) / (1.0 - np.exp(b * T))
                 - np.exp(g * (t + T)) / (1.0 - np.exp(g * T))
                 + heaviside * (np.exp(b * t_plus) - np.exp(g * t_plus))) / (b - g)

    return float(value) if value.ndim == 0 else value


def _raise_on_resonance(basis, T):
    violations = check_nonresonance(basis, T)
    if violations:
        logger.error(f"Non-resonance condition violated at T={T:.6g}: {violations}")
        raise ResonanceError(violations, T)


def linear_response(basis, modal_forcing, T, grid, path=CLOSED_FORM, operator=None):
    """Nodal T-periodic response (N, m) of the linear modal equations.

    closed_form sums the complex harmonic responses; quadrature convolves the
    Green's kernels with the nodal modal load (reusing `operator` if given).
    """
    _raise_on_resonance(basis, T)
    if modal_forcing.n != basis.m:
        raise ValueError(f"Modal forcing has dimension {modal_forcing.n}, basis has m={basis.m}.")

    base = 2.0 * np.pi / T
    nodes = grid.nodes
    if path == CLOSED_FORM:
        eta = np.zeros((len(nodes), basis.m))
        for h in modal_forcing.harmonics:
            w = h.k * base
            response = 1.0 / (basis.omega0 ** 2 - w * w + 2j * basis.zeta * basis.omega0 * w)
            phasor = response * (h.cos - 1j * h.sin)
            eta += np.real(phasor[None, :] * np.exp(1j * w * nodes)[:, None])
        return eta

    if path == QUADRATURE:
        # local import: collocation builds on this module
        import collocation
        if operator is None:
            operator = collocation.assemble_convolution(basis, grid)
        load = np.zeros((len(nodes), basis.m))
        for h in modal_forcing.harmonics:
            phase = h.k * base * nodes[:, None]
            load += h.cos * np.cos(phase) + h.sin * np.sin(phase)
        return collocation.apply_convolution(operator, load)

    raise ValueError(f"Unknown linear response path '{path}'.")


def gamma_bound(basis, T):
    """Gamma(T) = max over modes and eigenvalues of T * max(|e^{lT}|, 1) / |1 - e^{lT}|."""
    _raise_on_resonance(basis, T)
    gamma = 0.0
    for position, mode in enumerate(basis.modes, start=1):
        for lam in mode.lambda_pair:
            z = np.exp(lam * T)
            denom = abs(1.0 - z)
            if denom == 0.0:
                raise ResonanceError([(position, 0)], T)
            gamma = max(gamma, T * max(abs(z), 1.0) / denom)
    return float(gamma)


if __name__ == "__main__":
    from model import build_oscillator_chain
    from modal import compute_modes

    basis = compute_modes(build_oscillator_chain(3))
    for T in (1.0, 2.0 * np.pi, 20.0):
        print(f"T={T:.4f}  Gamma={gamma_bound(basis, T):.6f}")
