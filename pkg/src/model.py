################################################################################
# FILE: model.py
# DESCRIPTION: Mechanical system definitions (M, C, K matrices, sparse polynomial
#              nonlinearity, Fourier forcing), the oscillator-chain generator and
#              the JSON model file loader.
# AUTHOR: MSCRNT LLC
#
# THIS CODE IS PROPRIETARY PROPERTY OF MSCRNT LLC.
################################################################################

import os
import json
import logging
import logging.handlers
import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse

# Configure logging (single daily log file shared by all modules)
LOG_DIR = os.getenv("FRC_LOG_DIR", "logs")
os.makedirs(LOG_DIR, exist_ok=True)
log_file = os.path.join(LOG_DIR, "frcSolver.log")

logger = logging.getLogger("model")
logger.setLevel(logging.INFO)
if not logger.handlers:
    handler = logging.handlers.TimedRotatingFileHandler(log_file, when="midnight", interval=1, backupCount=7, utc=True)
    handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(message)s'))
    logger.addHandler(handler)

SYMMETRY_TOL = 1e-12


class ModelError(ValueError):
    """Base class for everything wrong with a mechanical model."""


class ModelParseError(ModelError):
    """Model file could not be parsed; message carries line/field diagnostics."""


class ModelValidationError(ModelError):
    """Model parsed but violates an invariant (asymmetric M, duplicate term, ...)."""


def _readonly(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class PolyNonlinearity:
    """Sparse quadratic + cubic polynomial S(x) with 0-based indices.

    quadratic_terms: ((row, (j, k), coef), ...)
    cubic_terms:     ((row, (j, k, l), coef), ...)

    Index multisets are sorted on construction; a repeated (row, multiset)
    pair is rejected because coefficients must be pre-summed.
    """

    n: int
    quadratic_terms: tuple = ()
    cubic_terms: tuple = ()
    _groups: tuple = field(default=(), init=False, repr=False, compare=False)
    _force_map: object = field(default=None, init=False, repr=False, compare=False)
    _jac_map: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        quadratic = self._normalise(self.quadratic_terms, 2)
        cubic = self._normalise(self.cubic_terms, 3)
        object.__setattr__(self, "quadratic_terms", quadratic)
        object.__setattr__(self, "cubic_terms", cubic)

        # (rows, index matrix, coefficients) per degree, in evaluation order
        groups = []
        for terms, degree in ((quadratic, 2), (cubic, 3)):
            if terms:
                groups.append((np.array([t[0] for t in terms]),
                               np.array([t[1] for t in terms], dtype=int).reshape(-1, degree),
                               np.array([t[2] for t in terms])))
        object.__setattr__(self, "_groups", tuple(groups))

        term_rows = np.concatenate([g[0] for g in groups]) if groups else np.zeros(0, dtype=int)
        force_map = sparse.csr_matrix(
            (np.ones(len(term_rows)), (term_rows, np.arange(len(term_rows)))),
            shape=(self.n, len(term_rows)))

        # Jacobian contributions are ordered group by group, then factor position
        jac_rows = [rows * self.n + idx[:, a] for rows, idx, _ in groups for a in range(idx.shape[1])]
        jac_rows = np.concatenate(jac_rows) if jac_rows else np.zeros(0, dtype=int)
        jac_map = sparse.csr_matrix(
            (np.ones(len(jac_rows)), (jac_rows, np.arange(len(jac_rows)))),
            shape=(self.n * self.n, len(jac_rows)))
        object.__setattr__(self, "_force_map", force_map)
        object.__setattr__(self, "_jac_map", jac_map)

    def _normalise(self, terms, degree):
        seen = set()
        normalised = []
        for term in terms:
            row, idx, coef = term
            idx = tuple(sorted(int(i) for i in idx))
            row = int(row)
            if len(idx) != degree:
                raise ModelValidationError(f"Degree-{degree} term {term} has {len(idx)} indices.")
            if not 0 <= row < self.n or any(not 0 <= i < self.n for i in idx):
                raise ModelValidationError(f"Term {term} indexes outside 0..{self.n - 1}.")
            if (row, idx) in seen:
                raise ModelValidationError(
                    f"Duplicate degree-{degree} entry for row {row}, indices {idx}; coefficients must be pre-summed.")
            seen.add((row, idx))
            if not np.isfinite(coef):
                raise ModelValidationError(f"Non-finite coefficient in term {term}.")
            normalised.append((row, idx, float(coef)))
        return tuple(normalised)

    @property
    def is_empty(self):
        return not self.quadratic_terms and not self.cubic_terms


@dataclass(frozen=True)
class MechModel:
    """M x'' + C x' + K x + S(x) = f(t)."""

    n: int
    M: np.ndarray
    C: np.ndarray
    K: np.ndarray
    nonlinearity: PolyNonlinearity
    label: str = ""

    def __post_init__(self):
        for name in ("M", "C", "K"):
            matrix = _readonly(getattr(self, name))
            if matrix.shape != (self.n, self.n):
                raise ModelValidationError(f"{name} has shape {matrix.shape}, expected ({self.n}, {self.n}).")
            if not np.all(np.isfinite(matrix)):
                raise ModelValidationError(f"{name} contains non-finite entries.")
            object.__setattr__(self, name, matrix)
        if self.nonlinearity.n != self.n:
            raise ModelValidationError(f"Nonlinearity dimension {self.nonlinearity.n} does not match n={self.n}.")

        for name in ("M", "K"):
            matrix = getattr(self, name)
            scale = max(np.max(np.abs(matrix)), 1.0)
            if np.max(np.abs(matrix - matrix.T)) > SYMMETRY_TOL * scale:
                raise ModelValidationError(f"{name} is not symmetric.")
        if np.min(np.linalg.eigvalsh(self.M)) <= 0.0:
            raise ModelValidationError("M is not positive definite.")
        k_eigs = np.linalg.eigvalsh(self.K)
        if np.min(k_eigs) < -SYMMETRY_TOL * max(np.max(np.abs(k_eigs)), 1.0):
            raise ModelValidationError("K is not positive semi-definite.")

    @property
    def is_linear(self):
        return self.nonlinearity.is_empty


@dataclass(frozen=True)
class Harmonic:
    k: int
    cos: np.ndarray
    sin: np.ndarray


@dataclass(frozen=True)
class ForcingSpec:
    """f(t) = sum_k [c_k cos(k Omega t) + s_k sin(k Omega t)], mean-free."""

    n: int
    harmonics: tuple = ()

    def __post_init__(self):
        normalised = []
        seen = set()
        for h in self.harmonics:
            if not isinstance(h, Harmonic):
                h = Harmonic(*h)
            k = int(h.k)
            if k < 1 or k != h.k:
                raise ModelValidationError(f"Harmonic index must be an integer >= 1, got {h.k}.")
            if k in seen:
                raise ModelValidationError(f"Harmonic {k} listed twice.")
            seen.add(k)
            cos = _readonly(np.zeros(self.n) if h.cos is None else h.cos)
            sin = _readonly(np.zeros(self.n) if h.sin is None else h.sin)
            if cos.shape != (self.n,) or sin.shape != (self.n,):
                raise ModelValidationError(f"Harmonic {k} coefficient vectors must have length {self.n}.")
            normalised.append(Harmonic(k, cos, sin))
        object.__setattr__(self, "harmonics", tuple(sorted(normalised, key=lambda h: h.k)))

    def scaled(self, factor):
        return ForcingSpec(self.n, tuple(Harmonic(h.k, factor * h.cos, factor * h.sin) for h in self.harmonics))


def uniform_sine_forcing(n, amplitude):
    """Every DOF driven by amplitude * sin(Omega t)."""
    return ForcingSpec(n, (Harmonic(1, np.zeros(n), np.full(n, float(amplitude))),))


def _cube_of_linear(coefficients):
    """Expand (sum_v a_v x_v)^3 into {sorted index triple: coefficient}."""
    expanded = {}
    for (i, a), (j, b), (k, c) in itertools.product(coefficients.items(), repeat=3):
        key = tuple(sorted((i, j, k)))
        expanded[key] = expanded.get(key, 0.0) + a * b * c
    return expanded


def build_oscillator_chain(n, mass=1.0, k=1.0, c=1.0, kappa=0.5):
    """n masses between two grounded walls, linear springs/dampers and cubic springs."""
    if int(n) != n or n < 1:
        raise ModelValidationError(f"Chain length must be a positive integer, got {n}.")
    if mass <= 0 or k <= 0:
        raise ModelValidationError(f"mass and k must be positive (mass={mass}, k={k}).")
    if c < 0 or kappa < 0:
        raise ModelValidationError(f"c and kappa must be non-negative (c={c}, kappa={kappa}).")
    n = int(n)

    def tridiag(value):
        return (np.diag(np.full(n, 2.0 * value))
                - np.diag(np.full(n - 1, value), 1)
                - np.diag(np.full(n - 1, value), -1))

    # spring e joins node e (left) and node e+1 (right); nodes 0 and n+1 are walls
    cubic = {}
    if kappa > 0:
        for e in range(n + 1):
            stretch = {}
            if e + 1 <= n:
                stretch[e] = 1.0  # x_{e+1} in 0-based storage
            if e >= 1:
                stretch[e - 1] = -1.0
            for idx, coef in _cube_of_linear(stretch).items():
                if e + 1 <= n:
                    cubic[(e, idx)] = cubic.get((e, idx), 0.0) + kappa * coef
                if e >= 1:
                    cubic[(e - 1, idx)] = cubic.get((e - 1, idx), 0.0) - kappa * coef
    cubic_terms = tuple((row, idx, coef) for (row, idx), coef in sorted(cubic.items()) if coef != 0.0)

    model = MechModel(
        n=n,
        M=mass * np.eye(n),
        C=tridiag(c),
        K=tridiag(k),
        nonlinearity=PolyNonlinearity(n, (), cubic_terms),
        label=f"chain(n={n}, m={mass}, k={k}, c={c}, kappa={kappa})",
    )
    logger.info(f"Built oscillator chain {model.label} with {len(cubic_terms)} cubic terms.")
    return model


def _check_state(model, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.n:
        raise ModelError(f"State has dimension {x.shape[-1]}, model has n={model.n}.")
    return x


def eval_nonlinearity(model, x):
    """S(x) for a single state (n,) or a stack of states (..., n)."""
    x = _check_state(model, x)
    nl = model.nonlinearity
    if nl.is_empty:
        return np.zeros_like(x)
    flat = x.reshape(-1, model.n)
    values = [coef * np.prod(flat[:, idx], axis=-1) for _, idx, coef in nl._groups]
    values = np.concatenate(values, axis=1)
    return (nl._force_map @ values.T).T.reshape(x.shape)


def eval_nonlinearity_jacobian(model, x):
    """Analytic DS(x); (n,) -> (n, n) or (..., n) -> (..., n, n)."""
    x = _check_state(model, x)
    nl = model.nonlinearity
    n = model.n
    if nl.is_empty:
        return np.zeros(x.shape + (n,))
    flat = x.reshape(-1, n)
    contributions = []
    for _, idx, coef in nl._groups:
        factors = flat[:, idx]
        for a in range(idx.shape[1]):
            others = np.delete(factors, a, axis=-1)
            contributions.append(coef * np.prod(others, axis=-1))
    values = np.concatenate(contributions, axis=1)
    return (nl._jac_map @ values.T).T.reshape(x.shape + (n,))


def lipschitz_on_ball(model, radius):
    """Upper bound for sup ||DS(x)||_2 over ||x||_2 <= radius.

    Every entry of DS is a sum of coef * monomial with |monomial| <= radius**deg;
    the spectral norm of the non-negative bound matrix dominates ||DS||_2.
    """
    nl = model.nonlinearity
    bound = np.zeros((model.n, model.n))
    for row, idx, coef in nl.quadratic_terms + nl.cubic_terms:
        for i in idx:
            bound[row, i] += abs(coef) * radius ** (len(idx) - 1)
    if not bound.any():
        return 0.0
    return float(np.linalg.norm(bound, 2))


def eval_forcing(forcing, t, omega):
    """f(t) at base frequency omega; scalar t -> (n,), array t -> (len(t), n)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape + (forcing.n,))
    for h in forcing.harmonics:
        phase = h.k * omega * t[..., None]
        out += h.cos * np.cos(phase) + h.sin * np.sin(phase)
    return out


# Model file loading -----------------------------------------------------------

def _field(data, name, path, where="model"):
    if name not in data:
        raise ModelParseError(f"{path}: missing field '{name}' in {where}.")
    return data[name]


def _parse_matrix(value, n, name, path):
    if isinstance(value, dict):
        if "tridiag" not in value:
            raise ModelParseError(f"{path}: field '{name}' must be a dense array or {{\"tridiag\": ...}}.")
        spec = value["tridiag"]
        try:
            diag = np.broadcast_to(np.asarray(spec["diag"], dtype=float), (n,))
            off = np.broadcast_to(np.asarray(spec.get("off", 0.0), dtype=float), (max(n - 1, 0),))
        except (KeyError, ValueError, TypeError) as e:
            raise ModelParseError(f"{path}: bad tridiag shorthand in field '{name}': {e}") from e
        return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    try:
        matrix = np.asarray(value, dtype=float)
    except (ValueError, TypeError) as e:
        raise ModelParseError(f"{path}: field '{name}' is not a numeric array: {e}") from e
    if matrix.shape != (n, n):
        raise ModelParseError(f"{path}: field '{name}' has shape {matrix.shape}, expected ({n}, {n}).")
    return matrix


def _parse_terms(entries, degree, path, name):
    terms = []
    for pos, entry in enumerate(entries or []):
        if len(entry) != degree + 2:
            raise ModelParseError(
                f"{path}: nonlinearity.{name}[{pos}] needs {degree + 2} numbers (row, {degree} indices, coef).")
        try:
            row = int(entry[0]) - 1
            idx = tuple(int(i) - 1 for i in entry[1:-1])
            coef = float(entry[-1])
        except (ValueError, TypeError) as e:
            raise ModelParseError(f"{path}: nonlinearity.{name}[{pos}]: {e}") from e
        terms.append((row, idx, coef))
    return terms


def load_model(path):
    """Read a JSON model file -> (MechModel, ForcingSpec). Indices in the file are 1-based."""
    logger.info(f"Loading model file: {path}")
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ModelParseError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    except OSError as e:
        raise ModelParseError(f"{path}: cannot read model file: {e}") from e
    if not isinstance(data, dict):
        raise ModelParseError(f"{path}: top level must be a JSON object.")

    n = _field(data, "n", path)
    if not isinstance(n, int) or n < 1:
        raise ModelParseError(f"{path}: field 'n' must be a positive integer, got {n!r}.")
    M = _parse_matrix(_field(data, "M", path), n, "M", path)
    C = _parse_matrix(_field(data, "C", path), n, "C", path)
    K = _parse_matrix(_field(data, "K", path), n, "K", path)

    nl_data = data.get("nonlinearity") or {}
    quadratic = _parse_terms(nl_data.get("quadratic"), 2, path, "quadratic")
    cubic = _parse_terms(nl_data.get("cubic"), 3, path, "cubic")

    harmonics = []
    for pos, h in enumerate((data.get("forcing") or {}).get("harmonics", [])):
        k = _field(h, "k", path, where=f"forcing.harmonics[{pos}]")
        cos = h.get("cos")
        sin = h.get("sin")
        harmonics.append(Harmonic(k, None if cos is None else np.asarray(cos, dtype=float),
                                  None if sin is None else np.asarray(sin, dtype=float)))

    try:
        nonlinearity = PolyNonlinearity(n, tuple(quadratic), tuple(cubic))
        model = MechModel(n=n, M=M, C=C, K=K, nonlinearity=nonlinearity,
                          label=data.get("label", os.path.basename(path)))
        forcing = ForcingSpec(n, tuple(harmonics))
    except ModelValidationError as e:
        logger.error(f"Model file {path} failed validation: {e}")
        raise ModelValidationError(f"{path}: {e}") from e

    logger.info(f"Loaded model '{model.label}' (n={n}, {len(quadratic)} quadratic, {len(cubic)} cubic terms).")
    return model, forcing
