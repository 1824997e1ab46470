"""Maximum-likelihood single-qubit tomography from three-basis counts.

Outcome 0 of each basis is ``|e>`` (z), ``(|e> + |l>)/sqrt2`` (x) or
``(|e> + i|l>)/sqrt2`` (y); outcome 1 is the orthogonal state. Counts in each
basis are Poisson with an unknown basis intensity. Profiling that intensity
out leaves a multinomial likelihood per basis, which is what is maximized.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, NamedTuple, Optional

import numpy as np
from scipy.optimize import minimize

from ..errors import ConfigurationError, DegenerateDataError, FormatError

BASES = ("z", "x", "y")
_S = 2.0 ** -0.5
STATES = {
    ("z", 0): np.array([1.0, 0.0], dtype=complex),
    ("z", 1): np.array([0.0, 1.0], dtype=complex),
    ("x", 0): np.array([_S, _S], dtype=complex),
    ("x", 1): np.array([_S, -_S], dtype=complex),
    ("y", 0): np.array([_S, 1j * _S], dtype=complex),
    ("y", 1): np.array([_S, -1j * _S], dtype=complex),
}
PROJECTORS = {k: np.outer(v, v.conj()) for k, v in STATES.items()}
NAMED_STATES = {"e": STATES[("z", 0)], "l": STATES[("z", 1)], "+": STATES[("x", 0)], "-": STATES[("x", 1)],
                "+i": STATES[("y", 0)], "-i": STATES[("y", 1)]}


@dataclass(frozen=True)
class TomographyData:
    """Counts per ``(basis, outcome)`` and optional relative detection efficiencies."""

    counts: Mapping[tuple, int]
    calibration: Mapping[tuple, float] = field(default_factory=dict)
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        counts = {}
        for key, n in dict(self.counts).items():
            b, o = key
            if b not in BASES or o not in (0, 1):
                raise ConfigurationError(f"unknown measurement {key!r}")
            if isinstance(n, float) and not float(n).is_integer():
                raise ConfigurationError(f"count for {key} is not an integer: {n}")
            n = int(n)
            if n < 0:
                raise ConfigurationError(f"negative count for {key}")
            counts[(b, o)] = n
        for b in BASES:
            for o in (0, 1):
                if (b, o) not in counts:
                    raise ConfigurationError(f"missing counts for basis {b!r} outcome {o}")
        cal = {k: 1.0 for k in counts}
        for k, v in dict(self.calibration).items():
            if k not in cal or not v > 0:
                raise ConfigurationError(f"calibration factor for {k!r} must be positive")
            cal[k] = float(v)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "calibration", cal)
        object.__setattr__(self, "metadata", dict(self.metadata))

    def basis_total(self, b: str) -> int:
        return self.counts[(b, 0)] + self.counts[(b, 1)]

    def as_array(self) -> np.ndarray:
        return np.array([self.counts[(b, o)] for b in BASES for o in (0, 1)], dtype=np.int64)

    @classmethod
    def from_array(cls, arr, calibration=None) -> "TomographyData":
        arr = list(arr)
        keys = [(b, o) for b in BASES for o in (0, 1)]
        return cls(dict(zip(keys, arr)), calibration or {})


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ConfigurationError("density matrix must be 2x2")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def is_valid(self, herm_tol=1e-12, trace_tol=1e-12, eig_tol=1e-10) -> bool:
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > herm_tol:
            return False
        if abs(np.trace(m) - 1.0) > trace_tol:
            return False
        return bool(np.min(np.linalg.eigvalsh(0.5 * (m + m.conj().T))) >= -eig_tol)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))

    def probability(self, key) -> float:
        return float(np.real(np.trace(PROJECTORS[key] @ self.matrix)))

    @property
    def coherence(self) -> complex:
        return complex(self.matrix[0, 1])


def _target_vector(target):
    if isinstance(target, str):
        if target not in NAMED_STATES:
            raise ConfigurationError(f"unknown target state {target!r}")
        return NAMED_STATES[target]
    v = np.asarray(target, dtype=complex).reshape(2)
    n = np.linalg.norm(v)
    if n == 0:
        raise ConfigurationError("target state vector is zero")
    return v / n


def state_fidelity(rho, target) -> float:
    """``<psi| rho |psi>`` for a pure target given as a vector or a name."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    psi = _target_vector(target)
    f = float(np.real(psi.conj() @ m @ psi))
    return min(1.0, max(0.0, f))


def trace_distance(a, b) -> float:
    ma = a.matrix if isinstance(a, DensityMatrix) else np.asarray(a, dtype=complex)
    mb = b.matrix if isinstance(b, DensityMatrix) else np.asarray(b, dtype=complex)
    d = ma - mb
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T)))))


# ------------------------------------------------------------ likelihood

# T = [[t0, 0], [t2 + i t3, t1]], rho = T^H T / tr(T^H T)
_DT = [
    np.array([[1, 0], [0, 0]], dtype=complex),
    np.array([[0, 0], [0, 1]], dtype=complex),
    np.array([[0, 0], [1, 0]], dtype=complex),
    np.array([[0, 0], [1j, 0]], dtype=complex),
]
_KEYS = [(b, o) for b in BASES for o in (0, 1)]
_PI = np.array([PROJECTORS[k] for k in _KEYS])


def _t_matrix(t):
    return np.array([[t[0], 0.0], [t[2] + 1j * t[3], t[1]]], dtype=complex)


def rho_from_params(t) -> np.ndarray:
    tm = _t_matrix(t)
    m = tm.conj().T @ tm
    return m / np.real(np.trace(m))


class _Objective:
    """Negative log-likelihood per count with the basis intensities profiled out."""

    def __init__(self, data: TomographyData):
        self.n = np.array([data.counts[k] for k in _KEYS], dtype=float)
        self.c = np.array([data.calibration[k] for k in _KEYS], dtype=float)
        self.total = float(self.n.sum())

    def __call__(self, t):
        tm = _t_matrix(t)
        m = tm.conj().T @ tm
        p = np.real(np.einsum("kij,ji->k", _PI, m))
        # d p_k / d t_j = 2 Re tr(Pi_k T^H dT_j)
        dp = np.array([[2.0 * np.real(np.trace(_PI[k] @ tm.conj().T @ e)) for e in _DT] for k in range(6)])
        mk = self.c * p
        dmk = self.c[:, None] * dp
        f = 0.0
        g = np.zeros(4)
        for b in range(3):
            i, j = 2 * b, 2 * b + 1
            s = mk[i] + mk[j]
            ds = dmk[i] + dmk[j]
            for k in (i, j):
                if self.n[k] > 0:
                    if mk[k] <= 0:
                        return math.inf, g
                    f -= self.n[k] * (math.log(mk[k]) - math.log(s))
                    g -= self.n[k] * (dmk[k] / mk[k] - ds / s)
        f /= self.total
        g /= self.total
        # pin the scale of T, which the likelihood does not see
        tr = float(np.dot(t, t))
        f += (tr - 1.0) ** 2
        g += 4.0 * (tr - 1.0) * np.asarray(t)
        return f, g


class MLEResult(NamedTuple):
    rho: DensityMatrix
    nll_trace: list
    converged: bool
    iterations: int
    gradient_norm: float


def qst_mle_detailed(data: TomographyData, gtol: float = 1e-10, maxiter: int = 2000) -> MLEResult:
    for b in BASES:
        if data.basis_total(b) == 0:
            raise DegenerateDataError(f"no counts in basis {b!r}")
    obj = _Objective(data)
    t0 = np.array([_S, _S, 0.0, 0.0])
    trace = [obj(t0)[0]]

    def cb(xk):
        trace.append(obj(xk)[0])

    res = minimize(obj, t0, jac=True, method="BFGS", callback=cb, options={"gtol": gtol, "maxiter": maxiter})
    rho = rho_from_params(res.x)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.real(np.trace(rho))
    gnorm = float(np.linalg.norm(obj(res.x)[1], np.inf))
    return MLEResult(DensityMatrix(rho), trace, bool(res.success or gnorm < 1e-8), int(res.nit), gnorm)


def qst_mle(data: TomographyData) -> DensityMatrix:
    """Physical density matrix maximizing the count likelihood."""
    return qst_mle_detailed(data).rho


def linear_inversion(data: TomographyData) -> np.ndarray:
    """Unconstrained Stokes reconstruction; may be unphysical."""
    r = []
    for b in BASES:
        n0 = data.counts[(b, 0)] / data.calibration[(b, 0)]
        n1 = data.counts[(b, 1)] / data.calibration[(b, 1)]
        tot = n0 + n1
        if tot == 0:
            raise DegenerateDataError(f"no counts in basis {b!r}")
        r.append((n0 - n1) / tot)
    z, x, y = r
    return 0.5 * np.array([[1 + z, x - 1j * y], [x + 1j * y, 1 - z]])


def expected_probabilities(rho) -> dict:
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    return {k: float(np.real(np.trace(PROJECTORS[k] @ m))) for k in _KEYS}


def sample_counts(rho, shots_per_basis: int, rng, calibration=None) -> TomographyData:
    """Multinomial counts from ``rho`` with ``shots_per_basis`` detections per basis."""
    probs = expected_probabilities(rho)
    cal = dict(calibration or {})
    counts = {}
    for b in BASES:
        w = np.array([probs[(b, o)] * cal.get((b, o), 1.0) for o in (0, 1)])
        w = np.clip(w, 0.0, None)
        n0 = int(rng.binomial(shots_per_basis, w[0] / w.sum()))
        counts[(b, 0)], counts[(b, 1)] = n0, shots_per_basis - n0
    return TomographyData(counts, cal)


# ----------------------------------------------------------------- CSV IO


def read_counts_csv(src) -> TomographyData:
    """Parse ``basis,outcome,count`` rows; blank lines and ``#`` comments are skipped."""
    text = Path(src).read_text() if isinstance(src, (str, Path)) else src.read()
    counts = {}
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), 1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        cells = [c.strip() for c in row]
        if cells[:3] == ["basis", "outcome", "count"]:
            continue
        if len(cells) != 3:
            raise FormatError(f"row {lineno}: expected basis,outcome,count")
        b, o, n = cells
        outcome = {"0": 0, "1": 1, "e": 0, "l": 1, "+": 0, "-": 1, "+i": 0, "-i": 1}.get(o)
        if b not in BASES or outcome is None:
            raise FormatError(f"row {lineno}: unknown basis/outcome {b!r}/{o!r}")
        try:
            val = int(n)
        except ValueError:
            raise FormatError(f"row {lineno}: count {n!r} is not an integer") from None
        if val < 0:
            raise FormatError(f"row {lineno}: negative count")
        if (b, outcome) in counts:
            raise FormatError(f"row {lineno}: duplicate entry for {b},{o}")
        counts[(b, outcome)] = val
    missing = sorted({b for b in BASES for o in (0, 1) if (b, o) not in counts})
    if missing:
        raise FormatError(f"missing basis {', '.join(missing)}")
    return TomographyData(counts)


def write_counts_csv(data: TomographyData, dest=None) -> Optional[str]:
    lines = ["basis,outcome,count"] + [f"{b},{o},{data.counts[(b, o)]}" for b in BASES for o in (0, 1)]
    text = "\n".join(lines) + "\n"
    if dest is None:
        return text
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text)
    else:
        dest.write(text)
    return None
