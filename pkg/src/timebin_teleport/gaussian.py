"""Gaussian-state propagation and threshold-detector click probabilities.

Quadratures are ordered ``x1, p1, ..., xn, pn`` with ``x = a + a^dagger`` so
that the vacuum covariance is the identity and a coherent state of mean photon
number ``mu`` has ``|mean|**2 = 4 mu``.

Every routine runs either in float64 or, when the state was created with a
``dps`` (decimal digits) setting, in mpmath arithmetic on object arrays.
Click probabilities of rare coincidences come out of an inclusion-exclusion
sum of terms close to one, so the extended path is what makes closed-form
comparisons at the 1e-9 level meaningful.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import mpmath
import numpy as np
import scipy.linalg

from .circuit import (
    BeamSplitter,
    ClickPattern,
    Coherent,
    Detector,
    Loss,
    OpticalCircuit,
    PhaseShift,
    SinglePhoton,
    TMSV,
)
from .errors import ConfigurationError, NumericalError


class _Float:
    dps = None

    @staticmethod
    def num(x):
        return float(x)

    sqrt = staticmethod(math.sqrt)
    cos = staticmethod(math.cos)
    sin = staticmethod(math.sin)
    asinh = staticmethod(math.asinh)
    cosh = staticmethod(math.cosh)
    sinh = staticmethod(math.sinh)

    @staticmethod
    def zeros(shape):
        return np.zeros(shape)

    @staticmethod
    def eye(n):
        return np.eye(n)


class _MP:
    def __init__(self, dps):
        self.dps = int(dps)
        self.ctx = mpmath.MPContext()
        self.ctx.dps = self.dps

    def num(self, x):
        return self.ctx.mpf(x)

    def sqrt(self, x):
        return self.ctx.sqrt(x)

    def cos(self, x):
        return self.ctx.cos(x)

    def sin(self, x):
        return self.ctx.sin(x)

    def asinh(self, x):
        return self.ctx.asinh(x)

    def cosh(self, x):
        return self.ctx.cosh(x)

    def sinh(self, x):
        return self.ctx.sinh(x)

    def zeros(self, shape):
        z = np.empty(shape, dtype=object)
        z.fill(self.ctx.mpf(0))
        return z

    def eye(self, n):
        e = self.zeros((n, n))
        for k in range(n):
            e[k, k] = self.ctx.mpf(1)
        return e


_MP_CACHE: dict = {}


def _backend(dps):
    if dps is None:
        return _Float
    if dps not in _MP_CACHE:
        _MP_CACHE[dps] = _MP(dps)
    return _MP_CACHE[dps]


@dataclass(frozen=True)
class GaussianState:
    mode_count: int
    mean: np.ndarray
    cov: np.ndarray
    dps: Optional[int] = None

    @classmethod
    def vacuum(cls, mode_count: int, dps: Optional[int] = None) -> "GaussianState":
        bk = _backend(dps)
        return cls(mode_count, bk.zeros(2 * mode_count), bk.eye(2 * mode_count), dps)

    @property
    def backend(self):
        return _backend(self.dps)

    def marginal(self, modes: Iterable[int]):
        idx = _quad_index(sorted(modes))
        return self.mean[idx], self.cov[np.ix_(idx, idx)]

    def mean_photon_number(self, modes: Optional[Iterable[int]] = None):
        """Total ``<n>`` over ``modes`` (all by default)."""
        modes = range(self.mode_count) if modes is None else modes
        total = 0
        for m in modes:
            i = 2 * m
            total += (self.cov[i, i] + self.cov[i + 1, i + 1] - 2) / 4
            total += (self.mean[i] ** 2 + self.mean[i + 1] ** 2) / 4
        return total

    def to_float(self) -> "GaussianState":
        return GaussianState(
            self.mode_count,
            np.array(self.mean, dtype=float),
            np.array(self.cov, dtype=float),
            None,
        )


def _quad_index(modes):
    idx = []
    for m in modes:
        idx += [2 * m, 2 * m + 1]
    return np.array(idx, dtype=int)


def symplectic_form(n: int) -> np.ndarray:
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def symplectic_eigenvalues(state: GaussianState) -> np.ndarray:
    cov = np.array(state.cov, dtype=float)
    omega = symplectic_form(state.mode_count)
    ev = np.abs(np.linalg.eigvals(1j * omega @ cov))
    return np.sort(ev)[::2]


def is_physical(state: GaussianState, tol: float = 1e-9) -> bool:
    cov = np.array(state.cov, dtype=float)
    if not np.allclose(cov, cov.T, atol=1e-12, rtol=0):
        return False
    return bool(np.all(symplectic_eigenvalues(state) >= 1 - tol))


def _passive_block(bk, u):
    """Real symplectic of a passive unitary ``u`` (complex ``m x m``) in xpxp order."""
    m = len(u)
    s = bk.zeros((2 * m, 2 * m))
    for k in range(m):
        for l in range(m):
            re, im = u[k][l]
            s[2 * k, 2 * l] = re
            s[2 * k, 2 * l + 1] = -im
            s[2 * k + 1, 2 * l] = im
            s[2 * k + 1, 2 * l + 1] = re
    return s


def _apply_local(state, modes, s_loc):
    idx = _quad_index(modes)
    mean = state.mean.copy()
    cov = state.cov.copy()
    mean[idx] = s_loc.dot(mean[idx])
    cov[idx, :] = s_loc.dot(cov[idx, :])
    cov[:, idx] = cov[:, idx].dot(s_loc.T)
    return GaussianState(state.mode_count, mean, cov, state.dps)


def apply_loss(state: GaussianState, mode: int, eta) -> GaussianState:
    bk = state.backend
    eta = bk.num(eta)
    g = bk.sqrt(eta)
    idx = _quad_index([mode])
    mean = state.mean.copy()
    cov = state.cov.copy()
    mean[idx] = mean[idx] * g
    cov[idx, :] = cov[idx, :] * g
    cov[:, idx] = cov[:, idx] * g
    for i in idx:
        cov[i, i] = cov[i, i] + (1 - eta)
    return GaussianState(state.mode_count, mean, cov, state.dps)


def apply_element(state: GaussianState, element) -> GaussianState:
    """Return the state after one circuit element."""
    bk = state.backend
    for m in element.modes:
        if not 0 <= m < state.mode_count:
            raise ConfigurationError(f"mode {m} out of range for {state.mode_count}-mode state")
    if isinstance(element, Coherent):
        amp = 2 * bk.sqrt(bk.num(element.mu))
        ph = bk.num(element.phase)
        mean = state.mean.copy()
        i = 2 * element.mode
        mean[i] = mean[i] + amp * bk.cos(ph)
        mean[i + 1] = mean[i + 1] + amp * bk.sin(ph)
        return GaussianState(state.mode_count, mean, state.cov, state.dps)
    if isinstance(element, TMSV):
        r = bk.asinh(bk.sqrt(bk.num(element.mu)))
        c, s = bk.cosh(r), bk.sinh(r)
        z = bk.num(0)
        s_loc = np.array(
            [[c, z, s, z], [z, c, z, -s], [s, z, c, z], [z, -s, z, c]],
            dtype=object if state.dps else float,
        )
        return _apply_local(state, element.modes, s_loc)
    if isinstance(element, BeamSplitter):
        t = bk.num(element.t)
        r = bk.sqrt(1 - t * t)
        ph = bk.num(element.phase)
        c, s = bk.cos(ph), bk.sin(ph)
        z = bk.num(0)
        # [[t, -r e^{-i ph}], [r e^{i ph}, t]] as (re, im) pairs
        u = [[(t, z), (-r * c, r * s)], [(r * c, r * s), (t, z)]]
        return _apply_local(state, element.modes, _passive_block(bk, u))
    if isinstance(element, PhaseShift):
        ph = bk.num(element.phi)
        u = [[(bk.cos(ph), bk.sin(ph))]]
        return _apply_local(state, element.modes, _passive_block(bk, u))
    if isinstance(element, Loss):
        return apply_loss(state, element.mode, element.eta)
    if isinstance(element, SinglePhoton):
        raise ConfigurationError("single-photon sources are not Gaussian; use the Fock oracle")
    raise ConfigurationError(f"unknown element {element!r}")


def run_circuit(circuit: OpticalCircuit, dps: Optional[int] = None) -> GaussianState:
    state = GaussianState.vacuum(circuit.mode_count, dps)
    for el in circuit.elements:
        state = apply_element(state, el)
    return state


def vacuum_probability(state: GaussianState, modes: Iterable[int]):
    """Probability that every mode in ``modes`` is empty.

    ``P = 2^k det(V + I)^(-1/2) exp(-d^T (V + I)^(-1) d / 2)`` on the
    ``k``-mode marginal.
    """
    modes = sorted(set(modes))
    if not modes:
        raise ConfigurationError("vacuum projection needs at least one mode")
    if any(not 0 <= m < state.mode_count for m in modes):
        raise ConfigurationError(f"modes {modes} out of range")
    d, v = state.marginal(modes)
    k = len(modes)
    if state.dps is None:
        a = v + np.eye(2 * k)
        try:
            c, low = scipy.linalg.cho_factor(a, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("covariance + identity is not positive definite") from exc
        logdet = 2.0 * np.sum(np.log(np.diag(c)))
        quad = float(d @ scipy.linalg.cho_solve((c, low), d))
        return float(np.exp(k * math.log(2.0) - 0.5 * logdet - 0.5 * quad))
    ctx = state.backend.ctx
    a = ctx.matrix(v.tolist()) + ctx.eye(2 * k)
    try:
        low = ctx.cholesky(a)
    except ValueError as exc:
        raise NumericalError("covariance + identity is not positive definite") from exc
    det_sqrt = ctx.fprod(low[i, i] for i in range(2 * k))
    dv = ctx.matrix(list(d))
    y = _forward_sub(ctx, low, dv)
    quad = ctx.fsum(y[i] ** 2 for i in range(2 * k))
    return ctx.mpf(2) ** k / det_sqrt * ctx.exp(-quad / 2)


def _forward_sub(ctx, low, b):
    n = low.rows
    y = [ctx.mpf(0)] * n
    for i in range(n):
        acc = b[i]
        for j in range(i):
            acc -= low[i, j] * y[j]
        y[i] = acc / low[i, i]
    return y


def _fold_efficiencies(state: GaussianState, detectors):
    for det in detectors:
        if det.efficiency < 1:
            for m in det.modes:
                state = apply_loss(state, m, det.efficiency)
    return state


def _inclusion_exclusion(bk, dets, pattern, vac):
    one = bk.num(1)
    base_modes = set()
    base_dark = one
    for k in pattern.no_clicks:
        base_modes |= dets[k].modes
        base_dark = base_dark * (one - bk.num(dets[k].dark_prob))
    clicks = sorted(pattern.clicks)
    total = bk.num(0)
    for size in range(len(clicks) + 1):
        for sub in itertools.combinations(clicks, size):
            modes = set(base_modes)
            dark = base_dark
            for k in sub:
                modes |= dets[k].modes
                dark = dark * (one - bk.num(dets[k].dark_prob))
            term = dark * (vac(frozenset(modes)) if modes else one)
            total = total + term if size % 2 == 0 else total - term
    return total


def pattern_probabilities(state: GaussianState, circuit: OpticalCircuit, patterns):
    """Probabilities of several click patterns on one propagated state.

    Detector efficiency is applied as loss on the monitored modes; dark clicks
    are independent of the optical signal, so a detector stays silent with
    probability ``(1 - dark_prob) * P(no photon)``. Vacuum projections are
    shared between patterns.
    """
    for pattern in patterns:
        circuit.check_pattern(pattern)
    dets = circuit.detectors
    eff_state = _fold_efficiencies(state, dets.values())
    cache = {}

    def vac(modes):
        if modes not in cache:
            cache[modes] = vacuum_probability(eff_state, modes)
        return cache[modes]

    return [_inclusion_exclusion(state.backend, dets, p, vac) for p in patterns]


def click_pattern_probability(state: GaussianState, circuit: OpticalCircuit, pattern: ClickPattern):
    """Probability of one click pattern; see :func:`pattern_probabilities`."""
    return pattern_probabilities(state, circuit, [pattern])[0]


def circuit_pattern_probability(circuit: OpticalCircuit, pattern: ClickPattern, dps: Optional[int] = None):
    return click_pattern_probability(run_circuit(circuit, dps), circuit, pattern)


def single_detector(modes, efficiency=1.0, dark_prob=0.0) -> Detector:
    return Detector(frozenset(modes), efficiency, dark_prob)
