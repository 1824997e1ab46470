"""Optical network description shared by the Gaussian engine and the Fock oracle.

Mode transformations follow the Heisenberg convention ``a_out = U a_in``.
A :class:`BeamSplitter` with amplitude transmittance ``t`` and phase ``phase``
acts on ``(mode_i, mode_j)`` as::

    U = [[t, -r exp(-i phase)],
         [r exp(i phase), t]],   r = sqrt(1 - t**2)
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

from .errors import ConfigurationError


@dataclass(frozen=True)
class Coherent:
    """Displace ``mode`` to a coherent state of mean photon number ``mu``."""

    mode: int
    mu: float
    phase: float = 0.0

    @property
    def modes(self):
        return (self.mode,)


@dataclass(frozen=True)
class TMSV:
    """Two-mode squeezed vacuum with ``mu`` mean pairs on ``(mode_a, mode_b)``."""

    mode_a: int
    mode_b: int
    mu: float

    @property
    def modes(self):
        return (self.mode_a, self.mode_b)


@dataclass(frozen=True)
class SinglePhoton:
    """One photon in the superposition ``sum_k amplitudes[k] a_{modes[k]}^dagger |0>``.

    Not Gaussian; only the Fock oracle accepts it.
    """

    mode_list: tuple
    amplitudes: tuple

    @property
    def modes(self):
        return tuple(self.mode_list)


@dataclass(frozen=True)
class BeamSplitter:
    mode_i: int
    mode_j: int
    t: float
    phase: float = 0.0

    @property
    def modes(self):
        return (self.mode_i, self.mode_j)

    def unitary(self):
        r = math.sqrt(max(0.0, 1.0 - self.t * self.t))
        e = cmath.exp(1j * self.phase)
        return ((complex(self.t), -r / e), (r * e, complex(self.t)))


@dataclass(frozen=True)
class PhaseShift:
    """``a -> exp(i phi) a`` on ``mode``."""

    mode: int
    phi: float

    @property
    def modes(self):
        return (self.mode,)


@dataclass(frozen=True)
class Loss:
    """Pure-loss channel of power transmission ``eta`` on ``mode``."""

    mode: int
    eta: float

    @property
    def modes(self):
        return (self.mode,)


Element = Union[Coherent, TMSV, SinglePhoton, BeamSplitter, PhaseShift, Loss]
SOURCE_TYPES = (Coherent, TMSV, SinglePhoton)


@dataclass(frozen=True)
class Detector:
    """Threshold detector monitoring a set of modes during one time window."""

    modes: frozenset
    efficiency: float = 1.0
    dark_prob: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "modes", frozenset(self.modes))


@dataclass(frozen=True)
class ClickPattern:
    clicks: frozenset = field(default_factory=frozenset)
    no_clicks: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "clicks", frozenset(self.clicks))
        object.__setattr__(self, "no_clicks", frozenset(self.no_clicks))
        if self.clicks & self.no_clicks:
            raise ConfigurationError(
                f"detectors {sorted(self.clicks & self.no_clicks)} both required to click and not click"
            )


@dataclass(frozen=True)
class OpticalCircuit:
    """Ordered element list on ``mode_count`` modes, all initially in vacuum."""

    mode_count: int
    elements: tuple
    detectors: Mapping[str, Detector]

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "detectors", dict(self.detectors))
        self.validate()

    def validate(self):
        n = self.mode_count
        if n < 1:
            raise ConfigurationError("circuit needs at least one mode")
        for k, el in enumerate(self.elements):
            ms = el.modes
            if any(not (0 <= m < n) for m in ms):
                raise ConfigurationError(f"element {k} ({type(el).__name__}) mode out of range: {ms}")
            if len(set(ms)) != len(ms):
                raise ConfigurationError(f"element {k} ({type(el).__name__}) repeats a mode: {ms}")
            if isinstance(el, BeamSplitter) and not 0.0 <= el.t <= 1.0:
                raise ConfigurationError(f"element {k}: transmittance {el.t} outside [0, 1]")
            if isinstance(el, Loss) and not 0.0 <= el.eta <= 1.0:
                raise ConfigurationError(f"element {k}: efficiency {el.eta} outside [0, 1]")
            if isinstance(el, (Coherent, TMSV)) and el.mu < 0:
                raise ConfigurationError(f"element {k}: negative mean photon number {el.mu}")
            if isinstance(el, SinglePhoton):
                norm = sum(abs(a) ** 2 for a in el.amplitudes)
                if len(el.amplitudes) != len(el.mode_list) or abs(norm - 1.0) > 1e-9:
                    raise ConfigurationError(f"element {k}: single-photon amplitudes must be normalized")
        seen = {}
        for name, det in self.detectors.items():
            if not det.modes:
                raise ConfigurationError(f"detector {name!r} monitors no modes")
            for m in det.modes:
                if not 0 <= m < n:
                    raise ConfigurationError(f"detector {name!r} mode {m} out of range")
                if m in seen:
                    raise ConfigurationError(f"detectors {seen[m]!r} and {name!r} share mode {m}")
                seen[m] = name
            if not 0.0 <= det.efficiency <= 1.0 or not 0.0 <= det.dark_prob <= 1.0:
                raise ConfigurationError(f"detector {name!r}: efficiency/dark probability outside [0, 1]")

    def check_pattern(self, pattern: ClickPattern):
        unknown = (pattern.clicks | pattern.no_clicks) - set(self.detectors)
        if unknown:
            raise ConfigurationError(f"pattern references unknown detectors {sorted(unknown)}")

    def relabel(self, perm: Sequence[int]) -> "OpticalCircuit":
        """Return the same experiment with mode ``m`` renamed ``perm[m]``."""
        perm = list(perm)

        def mv(el):
            if isinstance(el, Coherent):
                return Coherent(perm[el.mode], el.mu, el.phase)
            if isinstance(el, TMSV):
                return TMSV(perm[el.mode_a], perm[el.mode_b], el.mu)
            if isinstance(el, SinglePhoton):
                return SinglePhoton(tuple(perm[m] for m in el.mode_list), el.amplitudes)
            if isinstance(el, BeamSplitter):
                return BeamSplitter(perm[el.mode_i], perm[el.mode_j], el.t, el.phase)
            if isinstance(el, PhaseShift):
                return PhaseShift(perm[el.mode], el.phi)
            return Loss(perm[el.mode], el.eta)

        dets = {
            k: Detector(frozenset(perm[m] for m in d.modes), d.efficiency, d.dark_prob)
            for k, d in self.detectors.items()
        }
        return OpticalCircuit(self.mode_count, tuple(mv(e) for e in self.elements), dets)

    def with_detectors(self, detectors: Mapping[str, Detector]) -> "OpticalCircuit":
        return OpticalCircuit(self.mode_count, self.elements, detectors)

    def extended(self, elements: Sequence[Element]) -> "OpticalCircuit":
        return OpticalCircuit(self.mode_count, self.elements + tuple(elements), self.detectors)


def unitary2_elements(mode_i: int, mode_j: int, u) -> list:
    """Decompose a 2x2 unitary into phase shifts around one :class:`BeamSplitter`.

    ``u`` is the Heisenberg matrix on ``(mode_i, mode_j)``. The returned
    elements reproduce it exactly: ``diag(e^{ia1}, e^{ia2}) BS(t) diag(1, e^{ib2})``.
    """
    u11, u12 = complex(u[0][0]), complex(u[0][1])
    u21, u22 = complex(u[1][0]), complex(u[1][1])
    t = min(1.0, abs(u11))
    tiny = 1e-15
    if t < tiny:
        a1, a2, b2 = cmath.phase(-u12), cmath.phase(u21), 0.0
        t = 0.0
    elif abs(u21) < tiny:
        a1, a2, b2 = cmath.phase(u11), cmath.phase(u22), 0.0
        t = 1.0
    else:
        a1 = cmath.phase(u11)
        a2 = cmath.phase(u21)
        b2 = cmath.phase(-u12) - a1
    out = []
    if b2:
        out.append(PhaseShift(mode_j, b2))
    out.append(BeamSplitter(mode_i, mode_j, t))
    if a1:
        out.append(PhaseShift(mode_i, a1))
    if a2:
        out.append(PhaseShift(mode_j, a2))
    return out


def contraction_elements(mode_i: int, mode_j: int, m) -> list:
    """Realize a 2x2 contraction ``m`` (``m m^H <= I``) with unitaries and losses.

    Uses the singular value decomposition ``m = w diag(s) v^H``; each singular
    value becomes a :class:`Loss` of transmission ``s**2``.
    """
    import numpy as np

    m = np.asarray(m, dtype=complex)
    w, s, vh = np.linalg.svd(m)
    if s[0] > 1 + 1e-12:
        raise ConfigurationError(f"matrix is not a contraction (singular value {s[0]})")
    s = np.clip(s, 0.0, 1.0)
    els = unitary2_elements(mode_i, mode_j, vh)
    els += [Loss(mode_i, float(s[0] ** 2)), Loss(mode_j, float(s[1] ** 2))]
    els += unitary2_elements(mode_i, mode_j, w)
    return els
