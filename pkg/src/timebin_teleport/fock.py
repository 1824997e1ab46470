"""Truncated Fock-basis simulation of the same circuits, for cross-checking.

States are pure: each :class:`~timebin_teleport.circuit.Loss` element appends
an environment mode that is coupled in by a beam splitter and never measured.
The expansion keeps every photon-number tuple with total photon number up to
the cutoff. Passive elements conserve that total, so only the input expansion
truncates anything, and the input is deliberately left unnormalized so the
truncation error stays visible in the norm.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

from .circuit import (
    BeamSplitter,
    ClickPattern,
    Coherent,
    Loss,
    OpticalCircuit,
    PhaseShift,
    SinglePhoton,
    SOURCE_TYPES,
    TMSV,
)
from .errors import ConfigurationError, ResourceError

DEFAULT_CUTOFF = 6
DEFAULT_MAX_TERMS = 2_000_000


@dataclass(frozen=True)
class FockState:
    mode_count: int
    amplitudes: dict
    cutoff: int

    def norm(self) -> float:
        return math.fsum(abs(a) ** 2 for a in self.amplitudes.values())

    def probabilities(self) -> dict:
        return {k: abs(a) ** 2 for k, a in self.amplitudes.items()}

    def marginal_distribution(self, modes) -> dict:
        """Photon-number distribution of ``modes``, summed over everything else."""
        out: dict = {}
        for key, a in self.amplitudes.items():
            sub = tuple(key[m] for m in modes)
            out[sub] = out.get(sub, 0.0) + abs(a) ** 2
        return out


def _source_terms(el, cutoff):
    if isinstance(el, Coherent):
        alpha = math.sqrt(el.mu) * cmath.exp(1j * el.phase)
        pref = math.exp(-el.mu / 2)
        return [((n,), pref * alpha**n / math.sqrt(math.factorial(n))) for n in range(cutoff + 1)]
    if isinstance(el, TMSV):
        p = el.mu / (1 + el.mu)
        pref = math.sqrt(1 - p)
        return [((n, n), pref * p ** (n / 2)) for n in range(cutoff // 2 + 1)]
    if isinstance(el, SinglePhoton):
        if cutoff < 1:
            return []
        terms = []
        k = len(el.mode_list)
        for pos, amp in enumerate(el.amplitudes):
            occ = [0] * k
            occ[pos] = 1
            terms.append((tuple(occ), complex(amp)))
        return terms
    raise ConfigurationError(f"{type(el).__name__} is not a source")


def build_input(circuit: OpticalCircuit, cutoff: int = DEFAULT_CUTOFF) -> FockState:
    """Tensor product of the circuit's truncated source expansions.

    Every source must act on modes no earlier element has touched.
    """
    if cutoff < 1:
        raise ConfigurationError(f"photon cutoff must be >= 1, got {cutoff}")
    touched = set()
    sources = []
    for k, el in enumerate(circuit.elements):
        if isinstance(el, SOURCE_TYPES):
            if touched & set(el.modes):
                raise ConfigurationError(f"source element {k} acts on a mode that is no longer vacuum")
            sources.append(el)
        touched |= set(el.modes)
    n = circuit.mode_count
    amps = {tuple([0] * n): 1.0 + 0j}
    for el in sources:
        terms = _source_terms(el, cutoff)
        new = {}
        for key, a in amps.items():
            used = sum(key)
            for occ, c in terms:
                if used + sum(occ) > cutoff:
                    continue
                k2 = list(key)
                for m, o in zip(el.modes, occ):
                    k2[m] = o
                k2 = tuple(k2)
                new[k2] = new.get(k2, 0) + a * c
        amps = new
    return FockState(n, amps, cutoff)


@lru_cache(maxsize=4096)
def _bs_table(ni, nj, u):
    """Expansion of ``(a_i^dag)^ni (a_j^dag)^nj |0>/sqrt(ni! nj!)`` under ``u``.

    ``a_i^dag -> u00 a_i^dag + u10 a_j^dag``, ``a_j^dag -> u01 a_i^dag + u11 a_j^dag``.
    Returns ``[(p, q, coefficient)]`` for normalized ``|p, q>``.
    """
    (u00, u01), (u10, u11) = u
    coeff: dict = {}
    for k in range(ni + 1):
        ck = math.comb(ni, k) * u00**k * u10 ** (ni - k)
        for l in range(nj + 1):
            c = ck * math.comb(nj, l) * u01**l * u11 ** (nj - l)
            p = k + l
            coeff[p] = coeff.get(p, 0) + c
    tot = ni + nj
    norm = math.sqrt(math.factorial(ni) * math.factorial(nj))
    out = []
    for p, c in coeff.items():
        if c != 0:
            q = tot - p
            out.append((p, q, c * math.sqrt(math.factorial(p) * math.factorial(q)) / norm))
    return tuple(out)


def _apply_two_mode(amps, i, j, u, max_terms):
    u = tuple(tuple(complex(x) for x in row) for row in u)
    new: dict = {}
    for key, a in amps.items():
        for p, q, c in _bs_table(key[i], key[j], u):
            k2 = list(key)
            k2[i] = p
            k2[j] = q
            k2 = tuple(k2)
            new[k2] = new.get(k2, 0) + a * c
        if len(new) > max_terms:
            raise ResourceError(f"amplitude map exceeded {max_terms} entries")
    return new


def propagate(state: FockState, circuit: OpticalCircuit, max_terms: int = DEFAULT_MAX_TERMS) -> FockState:
    """Apply every non-source element of ``circuit`` to ``state``."""
    amps = dict(state.amplitudes)
    n = state.mode_count
    for el in circuit.elements:
        if isinstance(el, SOURCE_TYPES):
            continue
        if isinstance(el, PhaseShift):
            m = el.mode
            amps = {k: a * cmath.exp(1j * el.phi * k[m]) for k, a in amps.items()}
        elif isinstance(el, BeamSplitter):
            amps = _apply_two_mode(amps, el.mode_i, el.mode_j, el.unitary(), max_terms)
        elif isinstance(el, Loss):
            if el.eta >= 1.0:
                continue
            amps = {k + (0,): a for k, a in amps.items()}
            t = math.sqrt(el.eta)
            r = math.sqrt(1.0 - el.eta)
            amps = _apply_two_mode(amps, el.mode, n, ((t, -r), (r, t)), max_terms)
            n += 1
        else:
            raise ConfigurationError(f"unsupported element {el!r}")
    return FockState(n, amps, state.cutoff)


def run_fock(circuit: OpticalCircuit, cutoff: int = DEFAULT_CUTOFF, max_terms: int = DEFAULT_MAX_TERMS) -> FockState:
    return propagate(build_input(circuit, cutoff), circuit, max_terms)


def _silence_prob(k, eta, dark):
    return (1.0 - eta) ** k * (1.0 - dark)


def pattern_probabilities_fock(state: FockState, detectors, patterns) -> list:
    """Probabilities of click patterns, with efficiency and dark clicks applied per tuple."""
    pats = list(patterns)
    for pat in pats:
        unknown = (pat.clicks | pat.no_clicks) - set(detectors)
        if unknown:
            raise ConfigurationError(f"pattern references unknown detectors {sorted(unknown)}")
    names = sorted(set().union(*[(p.clicks | p.no_clicks) for p in pats])) if pats else []
    dets = [detectors[k] for k in names]
    mode_lists = [sorted(d.modes) for d in dets]
    totals = [0.0] * len(pats)
    grouped: dict = {}
    for key, a in state.amplitudes.items():
        counts = tuple(sum(key[m] for m in ml) for ml in mode_lists)
        grouped[counts] = grouped.get(counts, 0.0) + abs(a) ** 2
    index = {k: i for i, k in enumerate(names)}
    for counts, w in grouped.items():
        silent = [_silence_prob(c, d.efficiency, d.dark_prob) for c, d in zip(counts, dets)]
        for pi, pat in enumerate(pats):
            f = w
            for k in pat.clicks:
                f *= 1.0 - silent[index[k]]
            for k in pat.no_clicks:
                f *= silent[index[k]]
            totals[pi] += f
    return totals


def click_pattern_probability_fock(state: FockState, detectors, pattern: ClickPattern) -> float:
    return pattern_probabilities_fock(state, detectors, [pattern])[0]


def truncation_deficit(state: FockState) -> float:
    return max(0.0, 1.0 - state.norm())


def output_distribution(state: FockState, modes) -> dict:
    """Joint photon-number distribution of ``modes`` (e.g. beam-splitter outputs)."""
    return state.marginal_distribution(list(modes))


__all__ = [
    "FockState",
    "build_input",
    "propagate",
    "run_fock",
    "click_pattern_probability_fock",
    "pattern_probabilities_fock",
    "truncation_deficit",
    "output_distribution",
    "DEFAULT_CUTOFF",
]
