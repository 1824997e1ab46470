"""Experiment builders and observables for HOM, teleportation and entanglement runs.

All probabilities are per clock cycle. Rare coincidences come from
inclusion-exclusion sums of terms near one, so observables are evaluated with
extended precision (``dps`` decimal digits) unless ``dps=None`` is passed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import NamedTuple, Optional

import mpmath
import numpy as np
from scipy.optimize import minimize_scalar

from .circuit import (
    BeamSplitter,
    ClickPattern,
    Coherent,
    Detector,
    Loss,
    OpticalCircuit,
    SinglePhoton,
    TMSV,
    contraction_elements,
)
from .errors import ConfigurationError, UndefinedObservableError
from .fock import pattern_probabilities_fock, run_fock
from .gaussian import apply_element, pattern_probabilities, run_circuit

DEFAULT_DPS = 30
INPUT_STATES = ("early", "late", "plus")
_HALF = 2.0 ** -0.5


def _default_phase_grid():
    return tuple(float(x) for x in np.linspace(0.0, 2.0 * math.pi, 25))


def _default_delta_t_grid():
    return tuple(float(x) for x in np.linspace(-1500.0, 1500.0, 31))


@dataclass(frozen=True)
class ScenarioParams:
    """Physical parameters of one experiment.

    Times are in picoseconds, rates in Hz. ``gamma`` is the amplitude of the
    early bin in Alice's qubit; ``None`` picks 1, 0 or 1/sqrt(2) from
    ``input_state``.
    """

    mu_A: float = 2.6e-3
    mu_B: float = 8.0e-3
    zeta: float = 0.90
    eta_i: float = 1.2e-2
    eta_s: float = 4.5e-3
    dark_prob: float = 2.0e-9
    mzi_visibility: float = 0.985
    phase_grid: tuple = field(default_factory=_default_phase_grid)
    delta_t_grid: tuple = field(default_factory=_default_delta_t_grid)
    sigma_pulse: float = 300.0
    bin_separation: float = 2000.0
    bin_duration: float = 800.0
    input_state: str = "early"
    gamma: Optional[float] = None
    clock_rate: float = 90e6
    alice_extra_loss_db: float = 0.0
    bob_extra_loss_db: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "phase_grid", tuple(float(x) for x in self.phase_grid))
        object.__setattr__(self, "delta_t_grid", tuple(float(x) for x in self.delta_t_grid))
        self.validate()

    def validate(self):
        for name in ("mu_A", "mu_B", "sigma_pulse", "bin_separation", "bin_duration", "clock_rate"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ConfigurationError(f"{name} must be a finite non-negative number, got {v}")
        for name in ("zeta", "eta_i", "eta_s", "dark_prob", "mzi_visibility"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {v}")
        for name in ("alice_extra_loss_db", "bob_extra_loss_db"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative")
        if self.input_state not in INPUT_STATES:
            raise ConfigurationError(f"input_state must be one of {INPUT_STATES}, got {self.input_state!r}")
        if self.gamma is not None and not 0.0 <= self.gamma <= 1.0:
            raise ConfigurationError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.sigma_pulse <= 0:
            raise ConfigurationError("sigma_pulse must be positive")

    def replace(self, **changes) -> "ScenarioParams":
        return replace(self, **changes)

    @property
    def amplitude(self) -> float:
        if self.gamma is not None:
            return self.gamma
        return {"early": 1.0, "late": 0.0, "plus": _HALF}[self.input_state]

    @property
    def alice_transmission(self) -> float:
        return 10.0 ** (-self.alice_extra_loss_db / 10.0)

    @property
    def bob_transmission(self) -> float:
        return 10.0 ** (-self.bob_extra_loss_db / 10.0)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _finish(value, dps):
    return float(value) if dps is not None else value


# ---------------------------------------------------------------- HOM


def p3f_closed_form(mu_A, mu_B, eta_i, eta_s, zeta, dps: Optional[int] = DEFAULT_DPS) -> float:
    """Three-fold coincidence probability of the HOM scenario in closed form.

    Dark clicks are not part of this expression. With ``dps=None`` the sum is
    done in float64, which loses about ``1e-16 / P`` relative accuracy.
    """
    ctx = mpmath.MPContext() if dps is not None else None
    if ctx is not None:
        ctx.dps = dps
        f, ex = ctx.mpf, ctx.exp
    else:
        f, ex = float, math.exp
    ma, mb, ei, es, z = f(mu_A), f(mu_B), f(eta_i), f(eta_s), f(zeta)
    one = f(1)
    a = one + ei * mb / 2
    b = one + (one - es) * ei * mb / 2 + es * mb
    t1 = 2 * ex(-(ma / 2) * (one + (one - z * z) * ei * mb / 2) / a) / a
    t2 = one / (one + es * mb)
    t3 = ex(-ma) / (one + ei * mb)
    t4 = ex(-ma) / (one + (one - es) * ei * mb + es * mb)
    t5 = 2 * ex(-(ma / 2) * (one + (one - z * z) * (one - es) * ei * mb / 2 + es * mb) / b) / b
    return float(one - t1 - t2 + t3 - t4 + t5)


HOM_MODES = {"A": 0, "A_dist": 1, "vac": 2, "idler": 3, "signal": 4}
HOM_PATTERN = ClickPattern({"D1", "D2", "D3"})


def build_hom_circuit(params: ScenarioParams, zeta: Optional[float] = None) -> OpticalCircuit:
    """Alice's weak coherent pulse meets Bob's idler at a 50/50 splitter.

    Only Alice's path carries the virtual splitter: its transmitted amplitude
    ``zeta`` interferes, the reflected part meets vacuum on a second splitter
    whose outputs share detectors D1 and D2. Bob's signal goes straight to D3.
    """
    z = params.zeta if zeta is None else zeta
    A, Ad, V0, I, S = range(5)
    els = [Coherent(A, params.mu_A), TMSV(S, I, params.mu_B)]
    if params.alice_extra_loss_db:
        els.append(Loss(A, params.alice_transmission))
    if params.bob_extra_loss_db:
        els.append(Loss(I, params.bob_transmission))
    els += [
        BeamSplitter(A, Ad, z),
        Loss(I, params.eta_i),
        Loss(S, params.eta_s),
        BeamSplitter(A, I, _HALF),
        BeamSplitter(Ad, V0, _HALF),
    ]
    d = params.dark_prob
    dets = {
        "D1": Detector({A, Ad}, 1.0, d),
        "D2": Detector({I, V0}, 1.0, d),
        "D3": Detector({S}, 1.0, d),
    }
    return OpticalCircuit(5, els, dets)


def hom_three_fold(params: ScenarioParams, zeta: Optional[float] = None, dps: Optional[int] = DEFAULT_DPS):
    c = build_hom_circuit(params, zeta)
    return _finish(pattern_probabilities(run_circuit(c, dps), c, [HOM_PATTERN])[0], dps)


def hom_visibility(params: ScenarioParams, method: str = "engine", dps: Optional[int] = DEFAULT_DPS) -> float:
    """``V = [P(0) - P(zeta)] / P(0)`` using the engine or the closed form.

    The closed-form route absorbs extra fibre loss into ``mu_A`` and ``eta_i``
    and ignores dark clicks.
    """
    if method == "engine":
        p0 = hom_three_fold(params, 0.0, dps)
        pz = hom_three_fold(params, params.zeta, dps)
    elif method == "closed_form":
        ma = params.mu_A * params.alice_transmission
        ei = params.eta_i * params.bob_transmission
        p0 = p3f_closed_form(ma, params.mu_B, ei, params.eta_s, 0.0, dps)
        pz = p3f_closed_form(ma, params.mu_B, ei, params.eta_s, params.zeta, dps)
    else:
        raise ConfigurationError(f"unknown method {method!r}")
    # inclusion-exclusion leaves residue near 10^-dps where the true value is zero
    floor = 10.0 ** (5 - dps) if dps is not None else 1e-13
    if not p0 > floor:
        raise UndefinedObservableError("three-fold probability without interference is zero")
    return (p0 - pz) / p0


def zeta_at_delay(zeta0: float, delta_t: float, sigma: float) -> float:
    # visibility goes as zeta**2, so the dip is exp(-dt^2 / 2 sigma^2)
    return zeta0 * math.exp(-(delta_t**2) / (4.0 * sigma**2))


def hom_dip_curve(params: ScenarioParams, dps: Optional[int] = DEFAULT_DPS) -> list:
    """Three-fold rate in Hz at each arrival-time offset of ``delta_t_grid``."""
    if not params.delta_t_grid:
        raise ConfigurationError("delta_t_grid is empty")
    out = []
    for dt in params.delta_t_grid:
        z = zeta_at_delay(params.zeta, dt, params.sigma_pulse)
        out.append((dt, hom_three_fold(params, z, dps) * params.clock_rate))
    return out


# ------------------------------------------------------- teleportation

TELEPORT_MODES = {
    "A_e": 0, "A_l": 1, "Ad_e": 2, "Ad_l": 3, "vac_e": 4,
    "vac_l": 5, "I_e": 6, "I_l": 7, "S_e": 8, "S_l": 9,
}
BSM_PATTERN = ClickPattern({"D1e", "D2l"})


def mzi_coupler(visibility: float):
    """Amplitudes ``(t, r)`` of two identical couplers giving ``visibility``.

    A coherent pulse pair entering port 1 then produces a middle-bin fringe
    ``|t^2 - r^2 e^{i phi}|^2`` with exactly that visibility.
    """
    if not 0.0 <= visibility <= 1.0:
        raise ConfigurationError(f"MZI visibility outside [0, 1]: {visibility}")
    y = visibility / (2.0 * (1.0 + visibility))
    t2 = 0.5 * (1.0 + math.sqrt(max(0.0, 1.0 - 4.0 * y)))
    return math.sqrt(t2), math.sqrt(1.0 - t2)


def mzi_middle_bin(visibility: float, phi: float, port: int = 1) -> np.ndarray:
    """Middle-bin map ``(out1, out2) <- (early, late)`` for light entering ``port``."""
    t, r = mzi_coupler(visibility)
    e = complex(math.cos(phi), math.sin(phi))
    if port == 1:
        return np.array([[-r * r * e, t * t], [r * t * e, r * t]])
    if port == 2:
        return np.array([[-t * r * e, -t * r], [t * t * e, -r * r]])
    raise ConfigurationError("MZI has input ports 1 and 2")


def _alice_sources(params, alice_phase, single_photon):
    g = params.amplitude
    A_e, A_l = 0, 1
    if single_photon:
        return [SinglePhoton((A_e, A_l), (complex(g), complex(math.sqrt(max(0.0, 1.0 - g * g)))))]
    mu = params.mu_A
    return [Coherent(A_e, mu * g * g, alice_phase), Coherent(A_l, mu * (1.0 - g * g), alice_phase)]


def build_teleportation_circuit(
    params: ScenarioParams,
    basis: str = "z",
    phase: float = 0.0,
    zeta: Optional[float] = None,
    alice_phase: float = 0.0,
    single_photon: bool = False,
) -> OpticalCircuit:
    """Ten-mode teleportation network for one qubit measurement setting.

    ``basis="z"`` detects Bob's signal directly per time bin (D3e, D3l);
    ``basis="x"`` sends it through the MZI at ``phase`` and watches the middle
    bin of both outputs (D3, D4). ``single_photon`` swaps Alice's coherent
    pulses for one photon in the same qubit state (Fock oracle only).
    """
    z = params.zeta if zeta is None else zeta
    m = TELEPORT_MODES
    els = _alice_sources(params, alice_phase, single_photon)
    els += [TMSV(m["S_e"], m["I_e"], params.mu_B), TMSV(m["S_l"], m["I_l"], params.mu_B)]
    for b in "el":
        if params.alice_extra_loss_db:
            els.append(Loss(m["A_" + b], params.alice_transmission))
        if params.bob_extra_loss_db:
            els.append(Loss(m["I_" + b], params.bob_transmission))
    for b in "el":
        els.append(BeamSplitter(m["A_" + b], m["Ad_" + b], z))
    for b in "el":
        els += [Loss(m["I_" + b], params.eta_i), Loss(m["S_" + b], params.eta_s)]
    for b in "el":
        els += [BeamSplitter(m["A_" + b], m["I_" + b], _HALF), BeamSplitter(m["Ad_" + b], m["vac_" + b], _HALF)]
    d = params.dark_prob
    dets = {}
    for b in "el":
        dets["D1" + b] = Detector({m["A_" + b], m["Ad_" + b]}, 1.0, d)
        dets["D2" + b] = Detector({m["I_" + b], m["vac_" + b]}, 1.0, d)
    if basis == "z":
        dets["D3e"] = Detector({m["S_e"]}, 1.0, d)
        dets["D3l"] = Detector({m["S_l"]}, 1.0, d)
    elif basis == "x":
        els += contraction_elements(m["S_e"], m["S_l"], mzi_middle_bin(params.mzi_visibility, phase, 1))
        dets["D3"] = Detector({m["S_e"]}, 1.0, d)
        dets["D4"] = Detector({m["S_l"]}, 1.0, d)
    else:
        raise ConfigurationError(f"basis must be 'z' or 'x', got {basis!r}")
    return OpticalCircuit(10, els, dets)


def _with(pattern: ClickPattern, *names) -> ClickPattern:
    return ClickPattern(pattern.clicks | set(names), pattern.no_clicks)


def heralding_probability(params: ScenarioParams, dps: Optional[int] = DEFAULT_DPS) -> float:
    c = build_teleportation_circuit(params, "z")
    return _finish(pattern_probabilities(run_circuit(c, dps), c, [BSM_PATTERN])[0], dps)


def z_basis_probabilities(params: ScenarioParams, dps: Optional[int] = DEFAULT_DPS, zeta=None):
    """``(P(BSM and D3e), P(BSM and D3l))`` per clock cycle."""
    c = build_teleportation_circuit(params, "z", zeta=zeta)
    pe, pl = pattern_probabilities(run_circuit(c, dps), c, [_with(BSM_PATTERN, "D3e"), _with(BSM_PATTERN, "D3l")])
    return _finish(pe, dps), _finish(pl, dps)


def _correct_bin_first(params, pe, pl):
    # the Psi- herald applies -i sigma_y: early comes out late and vice versa
    if params.input_state == "early":
        return pl, pe
    if params.input_state == "late":
        return pe, pl
    raise ConfigurationError("z-basis fidelity needs input_state 'early' or 'late'")


def teleport_fidelity_z(params: ScenarioParams, dps: Optional[int] = DEFAULT_DPS) -> float:
    """Fraction of heralded signal clicks that land in the correct time bin."""
    pe, pl = z_basis_probabilities(params, dps)
    good, bad = _correct_bin_first(params, pe, pl)
    if not good + bad > 0:
        raise UndefinedObservableError("no heralded signal clicks")
    return good / (good + bad)


class PhaseScan:
    """Click probabilities versus MZI phase, sharing the state in front of the MZI.

    ``builder(phase)`` must return the full circuit; its first ``prefix``
    elements may not depend on the phase.
    """

    def __init__(self, builder, prefix: int, patterns, dps: Optional[int]):
        c0 = builder(0.0)
        head = OpticalCircuit(c0.mode_count, c0.elements[:prefix], {})
        self._state = run_circuit(head, dps)
        self._builder = builder
        self._prefix = prefix
        self._patterns = list(patterns)
        self.dps = dps

    def __call__(self, phase: float) -> list:
        c = self._builder(phase)
        st = self._state
        for el in c.elements[self._prefix:]:
            st = apply_element(st, el)
        return [_finish(p, self.dps) for p in pattern_probabilities(st, c, self._patterns)]


def _x_scan(params, dps, zeta=None, outputs=("D3",), single=None):
    builder = lambda ph: build_teleportation_circuit(params, "x", ph, zeta=zeta)  # noqa: E731
    prefix = len(build_teleportation_circuit(params, "z", zeta=zeta).elements)
    return PhaseScan(builder, prefix, [_with(BSM_PATTERN, o) for o in outputs], dps)


def x_fringe_probability(params: ScenarioParams, phase: float, dps: Optional[int] = DEFAULT_DPS, output: str = "D3", zeta=None):
    """``P(BSM and output click)`` with the MZI at ``phase``."""
    return _x_scan(params, dps, zeta, (output,))(phase)[0]


def _check_grid(grid):
    if len(grid) < 3:
        raise ConfigurationError("phase_grid needs at least three points")
    if max(grid) - min(grid) < 2.0 * math.pi - 1e-9:
        raise ConfigurationError("phase_grid must span at least 2 pi")


def _golden_extremum(f, grid, vals, sign):
    """Refine the extremum of ``f`` nearest the best grid point; ``sign=+1`` for a maximum."""
    sv = [sign * v for v in vals]
    k = int(np.argmax(sv))
    step = grid[1] - grid[0] if k == 0 else grid[k] - grid[k - 1]
    try:
        res = minimize_scalar(
            lambda x: -sign * f(x), bracket=(grid[k] - step, grid[k], grid[k] + step), method="golden", tol=1e-6
        )
    except ValueError:
        # flat or tied neighbourhood: the grid point is as good as it gets
        return grid[k], vals[k]
    if -res.fun >= sv[k]:
        return float(res.x), sign * -res.fun
    return grid[k], vals[k]


class FringeResult(NamedTuple):
    visibility: float
    fidelity: float
    phi_max: float
    phi_min: float
    p_max: float
    p_min: float


def fringe_extrema(f, grid) -> FringeResult:
    """Locate the extrema of ``f`` by grid search plus golden-section refinement."""
    _check_grid(grid)
    g = sorted(grid)
    vals = [f(x) for x in g]
    x_max, p_max = _golden_extremum(f, g, vals, +1)
    x_min, p_min = _golden_extremum(f, g, vals, -1)
    tot = p_max + p_min
    if not tot > 0:
        raise UndefinedObservableError("fringe is identically zero")
    return FringeResult(
        float((p_max - p_min) / tot), float(p_max / tot), float(x_max), float(x_min), float(p_max), float(p_min)
    )


def teleport_fidelity_plus(params: ScenarioParams, dps: Optional[int] = DEFAULT_DPS, zeta=None) -> FringeResult:
    """Visibility and fidelity of the heralded D3 fringe for a superposition input."""
    scan = _x_scan(params, dps, zeta)
    return fringe_extrema(lambda ph: scan(ph)[0], params.phase_grid)


def plus_calibration_phase(params: ScenarioParams, dps: Optional[int] = DEFAULT_DPS) -> float:
    """MZI phase at which a teleported superposition gives the most D3 clicks."""
    return teleport_fidelity_plus(params.replace(input_state="plus", gamma=None), dps).phi_max


# ---------------------------------------------------------- entanglement

ENT_PATTERNS = (ClickPattern({"D3s", "D3i"}), ClickPattern({"D4s", "D4i"}))
_ENT_PREFIX = 6


def build_entanglement_circuit(params: ScenarioParams, phase: float) -> OpticalCircuit:
    """Two pump pulses, signal into MZI port 1 and idler into port 2."""
    S_e, S_l, I_e, I_l = range(4)
    els = [TMSV(S_e, I_e, params.mu_B), TMSV(S_l, I_l, params.mu_B)]
    els += [Loss(S_e, params.eta_s), Loss(S_l, params.eta_s), Loss(I_e, params.eta_i), Loss(I_l, params.eta_i)]
    els += contraction_elements(S_e, S_l, mzi_middle_bin(params.mzi_visibility, phase, 1))
    els += contraction_elements(I_e, I_l, mzi_middle_bin(params.mzi_visibility, phase, 2))
    d = params.dark_prob
    dets = {
        "D3s": Detector({S_e}, 1.0, d),
        "D4s": Detector({S_l}, 1.0, d),
        "D3i": Detector({I_e}, 1.0, d),
        "D4i": Detector({I_l}, 1.0, d),
    }
    return OpticalCircuit(4, els, dets)


def _ent_scan(params, dps):
    return PhaseScan(lambda ph: build_entanglement_circuit(params, ph), _ENT_PREFIX, ENT_PATTERNS, dps)


def entanglement_rates(params: ScenarioParams, phase: float, dps: Optional[int] = DEFAULT_DPS):
    """Same-output signal/idler coincidence probabilities ``(out1, out2)``."""
    return tuple(_ent_scan(params, dps)(phase))


class EntanglementResult(NamedTuple):
    points: list
    visibility: float
    output_visibilities: tuple


def entanglement_fringe(params: ScenarioParams, dps: Optional[int] = DEFAULT_DPS) -> EntanglementResult:
    """Coincidence rates (Hz) over ``phase_grid`` and the output-averaged ``V_ent``."""
    if not params.phase_grid:
        raise ConfigurationError("phase_grid is empty")
    scan = _ent_scan(params, dps)
    pts = []
    for ph in params.phase_grid:
        r1, r2 = scan(ph)
        pts.append((ph, r1 * params.clock_rate, r2 * params.clock_rate))
    grid = params.phase_grid
    if max(grid) - min(grid) < 2 * math.pi - 1e-9:
        grid = _default_phase_grid()
    vis = tuple(fringe_extrema(lambda ph, k=k: scan(ph)[k], grid).visibility for k in range(2))
    return EntanglementResult(pts, 0.5 * (vis[0] + vis[1]), vis)


# ---------------------------------------------------------- conversions


def entanglement_fidelity(v_ent: float) -> float:
    return (3.0 * v_ent + 1.0) / 4.0


def plus_fidelity(v_plus: float) -> float:
    return (1.0 + v_plus) / 2.0


def average_fidelity(f_e: float, f_l: float, f_plus: float) -> float:
    return (f_e + f_l + 4.0 * f_plus) / 6.0


def fidelity_conversions(v_ent=None, v_plus=None, f_e=None, f_l=None, f_plus=None) -> dict:
    """Derived fidelities from whichever inputs are given."""
    vals = {"v_ent": v_ent, "v_plus": v_plus, "f_e": f_e, "f_l": f_l, "f_plus": f_plus}
    for k, v in vals.items():
        if v is not None and not 0.0 <= v <= 1.0:
            raise ConfigurationError(f"{k} must lie in [0, 1], got {v}")
    out = {}
    if v_ent is not None:
        out["f_ent"] = entanglement_fidelity(v_ent)
    if v_plus is not None:
        out["f_plus"] = plus_fidelity(v_plus)
        f_plus = out["f_plus"] if f_plus is None else f_plus
    if None not in (f_e, f_l, f_plus):
        out["f_avg"] = average_fidelity(f_e, f_l, f_plus)
    return out


# ------------------------------------------------------------- tomography

TOMOGRAPHY_TARGETS = {"early": "l", "late": "e", "plus": "+"}


def tomography_settings(phi0: float) -> dict:
    """Detector and MZI phase per ``(basis, outcome)``; ``None`` means no MZI."""
    return {
        ("z", 0): ("D3e", None),
        ("z", 1): ("D3l", None),
        ("x", 0): ("D3", phi0),
        ("x", 1): ("D3", phi0 + math.pi),
        ("y", 0): ("D3", phi0 + 0.5 * math.pi),
        ("y", 1): ("D3", phi0 + 1.5 * math.pi),
    }


def tomography_probabilities(params: ScenarioParams, dps: Optional[int] = DEFAULT_DPS, phi0: Optional[float] = None) -> dict:
    """Heralded three-fold probability per cycle for each tomography outcome.

    The x/y frame is fixed by ``phi0``, by default the phase at which a
    teleported superposition is brightest, so that input reads as ``|+>``.
    """
    if phi0 is None:
        phi0 = plus_calibration_phase(params, dps)
    pe, pl = z_basis_probabilities(params, dps)
    scan = _x_scan(params, dps)
    out = {}
    for key, (det, ph) in tomography_settings(phi0).items():
        if ph is None:
            out[key] = pe if det == "D3e" else pl
        else:
            out[key] = scan(ph)[0]
    return out


def simulate_tomography_counts(params: ScenarioParams, cycles_per_setting: float, rng, dps: Optional[int] = DEFAULT_DPS, phi0=None):
    """Poisson counts for every tomography outcome after ``cycles_per_setting`` clock cycles each."""
    from .inference.tomography import TomographyData

    probs = tomography_probabilities(params, dps, phi0)
    counts = {k: int(rng.poisson(cycles_per_setting * p)) for k, p in probs.items()}
    return TomographyData(counts, metadata={"cycles_per_setting": repr(cycles_per_setting)})


# ------------------------------------------------------------------- decoy

DECOY_INPUTS = {"e": "early", "l": "late", "+": "plus"}
DEFAULT_FOCK_CUTOFF = 7


class DecoySimulation(NamedTuple):
    dataset: object
    true_single_photon: dict
    phases: tuple


def _decoy_counts(params, state, dps, phases, fock_cutoff=None):
    """(good, bad) heralded probabilities for one prepared state, or its one-photon part."""
    p = params.replace(input_state=DECOY_INPUTS[state], gamma=None)
    single = fock_cutoff is not None
    if state in ("e", "l"):
        c = build_teleportation_circuit(p, "z", single_photon=single)
        pats = [_with(BSM_PATTERN, "D3e"), _with(BSM_PATTERN, "D3l")]
        if single:
            pe, pl = pattern_probabilities_fock(run_fock(c, fock_cutoff), c.detectors, pats)
        else:
            pe, pl = (_finish(v, dps) for v in pattern_probabilities(run_circuit(c, dps), c, pats))
        return _correct_bin_first(p, pe, pl)
    vals = []
    for ph in phases:
        if single:
            c = build_teleportation_circuit(p, "x", ph, single_photon=True)
            vals.append(pattern_probabilities_fock(run_fock(c, fock_cutoff), c.detectors, [_with(BSM_PATTERN, "D3")])[0])
        else:
            vals.append(x_fringe_probability(p, ph, dps))
    return vals[0], vals[1]


def decoy_simulation(
    params: ScenarioParams,
    intensities,
    dps: Optional[int] = DEFAULT_DPS,
    fock_cutoff: int = DEFAULT_FOCK_CUTOFF,
    states=("e", "l", "+"),
) -> DecoySimulation:
    """Gains and fidelities at each Alice intensity plus the exact one-photon fidelities.

    The superposition is read out at the fringe extrema found at the
    strongest intensity; those phases stay fixed for the weaker rows.
    """
    from .inference.decoy import DecoyDataset, DecoyRow

    mus = sorted({float(m) for m in intensities} | {0.0})
    if len(mus) < 3:
        raise ConfigurationError("decoy simulation needs two nonzero intensities")
    fr = teleport_fidelity_plus(params.replace(mu_A=mus[-1], input_state="plus", gamma=None), dps)
    phases = (fr.phi_max, fr.phi_min)
    rows, truth = {}, {}
    for s in states:
        rs = []
        for m in mus:
            good, bad = _decoy_counts(params.replace(mu_A=m), s, dps, phases)
            q = good + bad
            if not q > 0:
                raise UndefinedObservableError(f"zero gain for state {s!r} at mu={m}")
            rs.append(DecoyRow(m, q, good / q))
        rows[s] = rs
        good, bad = _decoy_counts(params, s, dps, phases, fock_cutoff)
        truth[s] = good / (good + bad)
    return DecoySimulation(DecoyDataset(rows), truth, phases)
