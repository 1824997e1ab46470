"""Scenario sweeps for ``simulate`` and the fixed recipes behind ``reproduce``."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from . import scenarios as sc
from .config import RunConfig
from .errors import ConfigurationError
from .fock import pattern_probabilities_fock, run_fock
from .gaussian import pattern_probabilities, run_circuit
from .inference.decoy import DecoyDataset, DecoyRow, decoy_bound
from .inference.fit import fit_fringe, fit_hom_dip
from .report import TOOL, config_hash, write_csv
from .scenarios import ScenarioParams
from .tags import CoincidenceConfig, count_accidentals, count_coincidences, pair_stats_from_stream, synthesize_pair_source

ORACLE_CUTOFF = 6

# --------------------------------------------------------------- simulate

OBSERVABLES = {
    "hom": ("V_HOM", "P3f_zeta", "P3f_0"),
    "hom-dip": ("delta_t_ps", "rate_hz"),
    "teleport-z": ("F_z", "P_correct", "P_wrong", "P_herald"),
    "teleport-x": ("F_plus", "V_plus", "phi_max", "phi_min"),
    "entanglement": ("V_ent", "F_ent"),
    "herald": ("P_herald", "rate_hz"),
}


def _oracle_deviation(scenario, p: ScenarioParams) -> float:
    """Relative gap between the engine and an independent route for this scenario."""
    if scenario in ("hom", "hom-dip"):
        eng = sc.hom_visibility(p.replace(dark_prob=0.0))
        cf = sc.hom_visibility(p, method="closed_form")
        return abs(eng - cf) / max(abs(cf), 1e-300)
    c = sc.build_teleportation_circuit(p, "z")
    pat = [sc.BSM_PATTERN]
    eng = pattern_probabilities(run_circuit(c, sc.DEFAULT_DPS), c, pat)[0]
    fk = pattern_probabilities_fock(run_fock(c, ORACLE_CUTOFF), c.detectors, pat)[0]
    return abs(float(eng) - fk) / float(eng)


def scenario_rows(scenario: str, p: ScenarioParams) -> list:
    """Observable rows for one parameter point."""
    if scenario == "hom":
        return [{"V_HOM": sc.hom_visibility(p), "P3f_zeta": sc.hom_three_fold(p), "P3f_0": sc.hom_three_fold(p, 0.0)}]
    if scenario == "hom-dip":
        return [{"delta_t_ps": dt, "rate_hz": r} for dt, r in sc.hom_dip_curve(p)]
    if scenario == "teleport-z":
        if p.input_state == "plus":
            p = p.replace(input_state="early")
        pe, pl = sc.z_basis_probabilities(p)
        good, bad = sc._correct_bin_first(p, pe, pl)
        return [{"F_z": good / (good + bad), "P_correct": good, "P_wrong": bad, "P_herald": sc.heralding_probability(p)}]
    if scenario == "teleport-x":
        fr = sc.teleport_fidelity_plus(p.replace(input_state="plus"))
        return [{"F_plus": fr.fidelity, "V_plus": fr.visibility, "phi_max": fr.phi_max, "phi_min": fr.phi_min}]
    if scenario == "entanglement":
        v = sc.entanglement_fringe(p).visibility
        return [{"V_ent": v, "F_ent": sc.entanglement_fidelity(v)}]
    if scenario == "herald":
        h = sc.heralding_probability(p)
        return [{"P_herald": h, "rate_hz": h * p.clock_rate}]
    raise ConfigurationError(f"unknown scenario {scenario!r}")


def _point(args):
    scenario, p, changes, oracle = args
    rows = scenario_rows(scenario, p)
    dev = _oracle_deviation(scenario, p) if oracle else None
    out = []
    for r in rows:
        r = dict(changes, **r)
        if oracle:
            r["oracle_rel_dev"] = dev
        out.append(r)
    return out


def sweep_points(cfg: RunConfig):
    names = [n for n, _ in cfg.sweeps]
    grids = [g for _, g in cfg.sweeps]
    for combo in itertools.product(*grids) if grids else [()]:
        changes = dict(zip(names, combo))
        yield changes, cfg.params.replace(**changes) if changes else cfg.params


def simulate(cfg: RunConfig, workers: int = 1):
    """``(columns, rows)`` over the cartesian product of the configured sweeps."""
    tasks = [(cfg.scenario, p, ch, cfg.oracle_check) for ch, p in sweep_points(cfg)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(workers) as ex:
            chunks = list(ex.map(_point, tasks))
    else:
        chunks = [_point(t) for t in tasks]
    cols = [n for n, _ in cfg.sweeps] + list(OBSERVABLES[cfg.scenario])
    if cfg.oracle_check:
        cols.append("oracle_rel_dev")
    return cols, [r for ch in chunks for r in ch]


def simulate_meta(cfg: RunConfig) -> dict:
    return {
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "recipe": f"simulate/{cfg.scenario}",
        "scenario": cfg.scenario,
        "sweeps": "; ".join(f"{n}[{len(g)}]" for n, g in cfg.sweeps) or "none",
    }


# -------------------------------------------------------------- reproduce

ENT_INTEGRATION_S = 300.0
HOM_INTEGRATION_S = 1800.0
PLUS_INTEGRATION_S = 3600.0
FIBER_ALICE_DB = 5.92
FIBER_BOB_DB = 2.56
FIG7_MU_GRID = tuple(float(x) for x in np.geomspace(1e-3, 0.25, 12))
TABLE1_INTENSITIES = {"e": (3.53e-3, 1.24e-3), "l": (3.53e-3, 1.24e-3), "+": (9.38e-3, 2.01e-3)}
# measured fidelities for the superposition input: (mu_A, F), vacuum row last
TABLE1_PLUS_MEASURED = ((9.38e-3, 0.847), (2.01e-3, 0.832), (0.0, 0.528))
# pump current (mA), coincidences and accidentals per TABLE2_ROW_SECONDS
TABLE2_ROWS = (
    (400, 469.2, 1.8),
    (450, 1156.3, 6.1),
    (500, 1653.9, 9.5),
    (550, 2095.8, 13.7),
    (575, 2343.2, 17.7),
    (600, 2548.7, 18.5),
)
TABLE2_ROW_SECONDS = 10.0
TABLE2_DURATION_S = 500.0
RECIPES = ("fig2", "fig3a", "fig3b", "fig4a", "fig4b", "fig7", "table1", "table2")
DESCRIPTIONS = {
    "fig2": "entanglement fringe versus MZI phase with synthetic counts and a sinusoid refit",
    "fig3a": "HOM dip versus arrival-time offset with synthetic counts and a Gaussian refit",
    "fig3b": "HOM dip with extra fibre loss on both arms, model and synthetic refit",
    "fig4a": "heralded superposition fringe versus MZI phase and the resulting fidelity",
    "fig4b": "teleportation fidelities of the three input states and their weighted average",
    "fig7": "superposition fidelity and HOM visibility versus Alice's mean photon number",
    "table1": "decoy rows per input state and the resulting single-photon fidelity bounds",
    "table2": "pair-source statistics recovered from synthetic tag streams",
}


class Recipe:
    def __init__(self, rid, params, seed, out_dir):
        self.rid = rid
        self.params = params
        self.seed = seed
        self.out = Path(out_dir)
        self.rng = np.random.default_rng(seed)
        self.written = []

    def meta(self, **extra):
        m = {
            "config_hash": config_hash({"recipe": self.rid, "params": self.params.as_dict(), "seed": self.seed}),
            "seed": self.seed,
            "recipe": self.rid,
            "description": DESCRIPTIONS[self.rid],
        }
        m.update(extra)
        return m

    def write(self, name, columns, rows, notes=(), **extra):
        self.written.append(write_csv(self.out / name, columns, rows, self.meta(**extra), notes))


def _fringe_fit_note(label, pts, sigma=None):
    fr = fit_fringe(pts, sigma=sigma)
    return fr, f"fit {label}: V = {fr['V']!r} +- {fr.errors['V']!r}"


def _fig2(r: Recipe):
    p = r.params
    res = sc.entanglement_fringe(p)
    rows, pts1, pts2 = [], [], []
    for ph, r1, r2 in res.points:
        n1 = int(r.rng.poisson(r1 * ENT_INTEGRATION_S))
        n2 = int(r.rng.poisson(r2 * ENT_INTEGRATION_S))
        rows.append([ph, r1, r2, n1, n2])
        pts1.append((ph, n1))
        pts2.append((ph, n2))
    f1, n1 = _fringe_fit_note("out1", pts1, np.sqrt(np.maximum([y for _, y in pts1], 1)))
    f2, n2 = _fringe_fit_note("out2", pts2, np.sqrt(np.maximum([y for _, y in pts2], 1)))
    v = 0.5 * (f1["V"] + f2["V"])
    notes = [n1, n2, f"model V_ent = {res.visibility!r}", f"refit V_ent = {v!r}", f"F_ent = {sc.entanglement_fidelity(v)!r}"]
    r.write("fig2_entanglement.csv", ["phase_rad", "rate1_hz", "rate2_hz", "counts1", "counts2"], rows, notes,
            integration_s=ENT_INTEGRATION_S)


def _dip(r: Recipe, p, name):
    curve = sc.hom_dip_curve(p)
    rows, pts, sig = [], [], []
    for dt, rate in curve:
        n = int(r.rng.poisson(rate * HOM_INTEGRATION_S))
        rows.append([dt, rate, n])
        pts.append((dt, n))
        sig.append(math.sqrt(max(n, 1)))
    model_fit = fit_hom_dip([(dt, rate) for dt, rate in curve])
    noisy = fit_hom_dip(pts, sigma=sig)
    notes = [
        f"model V_HOM = {sc.hom_visibility(p)!r}",
        f"refit of model curve: V = {model_fit['V']!r}, sigma = {model_fit['sigma']!r} ps",
        f"fit of synthetic counts: V = {noisy['V']!r} +- {noisy.errors['V']!r}, sigma = {noisy['sigma']!r} ps",
    ]
    r.write(name, ["delta_t_ps", "rate_hz", "counts"], rows, notes, integration_s=HOM_INTEGRATION_S)


def _fig3a(r: Recipe):
    _dip(r, r.params, "fig3a_hom.csv")


def _fig3b(r: Recipe):
    p = r.params.replace(alice_extra_loss_db=FIBER_ALICE_DB, bob_extra_loss_db=FIBER_BOB_DB)
    _dip(r, p, "fig3b_hom_fiber.csv")


def _fig4a(r: Recipe):
    p = r.params.replace(input_state="plus", gamma=None)
    scan = sc._x_scan(p, sc.DEFAULT_DPS)
    rows, pts, sig = [], [], []
    for ph in p.phase_grid:
        rate = scan(ph)[0] * p.clock_rate
        n = int(r.rng.poisson(rate * PLUS_INTEGRATION_S))
        rows.append([ph, rate, n])
        pts.append((ph, n))
        sig.append(math.sqrt(max(n, 1)))
    fr = sc.teleport_fidelity_plus(p)
    notes = [f"model V_plus = {fr.visibility!r}", f"model F_plus = {fr.fidelity!r}"]
    try:
        fit = fit_fringe(pts, sigma=sig)
        notes.append(f"fit of synthetic counts: V = {fit['V']!r} +- {fit.errors['V']!r}, "
                     f"F = {sc.plus_fidelity(fit['V'])!r}")
    except (ArithmeticError, ValueError) as exc:
        notes.append(f"fit of synthetic counts failed: {exc}")
    r.write("fig4a_plus_fringe.csv", ["phase_rad", "rate_hz", "counts"], rows, notes,
            integration_s=PLUS_INTEGRATION_S, mu_A=p.mu_A)


def _fig4b(r: Recipe):
    p = r.params
    fe = sc.teleport_fidelity_z(p.replace(input_state="early", gamma=None))
    fl = sc.teleport_fidelity_z(p.replace(input_state="late", gamma=None))
    fp = sc.teleport_fidelity_plus(p.replace(input_state="plus", gamma=None)).fidelity
    rows = [["e", fe], ["l", fl], ["+", fp], ["avg", sc.average_fidelity(fe, fl, fp)]]
    r.write("fig4b_fidelities.csv", ["state", "fidelity"], rows, mu_A=p.mu_A)


def _fit_zeta_hom(p, mus, vs, sig):
    def resid(z):
        zz = float(min(max(z[0], 0.0), 1.0))
        return [(sc.hom_visibility(p.replace(mu_A=m, zeta=zz), "closed_form", dps=30) - v) / s
                for m, v, s in zip(mus, vs, sig)]

    res = least_squares(resid, [0.8], bounds=([0.0], [1.0]))
    return float(res.x[0])


def _fig7(r: Recipe):
    p = r.params
    rows_f, rows_v = [], []
    synth_v, synth_s = [], []
    for m in FIG7_MU_GRID:
        q = p.replace(mu_A=m)
        fz = sc.teleport_fidelity_plus(q.replace(input_state="plus", gamma=None)).fidelity
        f1 = sc.teleport_fidelity_plus(q.replace(input_state="plus", gamma=None, zeta=1.0)).fidelity
        rows_f.append([m, fz, f1])
        vz = sc.hom_visibility(q)
        v1 = sc.hom_visibility(q.replace(zeta=1.0))
        # synthetic visibility from Poisson counts at zero and full overlap
        p0 = sc.hom_three_fold(q, 0.0) * p.clock_rate * HOM_INTEGRATION_S
        n0 = max(1, int(r.rng.poisson(p0)))
        nz = int(r.rng.poisson(p0 * (1.0 - vz)))
        vs = 1.0 - nz / n0
        ss = math.sqrt(nz / n0**2 + nz**2 / n0**3) if nz else 1.0 / n0
        synth_v.append(vs)
        synth_s.append(max(ss, 1e-6))
        rows_v.append([m, vz, v1, vs, ss])
    zfit = _fit_zeta_hom(p, FIG7_MU_GRID, synth_v, synth_s)
    r.write("fig7_fidelity.csv", ["mu_A", "F_plus_zeta", "F_plus_zeta1"], rows_f, zeta=p.zeta)
    r.write("fig7_hom.csv", ["mu_A", "V_HOM_zeta", "V_HOM_zeta1", "V_HOM_synthetic", "V_HOM_synthetic_err"], rows_v,
            [f"zeta fitted to synthetic visibilities = {zfit!r}"], zeta=p.zeta, integration_s=HOM_INTEGRATION_S)


def _table1(r: Recipe):
    p = r.params
    rows, bounds = [], []
    for states, mus in ((("e", "l"), TABLE1_INTENSITIES["e"]), (("+",), TABLE1_INTENSITIES["+"])):
        sim = sc.decoy_simulation(p, mus, states=states)
        b = decoy_bound(sim.dataset)
        for s in states:
            for row in sim.dataset.rows[s]:
                rows.append([s, row.mu, row.gain, row.fidelity])
            bounds.append([s, b[s], sim.true_single_photon[s]])
        if "+" in states:
            gains = {row.mu: row.gain for row in sim.dataset.rows["+"]}
            measured = DecoyDataset({"+": [DecoyRow(m, gains[m], f) for m, f in TABLE1_PLUS_MEASURED]})
            bounds.append(["+ (measured F, model gains)", decoy_bound(measured)["+"], float("nan")])
    fds = {s: f for s, f, _ in bounds if s in ("e", "l", "+")}
    avg = (fds["e"] + fds["l"] + 4.0 * fds["+"]) / 6.0
    r.write("table1_decoy_rows.csv", ["state", "mu_A", "gain", "fidelity"], rows)
    r.write("table1_decoy_bounds.csv", ["state", "F_bound", "F_single_photon"], bounds, [f"F_bound_avg = {avg!r}"])


def _table2(r: Recipe):
    p = r.params
    cycles = TABLE2_ROW_SECONDS * p.clock_rate
    cfg = CoincidenceConfig(clock_rate=p.clock_rate)
    scale = TABLE2_ROW_SECONDS / TABLE2_DURATION_S
    rows = []
    for k, (current, c, a) in enumerate(TABLE2_ROWS):
        mu = a / c
        # equal channel efficiencies reproducing the listed coincidence total
        eta = math.sqrt(c / (cycles * mu))
        stream = synthesize_pair_source(mu, eta, eta, TABLE2_DURATION_S, seed=r.seed * 1000 + k,
                                        dark_prob=p.dark_prob, clock_rate=p.clock_rate)
        cc = count_coincidences(stream, cfg, (3, 1))
        acc = count_accidentals(stream, cfg, (3, 1))
        st = pair_stats_from_stream(stream, cfg, 3, 1)
        rows.append([current, c, a, cc * scale, acc * scale, mu, st.mu_B, st.mu_B_err, eta, st.eta_s, st.eta_i])
    r.write("table2_pairs.csv",
            ["current_mA", "coincidences_listed", "accidentals_listed", "coincidences_per_10s", "accidentals_per_10s",
             "mu_B_listed", "mu_B_hat", "mu_B_err", "eta_gen", "eta_s_hat", "eta_i_hat"], rows,
            duration_s=TABLE2_DURATION_S)


_RUNNERS = {
    "fig2": _fig2, "fig3a": _fig3a, "fig3b": _fig3b, "fig4a": _fig4a,
    "fig4b": _fig4b, "fig7": _fig7, "table1": _table1, "table2": _table2,
}


def reproduce(rid: str, out_dir, params: ScenarioParams = None, seed: int = 0) -> list:
    """Run recipe ``rid`` and return the written paths."""
    if rid not in _RUNNERS:
        raise ConfigurationError(f"unknown recipe {rid!r}; choose from {', '.join(RECIPES)}")
    params = params or default_recipe_params(rid)
    r = Recipe(rid, params, seed, out_dir)
    _RUNNERS[rid](r)
    return r.written


def default_recipe_params(rid: str) -> ScenarioParams:
    from .config import build_config

    p = build_config(preset="paper").params
    if rid in ("fig4a", "fig4b"):
        p = p.replace(mu_A=9.38e-3)
    return p


__all__ = ["simulate", "simulate_meta", "reproduce", "RECIPES", "OBSERVABLES", "TOOL"]
