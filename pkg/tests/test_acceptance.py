"""The ten acceptance criteria at their stated tolerances.

Each test logs one PASS/FAIL line; the lines are repeated in the terminal
summary. Criteria that the model cannot meet are left failing.
"""

import math
import time

import numpy as np
import pytest

from timebin_teleport import _accel
from timebin_teleport import scenarios as sc
from timebin_teleport.circuit import BeamSplitter, Coherent, Loss, OpticalCircuit, PhaseShift, TMSV
from timebin_teleport.cli import main
from timebin_teleport.config import build_config
from timebin_teleport.fock import pattern_probabilities_fock, run_fock
from timebin_teleport.gaussian import pattern_probabilities, run_circuit
from timebin_teleport.inference.decoy import decoy_bound
from timebin_teleport.inference.fit import dip_jacobian, dip_model, fringe_jacobian, fringe_model
from timebin_teleport.inference.tomography import TomographyData, qst_mle, sample_counts, trace_distance
from timebin_teleport.tags import (
    CoincidenceConfig,
    count_accidentals,
    count_coincidences,
    estimate_pair_stats,
    pair_stats_from_stream,
    synthesize_pair_source,
)

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def preset():
    return build_config(preset="paper").params


def test_criterion_01_closed_form_equivalence(record):
    rng = np.random.default_rng(20240601)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        ma, mb = 10 ** rng.uniform(-4, -1, 2)
        ei, es = 10 ** rng.uniform(-3, 0, 2)
        z = rng.uniform(0, 1)
        p = sc.ScenarioParams(mu_A=ma, mu_B=mb, eta_i=ei, eta_s=es, zeta=z, dark_prob=0.0)
        cf = sc.p3f_closed_form(ma, mb, ei, es, z)
        worst = max(worst, abs(sc.hom_three_fold(p) - cf) / cf)
    dt = time.perf_counter() - t0
    ok = record(1, worst <= 1e-9 and dt < 10.0, f"200 points, max rel dev {worst:.2e} (<= 1e-9), {dt:.1f} s (< 10 s)")
    assert ok


def _oracle_cases(p):
    cases = [("HOM three-fold", sc.build_hom_circuit(p), [sc.HOM_PATTERN])]
    zp = [sc.BSM_PATTERN, sc._with(sc.BSM_PATTERN, "D3e"), sc._with(sc.BSM_PATTERN, "D3l")]
    for state in ("plus", "early"):
        cz = sc.build_teleportation_circuit(p.replace(input_state=state), "z")
        cases.append((f"teleport z {state} herald/D3e/D3l", cz, zp))
    for ph in (0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi):
        cx = sc.build_teleportation_circuit(p.replace(input_state="plus"), "x", ph)
        cases.append((f"teleport x D3 phi={ph:.2f}", cx, [sc._with(sc.BSM_PATTERN, "D3")]))
    return cases


def test_criterion_02_oracle_equivalence(record, preset):
    # the efficiencies are unstated: check both the preset and the ideal-detector reading
    settings = {
        "preset": preset.replace(mu_A=0.01, mu_B=0.01),
        "ideal": preset.replace(mu_A=0.01, mu_B=0.01, zeta=1.0, eta_i=1.0, eta_s=1.0, dark_prob=0.0),
    }
    t0 = time.perf_counter()
    parts, ok_dev = [], True
    for label, p in settings.items():
        worst, where, worst8 = 0.0, "", 0.0
        for name, c, pats in _oracle_cases(p):
            eng = [float(v) for v in pattern_probabilities(run_circuit(c, sc.DEFAULT_DPS), c, pats)]
            fk = pattern_probabilities_fock(run_fock(c, 6), c.detectors, pats)
            for k, (a, b) in enumerate(zip(eng, fk)):
                d = abs(a - b) / a
                if d > worst:
                    worst, where = d, f"{name}[{k}]"
            fk8 = pattern_probabilities_fock(run_fock(c, 8), c.detectors, pats)
            worst8 = max(worst8, max(abs(a - b) / a for a, b in zip(eng, fk8)))
        ok_dev &= worst <= 1e-3
        parts.append(f"{label}: cutoff 6 max rel dev {worst:.2e} at {where} (cutoff 8: {worst8:.2e})")
    dt = time.perf_counter() - t0
    ok = record(2, ok_dev and dt < 60.0, "; ".join(parts) + f"; tolerance 1e-3; {dt:.1f} s")
    assert ok


def test_criterion_03_hom_ceiling(record, preset):
    v1 = sc.hom_visibility(preset.replace(zeta=1.0))
    v09 = sc.hom_visibility(preset.replace(zeta=0.90, mu_A=2.6e-3))
    ok1 = abs(v1 - 0.835) <= 0.01
    ok2 = abs(v09 - 0.709) <= 0.03
    ok = record(3, ok1 and ok2, f"V(zeta=1) = {v1:.4f} vs 0.835 +- 0.01 [{'ok' if ok1 else 'miss'}]; "
                                f"V(zeta=0.9) = {v09:.4f} vs 0.709 +- 0.03 [{'ok' if ok2 else 'miss'}]")
    assert ok


def test_criterion_04_teleportation_fidelities(record, preset):
    p = preset.replace(zeta=0.90)
    f_plus = sc.teleport_fidelity_plus(p.replace(mu_A=9.38e-3, input_state="plus")).fidelity
    f_e = sc.teleport_fidelity_z(p.replace(mu_A=3.53e-2, input_state="early"))
    f_l = sc.teleport_fidelity_z(p.replace(mu_A=3.53e-2, input_state="late"))
    f_avg = sc.average_fidelity(f_e, f_l, f_plus)
    checks = [("F_+", f_plus, 0.849), ("F_e", f_e, 0.95), ("F_avg", f_avg, 0.89)]
    parts = [f"{n} = {v:.4f} vs {t} +- 0.02 [{'ok' if abs(v - t) <= 0.02 else 'miss'}]" for n, v, t in checks]
    ok = record(4, all(abs(v - t) <= 0.02 for _, v, t in checks), "; ".join(parts))
    assert ok


def test_criterion_05_exact_arithmetic(record):
    checks = [
        ("F_ent(0.964)", sc.entanglement_fidelity(0.964), 0.973),
        ("F_+(0.697)", sc.plus_fidelity(0.697), 0.8485),
        ("F_avg(0.95, 0.96, 0.849)", sc.average_fidelity(0.95, 0.96, 0.849), 0.8847),
    ]
    parts = [f"{n} = {v:.6f} vs {t} [{'ok' if round(v, 4) == t else 'miss'}]" for n, v, t in checks]
    ok = record(5, all(round(v, 4) == t for _, v, t in checks), "; ".join(parts))
    assert ok


def test_criterion_06_pair_statistics(record):
    ps = estimate_pair_stats(10_000, 10_000, 469.2, 1.8)
    ok_row = round(ps.mu_B, 5) == 3.84e-3 and abs(ps.mu_B - 3.9e-3) <= 0.7e-3
    mu, eta = 8.0e-3, 0.05
    cfg = CoincidenceConfig()
    hits = 0
    for seed in range(20):
        st = synthesize_pair_source(mu, eta, eta, 1.0, seed=seed)
        est = pair_stats_from_stream(st, cfg, 3, 1)
        hits += abs(est.mu_B - mu) <= 3 * est.mu_B_err
    ok = record(6, ok_row and hits >= 19,
                f"400 mA row mu_B = {ps.mu_B:.4e} (3.84e-3, within 3.9 +- 0.7e-3); round trip {hits}/20 within 3 sigma")
    assert ok


def test_criterion_07_tomography(record):
    rng = np.random.default_rng(77)
    rho = np.array([[0.62, 0.18 - 0.27j], [0.18 + 0.27j, 0.38]])
    est = qst_mle(sample_counts(rho, 10**6, rng))
    td = trace_distance(est, rho)
    violations = 0
    fits = 0
    for _ in range(1000):
        scale = 10 ** rng.uniform(0, 7)
        counts = rng.poisson(scale * rng.dirichlet(np.full(6, 0.3))).astype(np.int64)
        # zero some outcomes outright
        counts[rng.random(6) < 0.15] = 0
        for b in range(3):
            if counts[2 * b] + counts[2 * b + 1] == 0:
                counts[2 * b + rng.integers(2)] = rng.integers(1, 5)
        r = qst_mle(TomographyData.from_array(counts))
        fits += 1
        violations += not r.is_valid()
    ok = record(7, td <= 5e-3 and violations == 0,
                f"1e6-shot trace distance {td:.2e} (<= 5e-3); {violations} physicality violations in {fits} fuzzed fits")
    assert ok


def test_criterion_08_decoy_validity(record, preset):
    rng = np.random.default_rng(8)
    worst_excess = -math.inf
    tight_gap = 0.0
    n_tight = 0
    for k in range(50):
        eta_i = rng.uniform(6e-3, 2.4e-2)
        p = preset.replace(
            zeta=rng.uniform(0.7, 1.0), eta_i=eta_i, eta_s=rng.uniform(2e-3, 9e-3), mu_B=rng.uniform(4e-3, 1.2e-2)
        )
        tight = k % 2 == 0
        if tight:
            # weak decoy well below the idler efficiency, noiseless gains
            nu = rng.uniform(0.03, 0.1) * eta_i
            mu = nu / 0.3
        else:
            mu = 10 ** rng.uniform(-2.5, -1.3)
            nu = mu * rng.uniform(0.1, 0.6)
        sim = sc.decoy_simulation(p, [mu, nu])
        b = decoy_bound(sim.dataset)
        for s, truth in sim.true_single_photon.items():
            worst_excess = max(worst_excess, b[s] - truth)
            if tight:
                tight_gap = max(tight_gap, truth - b[s])
        n_tight += tight
    ok = record(8, worst_excess <= 1e-12 and tight_gap <= 0.05,
                f"50 datasets: max(F_d - F_true) = {worst_excess:.2e} (<= 0); "
                f"{n_tight} tight settings, max gap {tight_gap:.4f} (<= 0.05)")
    assert ok


def _random_passive(rng):
    els = [Coherent(0, rng.uniform(0, 0.5), rng.uniform(-3, 3)), TMSV(1, 2, rng.uniform(0, 0.3))]
    src = list(els)
    for _ in range(rng.integers(2, 8)):
        i, j = rng.choice(4, 2, replace=False)
        if rng.random() < 0.6:
            els.append(BeamSplitter(int(i), int(j), rng.uniform(0, 1), rng.uniform(-3, 3)))
        else:
            els.append(PhaseShift(int(i), rng.uniform(-3, 3)))
    return src, els


def _fd(f, x, p, h=1e-6):
    p = np.asarray(p, float)
    cols = []
    for k in range(p.size):
        d = np.zeros_like(p)
        d[k] = h * max(1.0, abs(p[k]))
        cols.append((f(x, p + d) - f(x, p - d)) / (2 * d[k]))
    return np.column_stack(cols)


def test_criterion_09_property_suite(record, preset):
    rng = np.random.default_rng(9)
    fails = []

    p0 = preset.replace(mu_A=0.0)
    vals = [sc.hom_three_fold(p0, z) for z in np.linspace(0, 1, 11)]
    spread = (max(vals) - min(vals)) / max(vals)
    if spread > 1e-12:
        fails.append(f"zeta spread {spread:.1e}")

    v0 = max(abs(sc.hom_visibility(preset.replace(zeta=0.0, mu_A=m))) for m in (1e-3, 2.6e-3, 1e-2))
    if v0 != 0.0:
        fails.append(f"V(zeta=0) = {v0:.1e}")

    zs = np.linspace(0, 1, 11)
    vh = [sc.hom_visibility(preset.replace(zeta=z)) for z in zs]
    if not all(a < b for a, b in zip(vh, vh[1:])):
        fails.append("V_HOM not monotone")
    pp = preset.replace(mu_A=9.38e-3, input_state="plus")
    fp = [sc.teleport_fidelity_plus(pp, zeta=z).fidelity for z in np.linspace(0, 1, 6)]
    if not all(a < b for a, b in zip(fp, fp[1:])):
        fails.append("F_+ not monotone")

    jac_dev = 0.0
    x = np.linspace(0, 2 * math.pi, 17)
    xd = np.linspace(-1500, 1500, 21)
    for _ in range(50):
        pf = [rng.uniform(0.5, 10), rng.uniform(-3, 3), rng.uniform(0.5, 3), rng.uniform(-3, 3)]
        a = fringe_jacobian(x, pf)
        jac_dev = max(jac_dev, np.max(np.abs(_fd(fringe_model, x, pf) - a)) / max(1, np.max(np.abs(a))))
        pd = [rng.uniform(0.5, 10), rng.uniform(-3, 3), rng.uniform(4, 7)]
        a = dip_jacobian(xd, pd)
        jac_dev = max(jac_dev, np.max(np.abs(_fd(dip_model, xd, pd) - a)) / max(1, np.max(np.abs(a))))
    if jac_dev > 1e-6:
        fails.append(f"Jacobian dev {jac_dev:.1e}")

    e_dev = 0.0
    for _ in range(100):
        src, els = _random_passive(rng)
        n_in = run_circuit(OpticalCircuit(4, src, {})).mean_photon_number()
        n_out = run_circuit(OpticalCircuit(4, els, {})).mean_photon_number()
        e_dev = max(e_dev, abs(n_out - n_in) / max(n_in, 1e-300))
    if e_dev > 1e-10:
        fails.append(f"energy dev {e_dev:.1e}")
    lossy = run_circuit(OpticalCircuit(4, els + [Loss(0, 0.5)], {})).mean_photon_number()
    if lossy > n_out + 1e-12:
        fails.append("loss increased energy")

    detail = (f"zeta spread {spread:.1e}; V(0) = {v0:.1e}; monotone V_HOM/F_+; "
              f"Jacobian {jac_dev:.1e}; energy {e_dev:.1e}")
    ok = record(9, not fails, detail + (f" -- failed: {', '.join(fails)}" if fails else ""))
    assert ok


def test_criterion_10_throughput(record, tmp_path):
    warm = synthesize_pair_source(0.01, 0.1, 0.1, 1e-4)
    cfg = CoincidenceConfig()
    count_coincidences(warm, cfg, (3, 1))
    count_coincidences(warm, cfg, (3, 1, 2))
    st = synthesize_pair_source(0.25, 0.25, 0.25, 1.0, seed=1, dead_time_ps=0)
    n = len(st)
    t0 = time.perf_counter()
    c = count_coincidences(st, cfg, (3, 1))
    acc = count_accidentals(st, cfg, (3, 1))
    t_count = time.perf_counter() - t0
    t0 = time.perf_counter()
    rc = main(["reproduce", "fig7", "--out", str(tmp_path)])
    t_fig7 = time.perf_counter() - t0
    ok = record(10, n >= 10**7 and t_count <= 5.0 and rc == 0 and t_fig7 <= 120.0,
                f"{n:.2e} tags counted ({c} coincidences, {acc} accidentals) in {t_count:.2f} s (<= 5 s, "
                f"{_accel.backend_name()}); reproduce fig7 {t_fig7:.1f} s (<= 120 s)")
    assert ok
