"""Equivalence suites run by ``tbqt selfcheck``.

Each suite compares two independent routes to the same number and reports
the largest relative gap against its threshold.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from . import scenarios as sc
from .fock import pattern_probabilities_fock, run_fock
from .gaussian import pattern_probabilities, run_circuit


class SuiteResult(NamedTuple):
    name: str
    max_dev: float
    threshold: float
    detail: str

    @property
    def passed(self) -> bool:
        return math.isfinite(self.max_dev) and self.max_dev <= self.threshold


def closed_form_suite(n_points: int = 50, seed: int = 7) -> SuiteResult:
    """Engine HOM three-fold probability against the closed form at random parameters."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_points):
        ma, mb = 10 ** rng.uniform(-4, -1, 2)
        ei, es = 10 ** rng.uniform(-3, 0, 2)
        z = rng.uniform(0, 1)
        p = sc.ScenarioParams(mu_A=ma, mu_B=mb, eta_i=ei, eta_s=es, zeta=z, dark_prob=0.0)
        eng = sc.hom_three_fold(p)
        cf = sc.p3f_closed_form(ma, mb, ei, es, z)
        worst = max(worst, abs(eng - cf) / cf)
    return SuiteResult("closed-form", worst, 1e-9, f"{n_points} random HOM points")


def oracle_suite(cutoff: int = 8) -> SuiteResult:
    """Engine against the truncated Fock simulation on HOM and teleportation circuits."""
    p = sc.ScenarioParams(mu_A=0.01, mu_B=0.01)
    worst = 0.0
    cases = [(sc.build_hom_circuit(p), [sc.HOM_PATTERN])]
    c = sc.build_teleportation_circuit(p, "z")
    cases.append((c, [sc.BSM_PATTERN, sc._with(sc.BSM_PATTERN, "D3e"), sc._with(sc.BSM_PATTERN, "D3l")]))
    for circ, pats in cases:
        eng = pattern_probabilities(run_circuit(circ, sc.DEFAULT_DPS), circ, pats)
        fk = pattern_probabilities_fock(run_fock(circ, cutoff), circ.detectors, pats)
        for a, b in zip(eng, fk):
            worst = max(worst, abs(float(a) - b) / float(a))
    return SuiteResult("fock-oracle", worst, 2e-3, f"cutoff {cutoff}, mu_A = mu_B = 0.01")


def phase_suite() -> SuiteResult:
    """Heralded probabilities must not depend on the global phase of Alice's pulses."""
    p = sc.ScenarioParams(mu_A=0.02, input_state="plus")
    pats = [sc._with(sc.BSM_PATTERN, "D3")]
    vals = []
    for th in (0.0, 1.1, 2.9):
        c = sc.build_teleportation_circuit(p, "x", 0.7, alice_phase=th)
        vals.append(float(pattern_probabilities(run_circuit(c, sc.DEFAULT_DPS), c, pats)[0]))
    return SuiteResult("alice-phase", (max(vals) - min(vals)) / max(vals), 1e-12, "three global phases")


def conversion_suite() -> SuiteResult:
    checks = [
        (sc.entanglement_fidelity(0.964), 0.973),
        (sc.plus_fidelity(0.697), 0.8485),
        (sc.average_fidelity(0.95, 0.96, 0.849), (0.95 + 0.96 + 4 * 0.849) / 6.0),
    ]
    worst = max(abs(a - b) for a, b in checks)
    return SuiteResult("conversions", worst, 1e-12, "fidelity conversion formulas")


SUITES = (closed_form_suite, oracle_suite, phase_suite, conversion_suite)


def run_selfcheck(suites=SUITES) -> list:
    out = []
    for s in suites:
        try:
            out.append(s())
        except Exception as exc:  # a crashing suite is a failing suite
            out.append(SuiteResult(s.__name__, math.inf, 0.0, f"error: {exc}"))
    return out
