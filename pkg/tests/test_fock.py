import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from timebin_teleport.circuit import (
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
from timebin_teleport.errors import ConfigurationError, ResourceError
from timebin_teleport.fock import (
    build_input,
    output_distribution,
    pattern_probabilities_fock,
    run_fock,
    truncation_deficit,
)
from timebin_teleport.gaussian import pattern_probabilities, run_circuit


@given(st.floats(0, 1), st.floats(-3, 3), st.floats(0, 1))
def test_passive_network_preserves_norm(t, phi, eta):
    c = OpticalCircuit(
        3,
        [Coherent(0, 0.3), TMSV(1, 2, 0.1), BeamSplitter(0, 1, t, phi), PhaseShift(2, phi), Loss(1, eta)],
        {},
    )
    s_in = build_input(c, 5)
    s_out = run_fock(c, 5)
    assert s_out.norm() == pytest.approx(s_in.norm(), abs=1e-12)


def test_two_single_photons_bunch():
    c = OpticalCircuit(
        2,
        [SinglePhoton((0,), (1.0,)), SinglePhoton((1,), (1.0,)), BeamSplitter(0, 1, 2**-0.5)],
        {"A": Detector({0}), "B": Detector({1})},
    )
    s = run_fock(c, 2)
    dist = output_distribution(s, [0, 1])
    assert dist.get((1, 1), 0.0) == pytest.approx(0.0, abs=1e-15)
    assert dist[(2, 0)] == pytest.approx(0.5)
    assert pattern_probabilities_fock(s, c.detectors, [ClickPattern({"A", "B"})])[0] == pytest.approx(0, abs=1e-15)


def test_truncation_deficit_matches_poisson_tail():
    mu = 0.5
    c = OpticalCircuit(1, [Coherent(0, mu)], {})
    s = run_fock(c, 4)
    tail = 1 - sum(math.exp(-mu) * mu**n / math.factorial(n) for n in range(5))
    assert truncation_deficit(s) == pytest.approx(tail, rel=1e-10)


@pytest.mark.parametrize("mu", [1e-3, 1e-2])
def test_fock_matches_gaussian_on_lossy_network(mu):
    els = [Coherent(0, mu, 0.4), TMSV(1, 2, mu), BeamSplitter(0, 1, 0.6, 0.2), Loss(2, 0.3)]
    dets = {"A": Detector({0}, 0.8, 1e-6), "B": Detector({1}), "C": Detector({2})}
    c = OpticalCircuit(3, els, dets)
    pats = [ClickPattern({"A"}), ClickPattern({"A", "C"}), ClickPattern({"B", "C"}, {"A"})]
    g = pattern_probabilities(run_circuit(c), c, pats)
    f = pattern_probabilities_fock(run_fock(c, 6), c.detectors, pats)
    for a, b in zip(g, f):
        assert b == pytest.approx(a, rel=1e-5)


def test_term_budget_raises_resource_error():
    els = [Coherent(k, 0.5) for k in range(4)] + [BeamSplitter(0, 1, 0.5), BeamSplitter(2, 3, 0.5), BeamSplitter(1, 2, 0.5)]
    c = OpticalCircuit(4, els, {})
    with pytest.raises(ResourceError):
        run_fock(c, 8, max_terms=50)


def test_bad_cutoff_rejected():
    with pytest.raises(ConfigurationError):
        run_fock(OpticalCircuit(1, [Coherent(0, 0.1)], {}), 0)


def test_source_after_mixing_rejected():
    c = OpticalCircuit(2, [Coherent(0, 0.1), BeamSplitter(0, 1, 0.5), Coherent(1, 0.1)], {})
    with pytest.raises(ConfigurationError):
        build_input(c, 3)
