import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from timebin_teleport.errors import ConfigurationError, DegenerateDataError, FormatError
from timebin_teleport.inference.tomography import (
    NAMED_STATES,
    DensityMatrix,
    TomographyData,
    expected_probabilities,
    linear_inversion,
    qst_mle,
    qst_mle_detailed,
    read_counts_csv,
    sample_counts,
    state_fidelity,
    trace_distance,
    write_counts_csv,
)


def random_rho(rng):
    g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    m = g @ g.conj().T
    return m / np.trace(m)


def exact_data(rho, n=10**6):
    p = expected_probabilities(rho)
    return TomographyData({k: round(n * v) for k, v in p.items()})


def test_pure_state_from_exact_statistics():
    plus = np.outer(NAMED_STATES["+"], NAMED_STATES["+"].conj())
    res = qst_mle_detailed(exact_data(plus))
    assert res.converged
    assert trace_distance(res.rho, plus) < 1e-5
    assert state_fidelity(res.rho, "+") == pytest.approx(1.0, abs=1e-9)
    assert all(b <= a + 1e-9 for a, b in zip(res.nll_trace, res.nll_trace[1:]))


def test_mixed_state_recovered_from_samples():
    rng = np.random.default_rng(11)
    rho = np.array([[0.6, 0.2 - 0.25j], [0.2 + 0.25j, 0.4]])
    est = qst_mle(sample_counts(rho, 10**6, rng))
    assert trace_distance(est, rho) < 5e-3


def test_calibration_is_undone():
    rng = np.random.default_rng(2)
    rho = random_rho(rng)
    cal = {("z", 0): 0.5, ("x", 1): 1.7}
    est = qst_mle(sample_counts(rho, 10**6, rng, cal))
    assert trace_distance(est, rho) < 5e-3


@given(st.lists(st.integers(0, 10**5), min_size=6, max_size=6))
def test_output_is_always_physical(counts):
    data = TomographyData.from_array(counts)
    if any(data.basis_total(b) == 0 for b in "zxy"):
        with pytest.raises(DegenerateDataError):
            qst_mle(data)
        return
    assert qst_mle(data).is_valid()


def test_linear_inversion_agrees_when_physical():
    rho = np.array([[0.7, 0.1j], [-0.1j, 0.3]])
    data = exact_data(rho)
    li = linear_inversion(data)
    assert trace_distance(li, rho) < 1e-5
    assert trace_distance(qst_mle(data), li) < 1e-4


def test_fidelity_and_distance_basics():
    e = DensityMatrix(np.diag([1.0, 0.0]))
    assert state_fidelity(e, "e") == pytest.approx(1.0)
    assert state_fidelity(e, "l") == pytest.approx(0.0)
    assert state_fidelity(e, "+") == pytest.approx(0.5)
    assert trace_distance(e, np.diag([0.0, 1.0])) == pytest.approx(1.0)
    with pytest.raises(ConfigurationError):
        DensityMatrix(np.eye(3) / 3)


def test_csv_round_trip():
    d = TomographyData.from_array([5, 6, 7, 8, 9, 10])
    text = write_counts_csv(d)
    assert read_counts_csv(io.StringIO(text)).counts == d.counts


@pytest.mark.parametrize(
    "text,match",
    [
        ("basis,outcome,count\nz,0,1\nz,1,2\nx,0,3\nx,1,4\n", "missing basis y"),
        ("z,0,1\nz,1,x\n", "row 2"),
        ("z,0,1\nq,1,2\n", "row 2"),
        ("z,0,1\nz,0,2\n", "row 2"),
        ("z,0,-1\n", "row 1"),
    ],
)
def test_malformed_csv(text, match):
    with pytest.raises(FormatError, match=match):
        read_counts_csv(io.StringIO(text))


def test_negative_and_missing_counts_rejected():
    with pytest.raises(ConfigurationError):
        TomographyData({("z", 0): 1})
    with pytest.raises(ConfigurationError):
        TomographyData.from_array([1, 2, 3, 4, 5, -6])


def test_coherence_of_plus_state():
    plus = DensityMatrix(np.full((2, 2), 0.5))
    assert abs(plus.coherence) == pytest.approx(0.5)
    assert plus.probability(("x", 0)) == pytest.approx(1.0)
    assert math.isclose(sum(plus.eigenvalues()), 1.0)
