import io
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from timebin_teleport.errors import BoundUndefinedError, ConfigurationError, FormatError
from timebin_teleport.inference.decoy import (
    DecoyDataset,
    DecoyRow,
    bound_state,
    decoy_bound,
    read_decoy_csv,
    write_decoy_csv,
)


def poisson_rows(yields, errors, mus):
    """Rows from a photon-number decomposition: gain = sum_n P(n) Y_n, error likewise."""
    rows = []
    for mu in mus:
        w = [math.exp(-mu) * mu**n / math.factorial(n) for n in range(len(yields))]
        q = sum(p * y for p, y in zip(w, yields))
        bad = sum(p * y * e for p, y, e in zip(w, yields, errors))
        rows.append(DecoyRow(mu, q, 1 - bad / q))
    return rows


@given(st.floats(1e-7, 1e-5), st.floats(1e-4, 1e-2), st.floats(0, 0.05), st.floats(0, 0.3), st.floats(0, 0.5))
def test_bound_is_exact_without_three_photon_terms(y0, y1, y2_ratio, e1, e2):
    yields = [y0, y1, y2_ratio * y1 * 50]
    rows = poisson_rows(yields, [0.5, e1, e2], [0.0, 0.003, 0.01])
    b = bound_state(rows)
    assert b.yield_lower == pytest.approx(y1, rel=1e-7)
    assert b.error_upper >= e1 - 1e-7


@given(st.floats(1e-4, 1e-2), st.floats(0, 0.3), st.floats(0, 1), st.floats(0, 1))
def test_bound_never_exceeds_true_single_photon_fidelity(y1, e1, e2, e3):
    yields = [1e-6, y1, 3 * y1, 5 * y1]
    rows = poisson_rows(yields, [0.5, e1, e2, e3], [0.0, 0.002, 0.01])
    b = bound_state(rows)
    assert b.yield_lower <= y1 * (1 + 1e-9)
    assert b.fidelity <= 1 - e1 + 1e-9


def test_hand_computed_bound():
    # mu = 0.1, nu = 0.05; y1 and e1 from the closed formulas by hand
    rows = [DecoyRow(0.0, 1e-5, 0.5), DecoyRow(0.05, 2e-3, 0.9), DecoyRow(0.1, 4.2e-3, 0.88)]
    mu, nu = 0.1, 0.05
    y1 = mu / (mu * nu - nu**2) * (2e-3 * math.exp(nu) - 4.2e-3 * math.exp(mu) * nu**2 / mu**2 - (mu**2 - nu**2) / mu**2 * 1e-5)
    e1 = (0.1 * 2e-3 * math.exp(nu) - 0.5 * 1e-5) / (nu * y1)
    b = bound_state(rows)
    assert b.yield_lower == pytest.approx(y1, rel=1e-12)
    assert b.fidelity == pytest.approx(1 - e1, rel=1e-12)


def test_average_weights_superposition():
    rs = poisson_rows([1e-6, 1e-3, 0], [0.5, 0.1, 0.1], [0, 0.002, 0.01])
    rp = poisson_rows([1e-6, 1e-3, 0], [0.5, 0.2, 0.2], [0, 0.002, 0.01])
    b = decoy_bound(DecoyDataset({"e": rs, "l": rs, "+": rp}))
    assert b.average == pytest.approx((2 * b["e"] + 4 * b["+"]) / 6)
    assert decoy_bound(DecoyDataset({"e": rs})).average is None


def test_uninformative_dataset_raises():
    rows = [DecoyRow(0, 1e-3, 0.5), DecoyRow(0.01, 5e-4, 0.5), DecoyRow(0.1, 5e-4, 0.5)]
    with pytest.raises(BoundUndefinedError):
        bound_state(rows)


@pytest.mark.parametrize(
    "rows",
    [
        {"e": [(0.01, 1e-3, 0.9), (0.02, 2e-3, 0.9), (0.03, 3e-3, 0.9)]},
        {"e": [(0, 1e-6, 0.5), (0.01, 1e-3, 0.9)]},
        {"e": [(0, 1e-6, 0.5), (0.01, 1e-3, 0.9), (0.01, 1e-3, 0.9)]},
        {"q": [(0, 1e-6, 0.5), (0.01, 1e-3, 0.9), (0.02, 1e-3, 0.9)]},
        {"e": [(0, 1e-6, 1.5), (0.01, 1e-3, 0.9), (0.02, 1e-3, 0.9)]},
        {},
    ],
)
def test_invalid_datasets_rejected(rows):
    with pytest.raises(ConfigurationError):
        DecoyDataset(rows)


def test_csv_round_trip_and_errors():
    rs = poisson_rows([1e-6, 1e-3, 1e-3], [0.5, 0.1, 0.1], [0, 0.002, 0.01])
    d = DecoyDataset({"e": rs, "+": rs})
    back = read_decoy_csv(io.StringIO(write_decoy_csv(d)))
    assert back.rows == d.rows
    with pytest.raises(FormatError, match="row 2"):
        read_decoy_csv(io.StringIO("state,mu,gain,fidelity\ne,0,abc,0.5\n"))
    with pytest.raises(FormatError, match="vacuum"):
        read_decoy_csv(io.StringIO("e,0.1,1e-3,0.9\ne,0.2,1e-3,0.9\ne,0.3,1e-3,0.9\n"))
