import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from timebin_teleport import _accel
from timebin_teleport.errors import ConfigurationError, DegenerateDataError, FormatError
from timebin_teleport.tags import (
    ChannelSpec,
    CoincidenceConfig,
    TimeTagStream,
    count_accidentals,
    count_coincidences,
    estimate_pair_stats,
    pair_source_probabilities,
    pair_stats_from_stream,
    read_binary,
    read_csv,
    synthesize,
    synthesize_pair_source,
    write_binary,
    write_csv,
)

needs_numba = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba unavailable or disabled")


@pytest.fixture(scope="module")
def stream():
    return synthesize_pair_source(0.01, 0.1, 0.1, 0.05, seed=3)


def test_synthesis_is_deterministic():
    a = synthesize_pair_source(0.01, 0.1, 0.1, 0.01, seed=5)
    b = synthesize_pair_source(0.01, 0.1, 0.1, 0.01, seed=5)
    c = synthesize_pair_source(0.01, 0.1, 0.1, 0.01, seed=6)
    assert a == b
    assert a != c


def test_binary_round_trip(stream, tmp_path):
    p = tmp_path / "s.ttag"
    write_binary(stream, p)
    back = read_binary(p, duration=stream.duration)
    assert back == stream
    buf = io.BytesIO()
    write_binary(stream, buf)
    assert read_binary(buf.getvalue()) == stream


def test_csv_round_trip(stream, tmp_path):
    p = tmp_path / "s.csv"
    write_csv(stream, p)
    assert read_csv(p) == stream


@pytest.mark.parametrize(
    "blob",
    [b"", b"XXXX" + bytes(11), b"TTAG\x02\x00" + bytes(9), b"TTAG\x01\x00" + bytes(9) + b"\x01\x02"],
)
def test_bad_binary_rejected(blob):
    with pytest.raises(FormatError):
        read_binary(blob)


def test_bad_csv_reports_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("channel,timestamp_ps\n1,100\n2,abc\n")
    with pytest.raises(FormatError, match="3"):
        read_csv(p)


def test_unsorted_stream_rejected():
    with pytest.raises(ConfigurationError):
        TimeTagStream(np.array([1, 1]), np.array([5, 3]))
    with pytest.raises(ConfigurationError):
        TimeTagStream(np.array([9]), np.array([5]))


sorted_times = st.lists(st.integers(0, 10**6), max_size=200).map(sorted).map(lambda x: np.array(x, dtype=np.int64))


@given(sorted_times, sorted_times, st.integers(-2000, 2000), st.integers(0, 3000))
def test_pair_count_matches_brute_force(a, b, off, half):
    brute = int(np.sum(np.abs(b[None, :] - a[:, None] - off) <= half)) if a.size and b.size else 0
    assert _accel.pair_count_numpy(a, b, off, half) == brute


@given(sorted_times, sorted_times, sorted_times, st.integers(-500, 500), st.integers(-500, 500), st.integers(0, 3000))
def test_triple_count_matches_brute_force(a, b, c, ob, oc, half):
    brute = 0
    for t in a:
        brute += int(np.sum(np.abs(b - t - ob) <= half)) * int(np.sum(np.abs(c - t - oc) <= half))
    assert _accel.triple_count_numpy(a, b, c, ob, oc, half) == brute


@given(sorted_times, st.integers(0, 50_000))
def test_dead_time_mask_matches_loop(ts, dead):
    keep, last = [], None
    for t in ts:
        ok = last is None or t - last >= dead
        keep.append(ok)
        if ok:
            last = t
    assert _accel.dead_time_mask_numpy(ts, dead).tolist() == keep


@needs_numba
@given(sorted_times, sorted_times, sorted_times, st.integers(-500, 500), st.integers(0, 3000), st.integers(0, 50_000))
def test_numba_and_numpy_agree(a, b, c, off, half, dead):
    assert _accel.pair_count(a, b, off, half, True) == _accel.pair_count(a, b, off, half, False)
    assert _accel.triple_count(a, b, c, off, -off, half, True) == _accel.triple_count(a, b, c, off, -off, half, False)
    assert np.array_equal(_accel.dead_time_mask(a, dead, True), _accel.dead_time_mask(a, dead, False))


@pytest.mark.parametrize("shards,workers", [(1, 1), (3, 1), (7, 4), (50, 2)])
def test_sharding_does_not_change_counts(stream, shards, workers):
    cfg = CoincidenceConfig()
    ref = count_coincidences(stream, cfg, (3, 1))
    assert count_coincidences(stream, cfg, (3, 1), shards=shards, workers=workers) == ref
    assert count_accidentals(stream, cfg, (3, 1), shards=shards) == count_accidentals(stream, cfg, (3, 1))


def test_dead_time_is_enforced():
    s = synthesize({1: ChannelSpec(0.5)}, 1e-4, dead_time_ps=50_000, jitter_fwhm=0)
    assert np.min(np.diff(s.channel_times(1))) >= 50_000


def test_delays_are_compensated():
    spec = {1: ChannelSpec(0.01, 0), 2: ChannelSpec(0.01, 3000)}
    s = synthesize(spec, 0.01, {(1, 2): 0.01}, jitter_fwhm=50, seed=1)
    plain = count_coincidences(s, CoincidenceConfig(), (1, 2))
    comp = count_coincidences(s, CoincidenceConfig(delays={2: 3000}), (1, 2))
    assert plain == 0
    assert comp == len(s.channel_times(1))


def test_inconsistent_correlation_rejected():
    with pytest.raises(ConfigurationError):
        synthesize({1: ChannelSpec(0.1), 2: ChannelSpec(0.1)}, 0.01, {(1, 2): 0.2})
    with pytest.raises(ConfigurationError):
        count_coincidences(synthesize({1: 0.1}, 1e-4), CoincidenceConfig(), (1, 1))
    with pytest.raises(ConfigurationError):
        CoincidenceConfig(window=20_000)


def test_estimator_on_measured_row():
    ps = estimate_pair_stats(10_000, 10_000, 469.2, 1.8)
    assert ps.mu_B == pytest.approx(3.836e-3, rel=1e-3)
    assert ps.mu_B_err == pytest.approx(ps.mu_B * np.sqrt(1 / 1.8 + 1 / 469.2))
    with pytest.raises(DegenerateDataError):
        estimate_pair_stats(10, 10, 0, 0)


def test_pair_source_probabilities_are_consistent():
    ps, pi, psi = pair_source_probabilities(0.01, 0.1, 0.2)
    assert psi < min(ps, pi)
    assert ps == pytest.approx(0.1 * 0.01 / (1 + 0.1 * 0.01), rel=1e-9)


def test_round_trip_recovers_mean_photon_number(stream):
    st_ = pair_stats_from_stream(stream, CoincidenceConfig(), 3, 1)
    assert abs(st_.mu_B - 0.01) <= 3 * st_.mu_B_err
    assert abs(st_.eta_s - 0.1) <= 3 * st_.eta_s_err
