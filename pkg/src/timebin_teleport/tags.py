"""Time-tag streams: synthesis, coincidence counting, file IO and pair statistics.

Timestamps are integer picoseconds. A clock cycle at 90 MHz lasts
11111.1 ps, so cycle ``k`` starts at ``round(k * 1e12 / clock_rate)``.
"""

from __future__ import annotations

import io
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, NamedTuple, Optional, Sequence

import numpy as np

from . import _accel
from .errors import ConfigurationError, DegenerateDataError, FormatError

CLOCK_RATE_HZ = 90e6
FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
DEFAULT_DEAD_TIME_PS = 50_000
MAGIC = b"TTAG"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHQB")
_RECORD = np.dtype([("channel", "u1"), ("timestamp", "<u8")])


def clock_period_ps(clock_rate: float) -> float:
    return 1e12 / clock_rate


@dataclass(frozen=True)
class TimeTagStream:
    """Channel-stamped events sorted by time.

    ``channels`` holds values in ``1..channel_count``; ``timestamps`` is int64 ps.
    """

    channels: np.ndarray
    timestamps: np.ndarray
    clock_rate: float = CLOCK_RATE_HZ
    duration: float = 0.0
    channel_count: int = 4
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        ch = np.ascontiguousarray(self.channels, dtype=np.uint8)
        ts = np.ascontiguousarray(self.timestamps, dtype=np.int64)
        if ch.shape != ts.shape or ch.ndim != 1:
            raise ConfigurationError("channels and timestamps must be 1-d arrays of equal length")
        if ts.size and np.any(np.diff(ts) < 0):
            raise ConfigurationError("timestamps must be non-decreasing")
        if ch.size and (ch.min() < 1 or ch.max() > self.channel_count):
            raise ConfigurationError(f"channel ids must lie in 1..{self.channel_count}")
        ch.setflags(write=False)
        ts.setflags(write=False)
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "timestamps", ts)

    def __len__(self):
        return int(self.timestamps.size)

    def channel_times(self, channel: int) -> np.ndarray:
        if channel not in self._cache:
            self._cache[channel] = self.timestamps[self.channels == channel]
        return self._cache[channel]

    def counts(self) -> dict:
        return {c: int(np.count_nonzero(self.channels == c)) for c in range(1, self.channel_count + 1)}

    def __eq__(self, other):
        if not isinstance(other, TimeTagStream):
            return NotImplemented
        return (
            self.clock_rate == other.clock_rate
            and self.channel_count == other.channel_count
            and np.array_equal(self.channels, other.channels)
            and np.array_equal(self.timestamps, other.timestamps)
        )

    __hash__ = None


@dataclass(frozen=True)
class ChannelSpec:
    """Per-cycle click probability and fixed delay of one detector channel."""

    prob: float
    delay_ps: int = 0


@dataclass(frozen=True)
class CoincidenceConfig:
    """Full coincidence ``window`` in ps, per-channel delays, and the cycle offset."""

    window: int = 800
    delays: Mapping[int, int] = field(default_factory=dict)
    cycle_offset: int = 0
    clock_rate: float = CLOCK_RATE_HZ

    def __post_init__(self):
        if not 0 < self.window < clock_period_ps(self.clock_rate):
            raise ConfigurationError("window must be positive and shorter than one clock period")
        object.__setattr__(self, "delays", dict(self.delays))

    def with_offset(self, k: int) -> "CoincidenceConfig":
        return CoincidenceConfig(self.window, self.delays, k, self.clock_rate)

    def offset(self, ch_a: int, ch_b: int) -> int:
        d = self.delays.get(ch_b, 0) - self.delays.get(ch_a, 0)
        return int(round(d + self.cycle_offset * clock_period_ps(self.clock_rate)))


# --------------------------------------------------------------- synthesis


def _cycle_indices(rng, p, n_cycles):
    """Sorted indices of cycles in which a Bernoulli(p) event fires."""
    if p <= 0 or n_cycles <= 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1:
        return np.arange(n_cycles, dtype=np.int64)
    out = []
    pos = -1
    while True:
        remaining = n_cycles - 1 - pos
        m = int(remaining * p + 6.0 * math.sqrt(remaining * p) + 16)
        gaps = rng.geometric(p, size=m).astype(np.int64)
        idx = pos + np.cumsum(gaps)
        cut = np.searchsorted(idx, n_cycles, side="left")
        out.append(idx[:cut])
        if cut < m:
            break
        pos = int(idx[-1])
    return np.concatenate(out)


def synthesize(
    stream_spec: Mapping[int, ChannelSpec],
    duration: float,
    correlations: Optional[Mapping[tuple, float]] = None,
    jitter_fwhm: float = 70.0,
    seed: int = 0,
    clock_rate: float = CLOCK_RATE_HZ,
    dead_time_ps: int = DEFAULT_DEAD_TIME_PS,
    channel_count: int = 4,
) -> TimeTagStream:
    """Draw a tag stream from per-cycle click probabilities.

    ``correlations`` maps a channel pair to its joint per-cycle click
    probability; each channel may appear in at most one pair. Jitter is
    Gaussian with the given FWHM; dead time is then enforced per channel.
    """
    correlations = dict(correlations or {})
    spec = {int(k): v if isinstance(v, ChannelSpec) else ChannelSpec(float(v)) for k, v in stream_spec.items()}
    for ch, s in spec.items():
        if not 1 <= ch <= channel_count:
            raise ConfigurationError(f"channel {ch} outside 1..{channel_count}")
        if not 0.0 <= s.prob <= 1.0:
            raise ConfigurationError(f"channel {ch}: probability {s.prob} outside [0, 1]")
    paired = set()
    for (a, b), pj in correlations.items():
        if a not in spec or b not in spec or a == b:
            raise ConfigurationError(f"correlation {(a, b)} names unknown or identical channels")
        if a in paired or b in paired:
            raise ConfigurationError("each channel may appear in at most one correlated pair")
        pa, pb = spec[a].prob, spec[b].prob
        if not 0.0 <= pj <= min(pa, pb) or pa + pb - pj > 1.0:
            raise ConfigurationError(f"joint probability {pj} inconsistent with marginals {pa}, {pb}")
        paired |= {a, b}
    if duration < 0:
        raise ConfigurationError("duration must be non-negative")
    n_cycles = int(round(duration * clock_rate))
    period = clock_period_ps(clock_rate)
    rng = np.random.default_rng(seed)
    cycles: dict = {}
    for (a, b), pj in sorted(correlations.items()):
        pa, pb = spec[a].prob, spec[b].prob
        q = pa + pb - pj
        idx = _cycle_indices(rng, q, n_cycles)
        u = rng.random(idx.size) * q if q > 0 else np.empty(0)
        # u < pj: both; pj <= u < pa: a only; otherwise b only
        cycles[a] = idx[u < pa]
        cycles[b] = idx[(u < pj) | (u >= pa)]
    for ch in sorted(spec):
        if ch not in cycles:
            cycles[ch] = _cycle_indices(rng, spec[ch].prob, n_cycles)
    sigma = jitter_fwhm * FWHM_TO_SIGMA
    chans, times = [], []
    for ch in sorted(cycles):
        c = cycles[ch]
        t = np.rint(c * period).astype(np.int64) + int(spec[ch].delay_ps)
        if sigma > 0 and t.size:
            t = t + np.rint(rng.normal(0.0, sigma, t.size)).astype(np.int64)
            t.sort()
        if dead_time_ps > 0:
            t = t[_accel.dead_time_mask(t, dead_time_ps)]
        chans.append(np.full(t.size, ch, dtype=np.uint8))
        times.append(t)
    if times:
        ts = np.concatenate(times)
        ch = np.concatenate(chans)
        order = np.argsort(ts, kind="stable")
        ts, ch = ts[order], ch[order]
    else:
        ts, ch = np.empty(0, np.int64), np.empty(0, np.uint8)
    return TimeTagStream(ch, ts, clock_rate, duration, channel_count)


# ---------------------------------------------------------------- counting


def _shard_bounds(a: np.ndarray, shards: int):
    """Split anchor events into contiguous time ranges; each anchor lands in exactly one."""
    if shards <= 1 or a.size == 0:
        return [(0, a.size)]
    edges = np.linspace(a[0], a[-1] + 1, shards + 1)
    cuts = np.searchsorted(a, edges[1:-1], side="left")
    bounds = np.concatenate([[0], cuts, [a.size]])
    return [(int(bounds[k]), int(bounds[k + 1])) for k in range(shards) if bounds[k + 1] > bounds[k]]


def count_coincidences(
    stream: TimeTagStream,
    config: CoincidenceConfig,
    channels: Sequence[int],
    shards: int = 1,
    workers: int = 1,
    use_numba=None,
) -> int:
    """Coincidences between the first channel and the others under ``config``.

    A pair counts when ``|t_b - t_a - offset| <= window / 2``; a triple is a
    coincidence of the first channel with both others. ``shards`` splits the
    anchor channel by time; every anchor belongs to one shard and looks up
    partners in the full streams, so the merged total equals the unsharded one.
    """
    channels = [int(c) for c in channels]
    if len(channels) not in (2, 3) or len(set(channels)) != len(channels):
        raise ConfigurationError("need two or three distinct channels")
    for c in channels:
        if not 1 <= c <= stream.channel_count:
            raise ConfigurationError(f"channel {c} not in stream")
    half = int(config.window) // 2
    a = stream.channel_times(channels[0])
    others = [stream.channel_times(c) for c in channels[1:]]
    offs = [config.offset(channels[0], c) for c in channels[1:]]

    def job(bounds):
        lo, hi = bounds
        part = a[lo:hi]
        if len(others) == 1:
            return _accel.pair_count(part, others[0], offs[0], half, use_numba)
        return _accel.triple_count(part, others[0], others[1], offs[0], offs[1], half, use_numba)

    bounds = _shard_bounds(a, shards)
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return int(sum(ex.map(job, bounds)))
    return int(sum(job(b) for b in bounds))


def count_accidentals(stream, config, channels, **kw) -> float:
    """Mean of the counts at cycle offsets +1 and -1."""
    up = count_coincidences(stream, config.with_offset(config.cycle_offset + 1), channels, **kw)
    down = count_coincidences(stream, config.with_offset(config.cycle_offset - 1), channels, **kw)
    return 0.5 * (up + down)


# --------------------------------------------------------------------- IO


def write_binary(stream: TimeTagStream, dest) -> None:
    rec = np.empty(len(stream), dtype=_RECORD)
    rec["channel"] = stream.channels
    rec["timestamp"] = stream.timestamps.astype(np.uint64)
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, int(round(stream.clock_rate)), stream.channel_count)
    if isinstance(dest, (str, Path)):
        with open(dest, "wb") as fh:
            fh.write(header)
            fh.write(rec.tobytes())
    else:
        dest.write(header)
        dest.write(rec.tobytes())


def read_binary(src, duration: Optional[float] = None) -> TimeTagStream:
    if isinstance(src, (str, Path)):
        data = Path(src).read_bytes()
    elif isinstance(src, (bytes, bytearray)):
        data = bytes(src)
    else:
        data = src.read()
    if len(data) < _HEADER.size:
        raise FormatError("file shorter than the stream header")
    magic, version, clock, nch = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported stream version {version}")
    body = data[_HEADER.size:]
    if len(body) % _RECORD.itemsize:
        raise FormatError("truncated record at end of stream")
    rec = np.frombuffer(body, dtype=_RECORD)
    ts = rec["timestamp"].astype(np.int64)
    if duration is None:
        duration = _implied_duration(ts, clock)
    return TimeTagStream(rec["channel"].copy(), ts, float(clock), duration, int(nch))


def _implied_duration(ts, clock):
    if ts.size == 0:
        return 0.0
    return math.ceil((int(ts[-1]) + 1) / clock_period_ps(clock)) / clock


def write_csv(stream: TimeTagStream, dest) -> None:
    buf = io.StringIO()
    buf.write(f"# clock_rate_hz={int(round(stream.clock_rate))} channel_count={stream.channel_count}\n")
    buf.write("channel,timestamp_ps\n")
    np.savetxt(buf, np.column_stack([stream.channels.astype(np.int64), stream.timestamps]), fmt="%d", delimiter=",")
    text = buf.getvalue()
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text)
    else:
        dest.write(text)


def read_csv(src, clock_rate: float = CLOCK_RATE_HZ, channel_count: int = 4, duration=None) -> TimeTagStream:
    text = Path(src).read_text() if isinstance(src, (str, Path)) else src.read()
    lines = text.splitlines()
    chans, times = [], []
    for lineno, line in enumerate(lines, 1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            for tok in s[1:].split():
                k, _, v = tok.partition("=")
                if k == "clock_rate_hz":
                    clock_rate = float(v)
                elif k == "channel_count":
                    channel_count = int(v)
            continue
        if s.replace(" ", "") == "channel,timestamp_ps":
            continue
        parts = s.split(",")
        try:
            if len(parts) != 2:
                raise ValueError
            chans.append(int(parts[0]))
            times.append(int(parts[1]))
        except ValueError:
            raise FormatError(f"line {lineno}: expected 'channel,timestamp_ps', got {line!r}") from None
    ts = np.asarray(times, dtype=np.int64)
    if duration is None:
        duration = _implied_duration(ts, clock_rate)
    return TimeTagStream(np.asarray(chans, dtype=np.uint8), ts, clock_rate, duration, channel_count)


# ---------------------------------------------------------- pair statistics


class PairStats(NamedTuple):
    mu_B: float
    mu_B_err: float
    eta_s: float
    eta_s_err: float
    eta_i: float
    eta_i_err: float


def _ratio(num, den, num_err, den_err):
    r = num / den
    rel2 = (num_err / num) ** 2 if num > 0 else 0.0
    rel2 += (den_err / den) ** 2
    return r, abs(r) * math.sqrt(rel2)


def estimate_pair_stats(
    singles_s: float,
    singles_i: float,
    coincidences: float,
    accidentals: float,
    errors: Optional[Mapping[str, float]] = None,
) -> PairStats:
    """Pair-source mean photon number and channel efficiencies from count totals.

    ``mu_B = accidentals / coincidences``; ``eta_s = coincidences / singles_i``;
    ``eta_i = coincidences / singles_s``. Uncertainties propagate Poisson errors
    ``sqrt(N)`` unless ``errors`` supplies explicit ones under the keys
    ``singles_s``, ``singles_i``, ``coincidences``, ``accidentals``.
    """
    vals = {"singles_s": singles_s, "singles_i": singles_i, "coincidences": coincidences, "accidentals": accidentals}
    for k, v in vals.items():
        if not math.isfinite(v) or v < 0:
            raise ConfigurationError(f"{k} must be a non-negative count, got {v}")
    if coincidences <= 0:
        raise DegenerateDataError("no coincidences: pair statistics undefined")
    err = {k: math.sqrt(v) for k, v in vals.items()}
    err.update(errors or {})
    mu, mu_e = _ratio(accidentals, coincidences, err["accidentals"], err["coincidences"])
    if singles_i > 0:
        es, es_e = _ratio(coincidences, singles_i, err["coincidences"], err["singles_i"])
    else:
        raise DegenerateDataError("idler singles are zero")
    if singles_s > 0:
        ei, ei_e = _ratio(coincidences, singles_s, err["coincidences"], err["singles_s"])
    else:
        raise DegenerateDataError("signal singles are zero")
    return PairStats(mu, mu_e, es, es_e, ei, ei_e)


def pair_stats_from_stream(stream, config, signal: int, idler: int, **kw) -> PairStats:
    """Count singles, true and accidental coincidences, then estimate."""
    c = count_coincidences(stream, config, (signal, idler), **kw)
    acc = count_accidentals(stream, config, (signal, idler), **kw)
    return estimate_pair_stats(len(stream.channel_times(signal)), len(stream.channel_times(idler)), c, acc)


def pair_source_probabilities(mu_B: float, eta_s: float, eta_i: float, dark_prob: float = 0.0):
    """Per-cycle click probabilities ``(p_s, p_i, p_si)`` of a lossy pair source."""
    from .circuit import ClickPattern, Detector, Loss, OpticalCircuit, TMSV
    from .gaussian import pattern_probabilities, run_circuit

    c = OpticalCircuit(
        2,
        [TMSV(0, 1, mu_B), Loss(0, eta_s), Loss(1, eta_i)],
        {"s": Detector({0}, 1.0, dark_prob), "i": Detector({1}, 1.0, dark_prob)},
    )
    pats = [ClickPattern({"s"}), ClickPattern({"i"}), ClickPattern({"s", "i"})]
    return tuple(float(p) for p in pattern_probabilities(run_circuit(c, 30), c, pats))


def synthesize_pair_source(
    mu_B: float,
    eta_s: float,
    eta_i: float,
    duration: float,
    seed: int = 0,
    dark_prob: float = 0.0,
    signal: int = 3,
    idler: int = 1,
    jitter_fwhm: float = 70.0,
    clock_rate: float = CLOCK_RATE_HZ,
    **kw,
) -> TimeTagStream:
    ps, pi, psi = pair_source_probabilities(mu_B, eta_s, eta_i, dark_prob)
    spec = {signal: ChannelSpec(ps), idler: ChannelSpec(pi)}
    return synthesize(spec, duration, {(signal, idler): psi}, jitter_fwhm, seed, clock_rate, **kw)
