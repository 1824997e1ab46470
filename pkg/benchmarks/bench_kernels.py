"""Time the numba and numpy coincidence kernels on the same synthetic stream.

    python3 benchmarks/bench_kernels.py [--duration 1.0] [--repeat 3]

Both paths must return identical counts; the script exits non-zero otherwise.
"""

import argparse
import sys
import time

import numpy as np

from timebin_teleport import _accel
from timebin_teleport.tags import ChannelSpec, CoincidenceConfig, synthesize, synthesize_pair_source


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--duration", type=float, default=1.0, help="stream length in seconds")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    st = synthesize_pair_source(0.25, 0.25, 0.25, args.duration, seed=1, dead_time_ps=0)
    # a third channel of uncorrelated clicks for the triple kernel
    noise = synthesize({2: ChannelSpec(0.05)}, args.duration, seed=2, dead_time_ps=0)
    cfg = CoincidenceConfig()
    a, b = st.channel_times(3), st.channel_times(1)
    c = noise.channel_times(2)
    off = cfg.offset(3, 1)
    half = cfg.window // 2
    print(f"stream: {len(st) + len(noise):,} tags; numba available: {_accel.HAVE_NUMBA}")

    backends = [False] + ([True] if _accel.HAVE_NUMBA else [])
    kernels = {
        "pair": lambda nb: _accel.pair_count(a, b, off, half, nb),
        "triple": lambda nb: _accel.triple_count(a, b, c, off, cfg.offset(3, 2), half, nb),
        "dead_time": lambda nb: int(_accel.dead_time_mask(a, 50_000, nb).sum()),
    }
    if _accel.HAVE_NUMBA:
        tiny = np.arange(10, dtype=np.int64)
        _accel.pair_count(tiny, tiny, 0, 1, True)
        _accel.triple_count(tiny, tiny, tiny, 0, 0, 1, True)
        _accel.dead_time_mask(tiny, 1, True)

    ok = True
    print(f"{'kernel':<10} {'numpy s':>9} {'numba s':>9} {'speedup':>8}")
    for name, fn in kernels.items():
        res = {nb: best_of(lambda: fn(nb), args.repeat) for nb in backends}
        t_np, v_np = res[False]
        if True in res:
            t_nb, v_nb = res[True]
            ok &= v_nb == v_np
            print(f"{name:<10} {t_np:9.3f} {t_nb:9.3f} {t_np / t_nb:7.1f}x")
        else:
            print(f"{name:<10} {t_np:9.3f} {'-':>9} {'-':>8}")
    if not ok:
        print("numba and numpy results differ", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
