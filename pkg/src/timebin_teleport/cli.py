"""``tbqt`` command line: simulate, reproduce, tomography, decoy, tags, selfcheck.

Exit status is 0 on success, 1 on a runtime failure and 2 on a usage or
input error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigurationError, FormatError

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: {message}")


class _UsageError(Exception):
    pass


def _emit(text: str, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


# ---------------------------------------------------------------- commands


def cmd_simulate(args) -> int:
    from .config import build_config
    from .recipes import simulate, simulate_meta
    from .report import csv_text

    cfg = build_config(
        files=args.config or (),
        preset=args.preset,
        scenario=args.scenario,
        overrides=args.set or (),
        sweeps=args.sweep or (),
        seed=args.seed,
        output=args.out,
        oracle_check=True if args.oracle_check else None,
    )
    cols, rows = simulate(cfg, workers=args.workers)
    notes = [f"column {c}" for c in cols]
    _emit(csv_text(cols, rows, simulate_meta(cfg), notes), cfg.output)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    from .config import parse_params
    from .recipes import default_recipe_params, reproduce

    params = default_recipe_params(args.id)
    if args.set:
        items = []
        for it in args.set:
            if "=" not in it:
                raise ConfigurationError(f"--set {it!r} must look like key=value")
            k, v = it.split("=", 1)
            items.append((k.strip(), v.strip()))
        params = params.replace(**parse_params(items, lambda k: "--set: "))
    for p in reproduce(args.id, args.out, params, args.seed):
        print(p)
    return EXIT_OK


def cmd_tomography(args) -> int:
    from .inference.resample import poisson_resample_detailed
    from .inference.tomography import TomographyData, qst_mle, read_counts_csv, state_fidelity
    from .report import csv_text

    data = read_counts_csv(args.counts)
    rho = qst_mle(data)
    f = state_fidelity(rho, args.target)

    def est(arr):
        return state_fidelity(qst_mle(TomographyData.from_array(arr, data.calibration)), args.target)

    res = poisson_resample_detailed(est, data.as_array(), args.trials, args.seed, args.workers)
    m = rho.matrix
    rows = [[f"rho_{i}{j}", float(m[i, j].real), float(m[i, j].imag)] for i in range(2) for j in range(2)]
    meta = {
        "config_hash": _file_hash(args.counts),
        "seed": args.seed,
        "recipe": "tomography",
        "target": args.target,
        "fidelity": repr(f),
        "fidelity_std": repr(res.std),
        "resample_trials": f"{res.n_ok} ok, {res.n_failed} failed",
    }
    _emit(csv_text(["element", "real", "imag"], rows, meta), args.out)
    return EXIT_OK


def cmd_decoy(args) -> int:
    from .inference.decoy import decoy_bound, read_decoy_csv
    from .report import csv_text

    data = read_decoy_csv(args.data)
    b = decoy_bound(data, e0=args.e0)
    rows = [[s, sb.fidelity, sb.yield_lower, sb.error_upper, sb.mu, sb.nu] for s, sb in b.per_state.items()]
    meta = {"config_hash": _file_hash(args.data), "seed": "none", "recipe": "decoy", "e0": args.e0}
    if b.average is not None:
        meta["F_bound_avg"] = repr(b.average)
    _emit(csv_text(["state", "F_bound", "Y1_lower", "e1_upper", "mu", "nu"], rows, meta), args.out)
    return EXIT_OK


def _read_stream(path):
    from .tags import read_binary, read_csv

    p = Path(path)
    return read_csv(p) if p.suffix.lower() == ".csv" else read_binary(p)


def cmd_tags_synthesize(args) -> int:
    from .tags import synthesize_pair_source, write_binary, write_csv

    st = synthesize_pair_source(
        args.mu_B, args.eta_s, args.eta_i, args.duration, seed=args.seed, dark_prob=args.dark_prob,
        signal=args.signal, idler=args.idler, jitter_fwhm=args.jitter,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if out.suffix.lower() == ".csv":
        write_csv(st, out)
    else:
        write_binary(st, out)
    print(f"{out}: {len(st)} tags, {st.duration!r} s")
    return EXIT_OK


def _parse_delays(items):
    out = {}
    for it in items or ():
        if "=" not in it:
            raise ConfigurationError(f"--delay {it!r} must look like CHANNEL=PS")
        k, v = it.split("=", 1)
        try:
            out[int(k)] = int(v)
        except ValueError:
            raise ConfigurationError(f"--delay {it!r} must look like CHANNEL=PS") from None
    return out


def cmd_tags_count(args) -> int:
    from .report import csv_text
    from .tags import CoincidenceConfig, count_accidentals, count_coincidences, estimate_pair_stats

    st = _read_stream(args.stream)
    cfg = CoincidenceConfig(args.window, _parse_delays(args.delay), args.cycle_offset, st.clock_rate)
    kw = dict(shards=args.shards, workers=args.workers, use_numba=False if args.no_numba else None)
    c = count_coincidences(st, cfg, args.channels, **kw)
    acc = count_accidentals(st, cfg, args.channels, **kw)
    rows = [["coincidences", float(c)], ["accidentals", float(acc)]]
    for ch in args.channels:
        rows.append([f"singles_{ch}", float(len(st.channel_times(ch)))])
    if len(args.channels) == 2:
        s, i = args.channels
        ps = estimate_pair_stats(len(st.channel_times(s)), len(st.channel_times(i)), c, acc)
        rows += [["mu_B", ps.mu_B], ["mu_B_err", ps.mu_B_err], ["eta_s", ps.eta_s], ["eta_s_err", ps.eta_s_err],
                 ["eta_i", ps.eta_i], ["eta_i_err", ps.eta_i_err]]
    meta = {"config_hash": _file_hash(args.stream), "seed": "none", "recipe": "tags-count",
            "channels": " ".join(map(str, args.channels)), "window_ps": args.window}
    _emit(csv_text(["quantity", "value"], rows, meta), args.out)
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    from .selfcheck import run_selfcheck

    ok = True
    for r in run_selfcheck():
        status = "PASS" if r.passed else "FAIL"
        ok &= r.passed
        print(f"{status} {r.name}: max deviation {r.max_dev:.3e} (threshold {r.threshold:.1e}; {r.detail})")
    print("selfcheck: " + ("PASS" if ok else "FAIL"))
    return EXIT_OK if ok else EXIT_RUNTIME


def _file_hash(path):
    import hashlib

    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]
    except OSError:
        return "unreadable"


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    from .config import SCENARIOS
    from .recipes import RECIPES

    p = _Parser(prog="tbqt", description="Time-bin teleportation model and analysis tools.")
    p.add_argument("--version", action="version", version=f"tbqt {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="evaluate a scenario over parameter sweeps")
    s.add_argument("--config", action="append", help="INI file; may repeat, later files win")
    s.add_argument("--preset", choices=("paper",))
    s.add_argument("--scenario", choices=SCENARIOS)
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one parameter")
    s.add_argument("--sweep", action="append", metavar="KEY=GRID", help="a:b:N, a:b:logN or a,b,c")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="output CSV (default stdout)")
    s.add_argument("--oracle-check", action="store_true", help="add an independent-route deviation column")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("reproduce", help="regenerate a figure or table dataset")
    s.add_argument("id", choices=RECIPES)
    s.add_argument("--out", default="reproduced", help="output directory")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--set", action="append", metavar="KEY=VALUE")
    s.set_defaults(func=cmd_reproduce)

    s = sub.add_parser("tomography", help="maximum-likelihood state from basis,outcome,count CSV")
    s.add_argument("counts")
    s.add_argument("--target", default="+", choices=("e", "l", "+", "-", "+i", "-i"))
    s.add_argument("--trials", type=int, default=200, help="Poisson resamples for the fidelity error")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_tomography)

    s = sub.add_parser("decoy", help="single-photon fidelity bounds from state,mu,gain,fidelity CSV")
    s.add_argument("data")
    s.add_argument("--e0", type=float, default=0.5, help="error rate assigned to vacuum events")
    s.add_argument("--out")
    s.set_defaults(func=cmd_decoy)

    t = sub.add_parser("tags", help="synthesize or count time-tag streams")
    tsub = t.add_subparsers(dest="tags_command", required=True, parser_class=_Parser)
    s = tsub.add_parser("synthesize", help="write a synthetic pair-source stream (.ttag binary or .csv)")
    s.add_argument("--out", required=True)
    s.add_argument("--mu-B", dest="mu_B", type=float, default=8.0e-3)
    s.add_argument("--eta-s", type=float, default=4.5e-3)
    s.add_argument("--eta-i", type=float, default=1.2e-2)
    s.add_argument("--duration", type=float, default=1.0, help="seconds")
    s.add_argument("--dark-prob", type=float, default=0.0)
    s.add_argument("--jitter", type=float, default=70.0, help="FWHM in ps")
    s.add_argument("--signal", type=int, default=3)
    s.add_argument("--idler", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_tags_synthesize)
    s = tsub.add_parser("count", help="count coincidences and accidentals")
    s.add_argument("stream")
    s.add_argument("--channels", type=int, nargs="+", default=[3, 1])
    s.add_argument("--window", type=int, default=800, help="full window in ps")
    s.add_argument("--delay", action="append", metavar="CH=PS")
    s.add_argument("--cycle-offset", type=int, default=0)
    s.add_argument("--shards", type=int, default=1)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--no-numba", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_tags_count)

    s = sub.add_parser("selfcheck", help="run the equivalence suites")
    s.set_defaults(func=cmd_selfcheck)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "trials", 100) < 100:
            raise ConfigurationError("--trials must be at least 100")
        return args.func(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ConfigurationError, FormatError) as exc:
        print(f"tbqt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, RuntimeError, ValueError, OSError) as exc:
        print(f"tbqt: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
