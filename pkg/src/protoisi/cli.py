"""Command-line entry point: ``protoisi <subcommand> [flags]``.

Every run writes its outputs plus ``manifest.json`` (argv, every resolved flag,
library versions, output digests) into ``--out``. Exit status: 0 success,
1 domain error, 2 usage error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import time
from fractions import Fraction
from importlib import metadata
from pathlib import Path

from . import channel as ch
from .codec import CodecError, DecodeConfig
from .lifting import LiftingError, girth_of, lift, parse_qc, serialize_qc, to_alist, to_parity_matrix
from .pexit import DEFAULT_IA_GRID, ExitSurface, PexitError, measure_detector_exit, surface_span, threshold_search
from .protograph import ProtographError, load_code, rate_of, serialize_protomatrix
from .search import SearchError, SearchSpec, search_base_rate_half, search_nested_step, search_rc_step
from .simulator import SimError, SimPlan, run_sweep

DOMAIN_ERRORS = (ch.ChannelError, ProtographError, PexitError, SearchError, LiftingError, CodecError,
                 SimError, OSError)


class UsageError(Exception):
    pass


# --- flag parsing ------------------------------------------------------------------

def parse_grid(text: str) -> list:
    """``a:b:step`` (inclusive) or a comma-separated list."""
    try:
        if ":" in text:
            a, b, s = (float(t) for t in text.split(":"))
            if s <= 0 or b < a:
                raise ValueError
            n = int(round((b - a) / s))
            return [round(a + i * s, 10) for i in range(n + 1) if a + i * s <= b + 1e-9]
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"bad grid {text!r}: expected a:b:step or a comma-separated list") from None
    if not vals:
        raise UsageError(f"empty grid {text!r}")
    return vals


def _rate(text):
    try:
        r = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"bad rate {text!r}") from None
    if not 0 < r < 1:
        raise argparse.ArgumentTypeError("rate must lie in (0, 1)")
    return r


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="protoisi", description="Protograph LDPC codes for ISI channels.")
    sub = ap.add_subparsers(dest="cmd", metavar="subcommand")

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
        p.add_argument("--out", default="out", help="output directory (default ./out)")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                       help="worker processes (default: available cores)")
        return p

    p = add("capacity", "Eb/N0 at which the i.u.d. rate equals --rate")
    p.add_argument("--channel", required=True)
    p.add_argument("--rate", type=_rate, required=True)
    p.add_argument("--resolution", type=float, default=0.05)
    p.add_argument("--ebno", help="also write an SIR sweep (sir.csv) over this grid")
    p.add_argument("--symbols", type=int, default=200_000, help="samples per sweep point")

    p = add("exit-table", "Monte-Carlo BCJR transfer surface")
    p.add_argument("--channel", required=True)
    p.add_argument("--ebno", default="-4:6:0.25", help="surface Eb/N0 grid (Es/N0-referenced)")
    p.add_argument("--ia", default="0:1:0.05", help="a-priori MI grid")
    p.add_argument("--symbols", type=int, default=200_000)

    def surface_flags(p):
        p.add_argument("--channel", required=True)
        p.add_argument("--surface", help="surface CSV from exit-table (measured with --symbols if omitted)")
        p.add_argument("--symbols", type=int, default=200_000)
        p.add_argument("--resolution", type=float, default=0.05)

    p = add("threshold", "PEXIT threshold of a code")
    p.add_argument("--code", required=True)
    surface_flags(p)
    p.add_argument("--lo", type=float, default=-1.0)
    p.add_argument("--hi", type=float, default=8.0)

    p = add("search-base", "exhaustive rate-1/2 base protograph search")
    surface_flags(p)
    p.add_argument("--coarse-surface", help="surface for the 0.5-dB prefilter (default: --surface)")
    p.add_argument("--keep-fraction", type=float, default=0.05)

    p = add("extend-nested", "best new variable-node columns for a nested family")
    p.add_argument("--code", required=True)
    surface_flags(p)
    p.add_argument("--cols", type=int, default=3)

    p = add("extend-rc", "hill-climbing search for one rate-compatible row")
    p.add_argument("--code", required=True)
    surface_flags(p)
    p.add_argument("--budget", type=int, default=200)

    p = add("lift", "two-stage quasi-cyclic lift")
    p.add_argument("--code", required=True)
    p.add_argument("--n1", type=int, default=4)
    p.add_argument("--n2", type=int, default=100)
    p.add_argument("--alist", action="store_true", help="also export the expanded matrix as alist")

    p = add("girth", "girth and short-cycle counts of a lifted code")
    p.add_argument("--code", required=True, help="builtin, .pm (lifted with --n1/--n2) or .qc")
    p.add_argument("--n1", type=int, default=4)
    p.add_argument("--n2", type=int, default=100)

    p = add("simulate", "FER/BER sweep of the turbo receiver")
    p.add_argument("--code")
    p.add_argument("--channel")
    p.add_argument("--ebno", help="Eb/N0 points, a:b:step or list")
    p.add_argument("--plan", help="plan JSON; replaces the code/channel/stop-rule flags")
    p.add_argument("--n1", type=int, default=4)
    p.add_argument("--n2", type=int, default=100)
    p.add_argument("--min-errors", type=int, default=100)
    p.add_argument("--max-frames", type=int, default=1_000_000)
    p.add_argument("--outer-iters", type=int, default=10)
    p.add_argument("--bp-iters", type=int, default=20)
    p.add_argument("--fer-floor", type=float, default=0.0)
    p.add_argument("--long", action="store_true", help="16k-payload lifting profile")
    return ap


# --- helpers -------------------------------------------------------------------------

def _versions():
    out = {"python": platform.python_version()}
    for name in ("protoisi", "numpy", "scipy", "numba"):
        try:
            out[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            out[name] = "unknown"
    return out


class Run:
    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []
        self.t0 = time.time()

    def write(self, name, text):
        path = self.out / name
        path.write_text(text)
        self.files.append(path)
        return path

    def adopt(self, path):
        self.files.append(Path(path))

    def finish(self, result=None):
        flags = {k: (str(v) if isinstance(v, Fraction) else v) for k, v in vars(self.args).items()}
        man = {"argv": self.argv, "flags": flags, "versions": _versions(), "result": result,
               "runtime_s": round(time.time() - self.t0, 3),
               "outputs": {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in self.files}}
        (self.out / "manifest.json").write_text(json.dumps(man, indent=2, default=str) + "\n")


def _surface(args, run):
    h = ch.parse_channel(args.channel)
    if args.surface:
        s = ExitSurface.load(args.surface)
        if s.channel != h.name:
            raise PexitError(f"surface {args.surface} is for channel {s.channel!r}, not {h.name!r}")
        return s
    grid = parse_grid("-4:6:0.25")
    s = measure_detector_exit(h, grid, DEFAULT_IA_GRID, args.symbols, args.seed, 1.0, args.workers)
    path = run.out / f"surface_{h.name}.csv"
    s.save(path)
    run.adopt(path)
    run.adopt(path.with_suffix(".json"))
    return s


# --- subcommands -----------------------------------------------------------------------

def cmd_capacity(args, run):
    h = ch.parse_channel(args.channel)
    lim = ch.ebno_limit(h, args.rate, resolution=args.resolution, seed=args.seed)
    run.write("capacity.json", json.dumps({"channel": h.name, "rate": str(args.rate), "ebno_db": lim}) + "\n")
    if args.ebno:
        run.write("sir.csv", ch.sir_sweep_csv(h, parse_grid(args.ebno), args.rate, args.symbols, args.seed))
    print(f"{lim:.2f}")
    return {"ebno_db": lim}


def cmd_exit_table(args, run):
    h = ch.parse_channel(args.channel)
    s = measure_detector_exit(h, parse_grid(args.ebno), parse_grid(args.ia), args.symbols, args.seed, 1.0,
                              args.workers)
    path = run.out / f"surface_{h.name}.csv"
    s.save(path)
    run.adopt(path)
    run.adopt(path.with_suffix(".json"))
    print(path)
    return {"surface": str(path)}


def cmd_threshold(args, run):
    p = load_code(args.code)
    s = _surface(args, run)
    lo_s, hi_s = surface_span(s, rate_of(p))
    lo, hi = max(args.lo, lo_s), min(args.hi, hi_s)
    th = threshold_search(p, s, lo, hi, args.resolution)
    run.write("threshold.json", json.dumps({"code": args.code, "channel": args.channel, "rate": str(rate_of(p)),
                                            "bracket": [lo, hi], "threshold_db": th}) + "\n")
    run.write("threshold.csv", f"code,channel,threshold_db\n{args.code},{args.channel},{th!r}\n")
    print(f"{th:.2f}")
    return {"threshold_db": th}


def _spec(args):
    return SearchSpec(resolution=args.resolution, workers=args.workers, seed=args.seed,
                      **({"keep_fraction": args.keep_fraction} if hasattr(args, "keep_fraction") else {}))


def cmd_search_base(args, run):
    s = _surface(args, run)
    coarse = ExitSurface.load(args.coarse_surface) if args.coarse_surface else None
    res = search_base_rate_half(_spec(args), s, coarse)
    run.write("search_base.json", res.to_json() + "\n")
    run.write("best.pm", serialize_protomatrix(res.best[0]))
    print(f"{res.best[1]:.2f}")
    return {"threshold_db": res.best[1]}


def cmd_extend_nested(args, run):
    parent = load_code(args.code)
    s = _surface(args, run)
    ext, th, res = search_nested_step(parent, s, args.cols, _spec(args))
    run.write("extend_nested.json", res.to_json() + "\n")
    run.write("extended.pm", serialize_protomatrix(res.best[0]))
    print(f"{th:.2f}")
    return {"threshold_db": th, "columns": ext.as_array().tolist()}


def cmd_extend_rc(args, run):
    from .protograph import rc_extend

    parent = load_code(args.code)
    s = _surface(args, run)
    ext, th, trace = search_rc_step(parent, s, args.budget, args.seed, spec=_spec(args))
    child = rc_extend(parent, ext)
    run.write("extend_rc.json", json.dumps({
        "seed": args.seed, "budget": args.budget, "candidates_evaluated": len(trace),
        "row": list(ext.a_rows[0]), "threshold_db": th, "best_pm": serialize_protomatrix(child),
        "trace": [{"row": list(r), "threshold_db": t} for r, t in trace]}, indent=2) + "\n")
    run.write("extended.pm", serialize_protomatrix(child))
    print(f"{th:.2f}")
    return {"threshold_db": th}


def _qc(args):
    if args.code.endswith(".qc"):
        return parse_qc(Path(args.code).read_text())
    return lift(load_code(args.code), args.n1, args.n2, args.seed)


def cmd_lift(args, run):
    q = _qc(args)
    run.write("code.qc", serialize_qc(q))
    if args.alist:
        run.write("code.alist", to_alist(to_parity_matrix(q)))
    print(f"n={q.n} k={q.k}")
    return {"n": q.n, "k": q.k}


def cmd_girth(args, run):
    q = _qc(args)
    g = girth_of(q)
    rep = {"girth": None if g.girth >= 10**9 else g.girth, "cycles4": g.cycles4, "cycles6": g.cycles6}
    run.write("girth.json", json.dumps(rep) + "\n")
    print(rep["girth"] if rep["girth"] is not None else "inf")
    return rep


def cmd_simulate(args, run):
    if args.plan:
        plan = SimPlan.from_json(Path(args.plan).read_text())
    else:
        if not (args.code and args.channel and args.ebno):
            raise UsageError("simulate needs --plan or all of --code, --channel, --ebno")
        plan = SimPlan(args.code, args.channel, tuple(parse_grid(args.ebno)), args.n1, args.n2, args.seed,
                       args.min_errors, args.max_frames, args.seed,
                       DecodeConfig(args.outer_iters, args.bp_iters), args.fer_floor,
                       profile="long" if args.long else "desk")
    res = run_sweep(plan, args.workers, progress=lambda r: print(r.csv_row(), file=sys.stderr))
    run.write("sim.csv", res.to_csv())
    run.write("plan.json", plan.to_json() + "\n")
    sys.stdout.write(res.to_csv())
    return {"monotonicity_flags": res.monotonicity_flags,
            "truncated": [p.ebno_db for p in res.points if p.truncated]}


COMMANDS = {"capacity": cmd_capacity, "exit-table": cmd_exit_table, "threshold": cmd_threshold,
            "search-base": cmd_search_base, "extend-nested": cmd_extend_nested, "extend-rc": cmd_extend_rc,
            "lift": cmd_lift, "girth": cmd_girth, "simulate": cmd_simulate}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ap = build_parser()
    if not argv:
        ap.print_usage(sys.stderr)
        return 2
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    if args.cmd is None:
        ap.print_usage(sys.stderr)
        return 2
    if getattr(args, "workers", 1) < 1:
        print("protoisi: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        run = Run(args, argv)
        result = COMMANDS[args.cmd](args, run)
        run.finish(result)
    except UsageError as exc:
        print(f"protoisi {args.cmd}: {exc}", file=sys.stderr)
        return 2
    except DOMAIN_ERRORS as exc:
        print(f"protoisi {args.cmd}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
