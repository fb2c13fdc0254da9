"""Design pipeline: base search, nested extensions and one rate-compatible row.

Runs the exhaustive rate-1/2 base search over the dicode surface, grows a
nested family three columns at a time up to the requested rate, and adds
rate-compatible rows to the final member by seeded hill climbing.  Each
stage writes its protomatrix and a JSON report into ``--out``.

    python3 scripts/search_pipeline.py --surface out/table/surface_dicode.csv \
        --nested-steps 8 --rc-rows 2 --out out/design
"""
import argparse
import json
from pathlib import Path

from protoisi.pexit import ExitSurface, standard_surface
from protoisi.protograph import rate_of, rc_extend, serialize_protomatrix
from protoisi.search import SearchSpec, search_base_rate_half, search_nested_step, search_rc_step


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--surface", help="standard surface CSV (measured for dicode if omitted)")
    ap.add_argument("--nested-steps", type=int, default=1)
    ap.add_argument("--rc-rows", type=int, default=0)
    ap.add_argument("--rc-budget", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="out/design")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    surface = ExitSurface.load(args.surface) if args.surface else standard_surface("dicode", seed=args.seed,
                                                                                      workers=args.workers)
    spec = SearchSpec(workers=args.workers, seed=args.seed)

    res = search_base_rate_half(spec, surface)
    (out / "base.json").write_text(res.to_json() + "\n")
    code, th = res.best
    print(f"base rate 1/2: {th:.3f} dB after {res.evaluated} fine evaluations ({res.seconds:.0f}s)")
    (out / "stage0.pm").write_text(serialize_protomatrix(code))

    for step in range(1, args.nested_steps + 1):
        _, th, nres = search_nested_step(code, surface, 3, spec)
        code = nres.best[0]
        (out / f"stage{step}.pm").write_text(serialize_protomatrix(code))
        (out / f"stage{step}.json").write_text(nres.to_json() + "\n")
        print(f"nested rate {rate_of(code)}: {th:.3f} dB")

    for row in range(1, args.rc_rows + 1):
        ext, th, trace = search_rc_step(code, surface, args.rc_budget, args.seed + row, spec=spec)
        code = rc_extend(code, ext)
        (out / f"rc{row}.pm").write_text(serialize_protomatrix(code))
        (out / f"rc{row}.json").write_text(json.dumps({"row": list(ext.a_rows[0]), "threshold_db": th,
                                                       "evaluated": len(trace)}) + "\n")
        print(f"rate-compatible rate {rate_of(code)}: {th:.3f} dB")


if __name__ == "__main__":
    main()
