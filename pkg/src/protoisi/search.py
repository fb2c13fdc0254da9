"""Protograph searches driven by detector-coupled PEXIT thresholds.

* ``search_base_rate_half`` - exhaustive search over the 3x6 template with a
  degree-1 and a degree-2 variable node fixed in the first two columns;
* ``search_nested_step`` - exhaustive search for new variable-node columns;
* ``search_rc_step`` - seeded hill-climbing for one new check row (with its
  own degree-1 variable node).

Candidates whose thresholds tie are ordered by total edge count, then
lexicographically by their entries.
"""
from __future__ import annotations

import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .pexit import ExitSurface, pexit_converges, surface_span
from .protograph import (ExtensionColumns, Protomatrix, ProtographError, RcExtension, nest_extend,
                         rate_of, rc_extend, serialize_protomatrix, validate_linear_growth)
from .rng import stream


class SearchError(ValueError):
    pass


@dataclass(frozen=True)
class SearchSpec:
    """Search space description; ``constraints`` are (rows, cols, minimum) triples
    over 0-based protomatrix indices."""

    x_values: tuple = (0, 1, 2)
    y_values: tuple = (1, 2, 3, 4)
    protected_rows: tuple = (1, 2)
    min_protected_sum: int = 3
    lo_db: float = -0.5
    hi_db: float = 7.5
    resolution: float = 0.05
    coarse_resolution: float = 0.5
    keep_fraction: float = 0.05
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.x_values or not self.y_values:
            raise SearchError("value sets must be non-empty")
        if not 0 < self.keep_fraction <= 1:
            raise SearchError("keep_fraction must lie in (0, 1]")


# --- threshold evaluation -------------------------------------------------------

def threshold(p: Protomatrix, surface: ExitSurface, lo_db, hi_db, resolution) -> float:
    """Bisection threshold clipped to the bracket: ``inf`` if PEXIT fails at
    ``hi_db``, ``lo_db`` if it already converges there."""
    lo_s, hi_s = surface_span(surface, rate_of(p))
    lo, hi = max(lo_db, lo_s), min(hi_db, hi_s)
    conv = lambda e: pexit_converges(p, surface, e).converged
    if not conv(hi):
        return math.inf
    if conv(lo):
        return lo
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if conv(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _eval_chunk(args):
    mats, surface, lo, hi, res = args
    return [threshold(Protomatrix(m), surface, lo, hi, res) for m in mats]


def evaluate(mats, surface, lo, hi, res, workers=1, chunk=64) -> np.ndarray:
    """Thresholds for a list of entry arrays, reduced in input order."""
    mats = [np.asarray(m) for m in mats]
    jobs = [(mats[i:i + chunk], surface, lo, hi, res) for i in range(0, len(mats), chunk)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_eval_chunk, jobs))
    else:
        parts = [_eval_chunk(j) for j in jobs]
    return np.array([t for part in parts for t in part], dtype=np.float64)


def _rank_key(th, entries):
    return (th, int(entries.sum()), tuple(int(v) for v in entries.ravel()))


@dataclass
class SearchResult:
    candidates: list  # [(Protomatrix, threshold)] ascending by rank key
    feasible: int
    evaluated: int
    seconds: float
    spec: dict = field(default_factory=dict)
    discarded: list = field(default_factory=list)  # prefilter rejects (entries, coarse threshold)

    @property
    def best(self):
        return self.candidates[0]

    def to_json(self) -> str:
        best, th = self.best
        return json.dumps({
            "spec": self.spec, "seed": self.spec.get("seed"), "feasible": self.feasible,
            "candidates_evaluated": self.evaluated, "best_pm": serialize_protomatrix(best),
            "threshold_db": th, "runtime_s": round(self.seconds, 3),
            "top": [{"pm": serialize_protomatrix(p), "threshold_db": t} for p, t in self.candidates[:20]],
        }, indent=2)


# --- base rate-1/2 search ---------------------------------------------------------

def _constrained_columns(values, rows, protected, minimum):
    """All columns over ``rows`` rows with entries from ``values`` whose
    protected-row sum is at least ``minimum``."""
    out = []
    for col in itertools.product(values, repeat=rows):
        if sum(col[r] for r in protected) >= minimum:
            out.append(col)
    return out


def base_template_candidates(spec: SearchSpec = SearchSpec()):
    """Enumerate the 3x6 template: columns (1,0,0), (0,1,1), three x-columns
    and one y-column; rows 2 and 3 carry the linear-growth constraint."""
    xcols = _constrained_columns(spec.x_values, 3, spec.protected_rows, spec.min_protected_sum)
    ycols = _constrained_columns(spec.y_values, 3, spec.protected_rows, spec.min_protected_sum)
    fixed = [(1, 0, 0), (0, 1, 1)]
    for a, b, c in itertools.product(xcols, repeat=3):
        for y in ycols:
            yield np.array(fixed + [a, b, c, y], dtype=np.int64).T


def search_base_rate_half(spec: SearchSpec, surface: ExitSurface, coarse_surface: ExitSurface | None = None,
                          progress=None) -> SearchResult:
    """Two-stage search: coarse bisection on every distinct candidate, then full
    resolution on the best ``keep_fraction`` (whole tie groups at the cut)."""
    t0 = time.time()
    coarse = coarse_surface if coarse_surface is not None else surface
    for s in (surface, coarse):
        lo_s, hi_s = surface_span(s, 0.5)
        if spec.lo_db < lo_s - 1e-9 or spec.hi_db > hi_s + 1e-9:
            raise SearchError(f"surface covers [{lo_s:.2f}, {hi_s:.2f}] dB at rate 1/2, "
                              f"bracket is [{spec.lo_db}, {spec.hi_db}]")
    cands = list(base_template_candidates(spec))
    # x-columns are interchangeable: evaluate each multiset once
    keys = [tuple(sorted(map(tuple, m[:, 2:5].T))) + (tuple(m[:, 5]),) for m in cands]
    uniq = {}
    for i, k in enumerate(keys):
        uniq.setdefault(k, i)
    rep = list(uniq.values())
    rough = evaluate([cands[i] for i in rep], coarse, spec.lo_db, spec.hi_db, spec.coarse_resolution,
                     spec.workers)
    rough_of = dict(zip(uniq, rough))
    rough_all = np.array([rough_of[k] for k in keys])
    order = sorted(range(len(cands)), key=lambda i: _rank_key(rough_all[i], cands[i]))
    n_keep = max(1, int(math.ceil(spec.keep_fraction * len(cands))))
    cut = rough_all[order[n_keep - 1]]
    keep = [i for i in order if rough_all[i] <= cut]
    drop = [i for i in order if rough_all[i] > cut]
    kuniq = {}
    for i in keep:
        kuniq.setdefault(keys[i], i)
    fine = evaluate([cands[i] for i in kuniq.values()], surface, spec.lo_db, spec.hi_db,
                    spec.resolution, spec.workers)
    fine_of = dict(zip(kuniq, fine))
    ranked = sorted(keep, key=lambda i: _rank_key(fine_of[keys[i]], cands[i]))
    out = [(Protomatrix(cands[i]), float(fine_of[keys[i]])) for i in ranked]
    return SearchResult(out, len(cands), len(rep) + len(kuniq), time.time() - t0,
                        _spec_dict(spec, surface), [(cands[i], float(rough_all[i])) for i in drop])


def audit_prefilter(result: SearchResult, surface: ExitSurface, spec: SearchSpec, fraction=0.01, seed=0):
    """Full-resolution thresholds for a random sample of prefilter rejects."""
    rng = stream(seed, 3)
    n = max(1, int(round(fraction * len(result.discarded)))) if result.discarded else 0
    idx = sorted(rng.choice(len(result.discarded), size=n, replace=False)) if n else []
    mats = [result.discarded[i][0] for i in idx]
    return evaluate(mats, surface, spec.lo_db, spec.hi_db, spec.resolution, spec.workers)


def _spec_dict(spec, surface):
    # the worker count does not influence results; it lives in the run manifest
    d = {k: (list(v) if isinstance(v, tuple) else v) for k, v in spec.__dict__.items() if k != "workers"}
    d["channel"] = surface.channel
    return d


# --- nested step --------------------------------------------------------------------

def nested_candidates(parent: Protomatrix, n_new_cols=3, values=(0, 1, 2), protected=(1, 2), minimum=3):
    cols = _constrained_columns(values, parent.rows, protected, minimum)
    return list(itertools.product(cols, repeat=n_new_cols))


def search_nested_step(parent: Protomatrix, surface: ExitSurface, n_new_cols=3, spec: SearchSpec = SearchSpec(),
                       protected=None) -> tuple:
    """Best ``n_new_cols`` extension columns; returns ``(ExtensionColumns, threshold, SearchResult)``."""
    protected = tuple(protected) if protected is not None else spec.protected_rows
    cands = nested_candidates(parent, n_new_cols, spec.x_values, protected, spec.min_protected_sum)
    if not cands:
        raise SearchError("empty feasible set")
    t0 = time.time()
    keys = [tuple(sorted(c)) for c in cands]
    uniq = {}
    for i, k in enumerate(keys):
        uniq.setdefault(k, i)
    mats = [nest_extend(parent, ExtensionColumns(parent.rows, cands[i])).entries for i in uniq.values()]
    th = evaluate(mats, surface, spec.lo_db, spec.hi_db, spec.resolution, spec.workers)
    th_of = dict(zip(uniq, th))
    full = [nest_extend(parent, ExtensionColumns(parent.rows, c)) for c in cands]
    ranked = sorted(range(len(cands)), key=lambda i: _rank_key(th_of[keys[i]], full[i].entries))
    res = SearchResult([(full[i], float(th_of[keys[i]])) for i in ranked], len(cands), len(uniq),
                       time.time() - t0, _spec_dict(spec, surface))
    best = ranked[0]
    return ExtensionColumns(parent.rows, cands[best]), float(th_of[keys[best]]), res


# --- rate-compatible step -------------------------------------------------------------

def _row_ok(row, wmin, wmax):
    return wmin <= int(sum(row)) <= wmax


def search_rc_step(parent: Protomatrix, surface: ExitSurface, budget=200, seed=0, values=(0, 1, 2),
                   weight=(5, 12), spec: SearchSpec = SearchSpec(), resolution=0.01) -> tuple:
    """Seeded hill-climbing over one A-row (entries in ``values``, edge count in
    ``weight``); ``budget`` counts threshold evaluations. Returns
    ``(RcExtension, threshold, trace)`` where ``trace`` lists every evaluated
    (row, threshold)."""
    if budget < 10:
        raise SearchError("budget must be at least 10 evaluations")
    wmin, wmax = weight
    V = parent.cols
    rng = stream(seed, 4)
    vmax = max(values)
    cache = {}
    trace = []

    def score(row):
        if row not in cache:
            if len(cache) >= budget:
                return None
            th = threshold(rc_extend(parent, RcExtension((row,))), surface, spec.lo_db, spec.hi_db, resolution)
            cache[row] = th
            trace.append((row, th))
        return cache[row]

    def random_row():
        while True:
            w = int(rng.integers(wmin, wmax + 1))
            row = [0] * V
            for _ in range(w):
                j = int(rng.integers(V))
                if row[j] < vmax:
                    row[j] += 1
            row = tuple(row)
            if _row_ok(row, wmin, wmax):
                return row

    def neighbours(row):
        out = []
        for j in range(V):
            for d in (-1, 1):
                v = row[j] + d
                if v in values:
                    r = row[:j] + (v,) + row[j + 1:]
                    if _row_ok(r, wmin, wmax):
                        out.append(r)
        nz = [j for j in range(V) if row[j]]
        for j in nz:
            for k in range(V):
                if k != j and row[k] + 1 in values:
                    r = list(row)
                    r[j] -= 1
                    r[k] += 1
                    out.append(tuple(r))
        return out

    key = lambda r: (cache[r], sum(r), r)
    best = None
    while len(cache) < budget:
        cur = random_row()
        if score(cur) is None:
            break
        improved = True
        while improved and len(cache) < budget:
            improved = False
            nb = neighbours(cur)
            for i in rng.permutation(len(nb)):
                r = nb[int(i)]
                s = score(r)
                if s is None:
                    break
                if key(r) < key(cur):
                    cur, improved = r, True
                    break
        if best is None or key(cur) < key(best):
            best = cur
    if best is None:
        raise SearchError("no candidate evaluated")
    return RcExtension((best,)), float(cache[best]), trace
