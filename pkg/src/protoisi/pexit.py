"""Detector-coupled protograph EXIT analysis.

The BCJR detector is characterised by a tabulated transfer surface
I_E = T(I_A, SNR), measured by Monte-Carlo. The protograph recursion tracks
one mutual-information value per edge type (i, j) and re-activates the
detector on every iteration.

Surface coordinates: ``ebno_db`` is Eb/N0 referenced to ``surface.rate``.
A code of rate R probed at Eb/N0 = e reads the surface at
e + 10 log10(R / surface.rate), so one surface serves every code rate.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from numba import njit
from scipy.interpolate import PchipInterpolator
from scipy.optimize import isotonic_regression

from .channel import ChannelPoly, NoiseModel, bcjr_detect, parse_channel, transmit
from .jfunc import TABLE_J, TABLE_SIGMA, j_inv
from .protograph import Protomatrix, rate_of
from .rng import stream

MAX_ITER = 1000
EPS = 1e-4
DEFAULT_IA_GRID = np.round(np.arange(0, 21) * 0.05, 10)
_CURVE_POINTS = 2001


class PexitError(ValueError):
    pass


@dataclass
class ExitSurface:
    channel: str
    ebno_grid: np.ndarray
    ia_grid: np.ndarray
    table: np.ndarray  # (len(ebno_grid), len(ia_grid)) -> I_E
    rate: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ebno_grid = np.asarray(self.ebno_grid, dtype=np.float64)
        self.ia_grid = np.asarray(self.ia_grid, dtype=np.float64)
        self.table = np.asarray(self.table, dtype=np.float64)
        if self.table.shape != (len(self.ebno_grid), len(self.ia_grid)):
            raise PexitError("surface table shape does not match its grids")
        self._curves = {}

    def coordinate(self, ebno_db: float, code_rate) -> float:
        return float(ebno_db) + 10.0 * math.log10(float(code_rate) / self.rate)

    def covers(self, coord: float) -> bool:
        return self.ebno_grid[0] - 1e-9 <= coord <= self.ebno_grid[-1] + 1e-9

    def curve(self, coord: float) -> np.ndarray:
        """Detector transfer curve at a surface coordinate, sampled on a uniform
        I_A grid of ``_CURVE_POINTS`` points (linear in dB, PCHIP in I_A)."""
        key = round(coord, 12)
        if key in self._curves:
            return self._curves[key]
        if not self.covers(coord):
            raise PexitError(f"Eb/N0 coordinate {coord:.3f} dB outside surface "
                             f"[{self.ebno_grid[0]}, {self.ebno_grid[-1]}]")
        g = self.ebno_grid
        k = int(np.clip(np.searchsorted(g, coord) - 1, 0, len(g) - 2)) if len(g) > 1 else 0
        if len(g) == 1:
            row = self.table[0]
        else:
            w = (coord - g[k]) / (g[k + 1] - g[k])
            row = (1 - w) * self.table[k] + w * self.table[k + 1]
        fine = np.linspace(0.0, 1.0, _CURVE_POINTS)
        out = np.clip(PchipInterpolator(self.ia_grid, row)(fine), 0.0, 1.0)
        out = np.ascontiguousarray(np.maximum.accumulate(out))
        if len(self._curves) > 4096:
            self._curves.clear()
        self._curves[key] = out
        return out

    def __call__(self, ia, ebno_db, code_rate=None):
        coord = float(ebno_db) if code_rate is None else self.coordinate(ebno_db, code_rate)
        return np.interp(ia, np.linspace(0, 1, _CURVE_POINTS), self.curve(coord))

    # --- persistence: CSV ebno_db,i_a,i_e plus JSON sidecar -------------
    def save(self, path):
        path = Path(path)
        with open(path, "w") as fh:
            fh.write("ebno_db,i_a,i_e\n")
            for a, e in enumerate(self.ebno_grid):
                for b, ia in enumerate(self.ia_grid):
                    fh.write(f"{float(e)!r},{float(ia)!r},{float(self.table[a, b])!r}\n")
        meta = dict(self.meta, channel=self.channel, rate=self.rate)
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        path = Path(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        eb = np.unique(data[:, 0])
        ia = np.unique(data[:, 1])
        if len(data) != len(eb) * len(ia):
            raise PexitError(f"{path}: surface CSV is not a full grid")
        table = np.empty((len(eb), len(ia)))
        table[np.searchsorted(eb, data[:, 0]), np.searchsorted(ia, data[:, 1])] = data[:, 2]
        side = path.with_suffix(".json")
        meta = json.loads(side.read_text()) if side.exists() else {}
        return cls(meta.get("channel", "unknown"), eb, ia, table, float(meta.get("rate", 1.0)), meta)


def mi_from_llr(llr, bits) -> float:
    """Time-average MI estimate 1 - E[log2(1 + exp(-x L))] with x = +-1."""
    x = 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)
    return float(1.0 - np.mean(np.logaddexp(0.0, -x * np.asarray(llr))) / math.log(2.0))


def _measure_cell(args):
    h, ebno, rate, ia, n_symbols, seed, key = args
    rng = stream(seed, *key)
    noise = NoiseModel.from_ebno(ebno, rate)
    bits = rng.integers(0, 2, n_symbols)
    y = transmit(bits, h, noise, rng)
    x = 1.0 - 2.0 * bits
    sa = float(j_inv(ia))
    prior = x * sa * sa / 2.0 + sa * rng.standard_normal(n_symbols)
    ext = bcjr_detect(y, prior, h, noise)
    return mi_from_llr(ext, bits)


def monotone_smooth(table: np.ndarray) -> np.ndarray:
    """Isotonic regression along both axes, finished with a cumulative max
    (which keeps the result nondecreasing in both directions)."""
    t = np.array(table, dtype=np.float64)
    for _ in range(10):
        t = np.vstack([isotonic_regression(r).x for r in t])
        t = np.column_stack([isotonic_regression(c).x for c in t.T])
        if (np.diff(t, axis=1) >= -1e-15).all():
            break
    t = np.maximum.accumulate(np.maximum.accumulate(t, axis=0), axis=1)
    return np.clip(t, 0.0, 1.0)


def measure_detector_exit(h: ChannelPoly, ebno_grid, ia_grid=DEFAULT_IA_GRID, n_symbols=200_000,
                          seed=0, rate=1.0, workers=1, min_symbols=100_000) -> ExitSurface:
    """Monte-Carlo BCJR transfer surface with per-cell RNG streams."""
    eb = np.asarray(ebno_grid, dtype=np.float64)
    ia = np.asarray(ia_grid, dtype=np.float64)
    if (np.diff(eb) <= 0).any() or (np.diff(ia) <= 0).any():
        raise PexitError("surface grids must be strictly increasing")
    if ia[0] < 0 or ia[-1] > 1:
        raise PexitError("I_A grid must lie in [0, 1]")
    if n_symbols < min_symbols:
        raise PexitError(f"need at least {min_symbols} symbols per cell, got {n_symbols}")
    jobs = [(h, float(e), float(rate), float(a), int(n_symbols), int(seed), (i, j))
            for i, e in enumerate(eb) for j, a in enumerate(ia)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            vals = list(ex.map(_measure_cell, jobs, chunksize=4))
    else:
        vals = [_measure_cell(j) for j in jobs]
    raw = np.array(vals).reshape(len(eb), len(ia))
    meta = {"samples": int(n_symbols), "seed": int(seed), "raw": raw.tolist(),
            "smoothing": "isotonic(both axes)+cummax"}
    return ExitSurface(h.name, eb, ia, monotone_smooth(raw), float(rate), meta)


# --- PEXIT recursion ----------------------------------------------------------

@njit(cache=True)
def _j(s, ts, tj):
    if s <= 0.0:
        return 0.0
    return np.interp(s, ts, tj)


@njit(cache=True)
def _jinv(m, ts, tj):
    if m <= 0.0:
        return 0.0
    return np.interp(m, tj, ts)


@njit(cache=True)
def _pexit_kernel(er, ec, eb, n_rows, tx, curve, ts, tj, max_iter, eps, trace):
    n_cols = tx.shape[0]
    E = er.shape[0]
    iec = np.zeros(E)
    iev = np.zeros(E)
    sv = np.zeros(n_cols)
    sc = np.zeros(n_rows)
    sch = np.zeros(n_cols)
    ncurve = curve.shape[0] - 1
    n_tx = 0
    for j in range(n_cols):
        if tx[j]:
            n_tx += 1
    for it in range(max_iter):
        # detector activation
        for j in range(n_cols):
            sv[j] = 0.0
        for e in range(E):
            s = _jinv(iec[e], ts, tj)
            sv[ec[e]] += eb[e] * s * s
        ia = 0.0
        for j in range(n_cols):
            if tx[j]:
                ia += _j(math.sqrt(sv[j]), ts, tj)
        ia /= n_tx
        pos = ia * ncurve
        k = int(pos)
        if k >= ncurve:
            idet = curve[ncurve]
        else:
            idet = curve[k] + (pos - k) * (curve[k + 1] - curve[k])
        s_det = _jinv(idet, ts, tj)
        for j in range(n_cols):
            sch[j] = s_det * s_det if tx[j] else 0.0
        # variable -> check
        for e in range(E):
            s = _jinv(iec[e], ts, tj)
            r = sv[ec[e]] - s * s + sch[ec[e]]
            iev[e] = _j(math.sqrt(r) if r > 0.0 else 0.0, ts, tj)
        # check -> variable
        for i in range(n_rows):
            sc[i] = 0.0
        for e in range(E):
            s = _jinv(1.0 - iev[e], ts, tj)
            sc[er[e]] += eb[e] * s * s
        delta = 0.0
        for e in range(E):
            s = _jinv(1.0 - iev[e], ts, tj)
            r = sc[er[e]] - s * s
            new = 1.0 - _j(math.sqrt(r) if r > 0.0 else 0.0, ts, tj)
            d = abs(new - iec[e])
            if d > delta:
                delta = d
            iec[e] = new
        # a-posteriori check
        for j in range(n_cols):
            sv[j] = sch[j]
        for e in range(E):
            s = _jinv(iec[e], ts, tj)
            sv[ec[e]] += eb[e] * s * s
        worst = 1.0
        for j in range(n_cols):
            a = _j(math.sqrt(sv[j]), ts, tj)
            if a < worst:
                worst = a
        trace[it] = worst
        if worst >= 1.0 - eps:
            return True, it + 1
        if delta < 1e-12:
            return False, it + 1
    return False, max_iter


@dataclass(frozen=True)
class PexitResult:
    converged: bool
    iterations: int
    trace: np.ndarray  # worst a-posteriori MI per iteration

    def __bool__(self):
        return self.converged


def _edges(p: Protomatrix):
    r, c = np.nonzero(p.entries)
    return (r.astype(np.int64), c.astype(np.int64), p.entries[r, c].astype(np.float64))


def pexit_converges(p: Protomatrix, surface: ExitSurface, ebno_db, max_iter=MAX_ITER, eps=EPS,
                    code_rate=None) -> PexitResult:
    R = rate_of(p) if code_rate is None else Fraction(code_rate)
    curve = surface.curve(surface.coordinate(ebno_db, R))
    er, ec, eb = _edges(p)
    trace = np.zeros(max_iter)
    ok, it = _pexit_kernel(er, ec, eb, p.rows, p.transmitted, curve, TABLE_SIGMA, TABLE_J,
                           int(max_iter), float(eps), trace)
    return PexitResult(bool(ok), int(it), trace[:it].copy())


def threshold_search(p: Protomatrix, surface: ExitSurface, lo_db, hi_db, resolution=0.05,
                     max_iter=MAX_ITER, eps=EPS) -> float:
    """Bisection on Eb/N0; returns the midpoint of the final bracket."""
    if hi_db <= lo_db:
        raise PexitError(f"invalid bracket [{lo_db}, {hi_db}]")
    conv = lambda e: pexit_converges(p, surface, e, max_iter, eps).converged
    if not conv(hi_db):
        raise PexitError(f"PEXIT does not converge at the upper bracket {hi_db} dB")
    if conv(lo_db):
        raise PexitError(f"PEXIT already converges at the lower bracket {lo_db} dB")
    while hi_db - lo_db > resolution:
        mid = 0.5 * (lo_db + hi_db)
        if conv(mid):
            hi_db = mid
        else:
            lo_db = mid
    return 0.5 * (lo_db + hi_db)


def surface_span(surface: ExitSurface, code_rate) -> tuple:
    """Eb/N0 range (for a code of ``code_rate``) covered by ``surface``."""
    off = 10.0 * math.log10(float(code_rate) / surface.rate)
    return float(surface.ebno_grid[0] - off), float(surface.ebno_grid[-1] - off)


def genie_detector_mi(h: ChannelPoly, noise: NoiseModel) -> float:
    """Interference-free (matched-filter bound) MI: BPSK at SNR ||h||^2 / sigma^2."""
    from .jfunc import j_fun

    return float(j_fun(2.0 * math.sqrt(h.energy) / noise.sigma))


def standard_surface(channel, seed=0, n_symbols=200_000, lo=-4.0, hi=6.0, step=0.25, workers=1):
    """The surface used for threshold tables: Es/N0-referenced grid (rate 1)."""
    h = parse_channel(channel) if isinstance(channel, str) else channel
    grid = np.round(np.arange(lo, hi + step / 2, step), 10)
    return measure_detector_exit(h, grid, DEFAULT_IA_GRID, n_symbols, seed, 1.0, workers)
