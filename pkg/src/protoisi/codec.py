"""Systematic encoding, sum-product decoding and the turbo-equalization receiver."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit

from .channel import LLR_MAX, ChannelPoly, NoiseModel, Trellis, bcjr_detect, make_trellis


class CodecError(ValueError):
    pass


# --- encoder -------------------------------------------------------------------

def _gf2_inverse(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    m = np.concatenate([a.astype(np.uint8) & 1, np.eye(n, dtype=np.uint8)], axis=1)
    for col in range(n):
        piv = col + np.flatnonzero(m[col:, col])
        if len(piv) == 0:
            raise CodecError("gap matrix is singular")
        p = piv[0]
        if p != col:
            m[[col, p]] = m[[p, col]]
        rows = np.flatnonzero(m[:, col])
        rows = rows[rows != col]
        m[rows] ^= m[col]
    return m[:, n:]


@njit(cache=True)
def _backsub(cw, piv_rows, piv_cols, indptr, indices, gap_rows, out_z):
    for t in range(piv_rows.shape[0]):
        r = piv_rows[t]
        c = piv_cols[t]
        acc = 0
        for k in range(indptr[r], indptr[r + 1]):
            j = indices[k]
            if j != c:
                acc ^= cw[j]
        cw[c] = acc
    for t in range(gap_rows.shape[0]):
        r = gap_rows[t]
        acc = 0
        for k in range(indptr[r], indptr[r + 1]):
            acc ^= cw[indices[k]]
        out_z[t] = acc


@dataclass(frozen=True, eq=False)
class Encoder:
    """Approximate-lower-triangular encoder.

    Greedy peeling orders ``piv_cols`` so each is solved by back-substitution
    through ``piv_rows`` (the triangular part). Columns the peeling had to
    declare known are split by GF(2) elimination of the leftover ("gap") rows
    into ``gap_cols`` (solved through the dense ``gap_inv``) and systematic
    payload positions ``info_positions``.
    """

    H: sp.csr_matrix
    piv_rows: np.ndarray
    piv_cols: np.ndarray
    gap_cols: np.ndarray
    gap_rows: np.ndarray  # independent leftover rows, aligned with gap_inv
    gap_inv: np.ndarray
    info_positions: np.ndarray
    rank_deficiency: int

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def k(self) -> int:
        return len(self.info_positions)

    @property
    def gap(self) -> int:
        return len(self.gap_cols)


def build_encoder(H) -> Encoder:
    H = sp.csr_matrix(H, dtype=np.uint8)
    H.sum_duplicates()
    H.data %= 2
    H.eliminate_zeros()
    m, n = H.shape
    Hc = H.tocsc()
    row_cols = [H.indices[H.indptr[r]:H.indptr[r + 1]].tolist() for r in range(m)]
    col_rows = [Hc.indices[Hc.indptr[c]:Hc.indptr[c + 1]].tolist() for c in range(n)]
    rdeg = np.array([len(x) for x in row_cols])
    cdeg = np.array([len(x) for x in col_rows])
    known = np.zeros(n, dtype=bool)
    done = np.zeros(m, dtype=bool)
    free_cols, piv_rows, piv_cols, leftover = [], [], [], []
    ones = [r for r in range(m) if rdeg[r] == 1]
    zeros = [r for r in range(m) if rdeg[r] == 0]

    def settle(c):
        known[c] = True
        for r in col_rows[c]:
            rdeg[r] -= 1
            if not done[r]:
                if rdeg[r] == 1:
                    ones.append(r)
                elif rdeg[r] == 0:
                    zeros.append(r)

    remaining = m
    while remaining:
        while zeros:
            r = zeros.pop()
            if not done[r]:
                done[r] = True
                remaining -= 1
                leftover.append(r)
                for c in row_cols[r]:
                    cdeg[c] -= 1
        if ones:
            r = ones.pop()
            if done[r] or rdeg[r] != 1:
                continue
            c = next(c for c in row_cols[r] if not known[c])
            done[r] = True
            remaining -= 1
            for cc in row_cols[r]:
                cdeg[cc] -= 1
            piv_rows.append(r)
            piv_cols.append(c)
            settle(c)
            continue
        if not remaining:
            break
        open_rows = np.flatnonzero(~done)
        r = int(open_rows[np.argmin(rdeg[open_rows])])
        unk = [c for c in row_cols[r] if not known[c]]
        keep = min(unk, key=lambda c: (cdeg[c], -c))
        for c in unk:
            if c != keep:
                free_cols.append(c)
                settle(c)
    free_cols += [c for c in range(n) if not known[c]]

    # express every column as a bitset over the free columns
    fidx = {c: i for i, c in enumerate(free_cols)}
    val = {c: 1 << i for c, i in fidx.items()}
    for r, c in zip(piv_rows, piv_cols):
        acc = 0
        for cc in row_cols[r]:
            if cc != c:
                acc ^= val[cc]
        val[c] = acc
    eqs = []
    for r in leftover:
        acc = 0
        for cc in row_cols[r]:
            acc ^= val[cc]
        eqs.append(acc)

    # GF(2) elimination on the leftover equations; pivot free columns become gap columns
    basis = {}  # pivot bit -> (reduced eq, original leftover row)
    for eq, r in zip(eqs, leftover):
        for b, (beq, _) in basis.items():
            if eq >> b & 1:
                eq ^= beq
        if eq == 0:
            continue
        b = eq.bit_length() - 1
        for bb in list(basis):
            if basis[bb][0] >> b & 1:
                basis[bb] = (basis[bb][0] ^ eq, basis[bb][1])
        basis[b] = (eq, r)
    gap_bits = sorted(basis)
    gap_cols = [free_cols[b] for b in gap_bits]
    gap_rows = [basis[b][1] for b in gap_bits]
    gapset = set(gap_bits)
    info = sorted(c for i, c in enumerate(free_cols) if i not in gapset)
    # phi: original gap-row equations restricted to gap columns
    eq_of = dict(zip(leftover, eqs))
    phi = np.array([[eq_of[r] >> b & 1 for b in gap_bits] for r in gap_rows], dtype=np.uint8)
    gap_inv = _gf2_inverse(phi) if len(gap_bits) else np.zeros((0, 0), dtype=np.uint8)
    deficiency = m - len(piv_rows) - len(gap_bits)
    as_arr = lambda x: np.array(x, dtype=np.int64)
    return Encoder(H, as_arr(piv_rows), as_arr(piv_cols), as_arr(gap_cols), as_arr(gap_rows),
                   gap_inv, as_arr(info), deficiency)


def encode(e: Encoder, payload) -> np.ndarray:
    u = np.asarray(payload, dtype=np.uint8)
    if u.shape != (e.k,):
        raise CodecError(f"payload length {u.size} != k = {e.k}")
    cw = np.zeros(e.n, dtype=np.uint8)
    cw[e.info_positions] = u
    z = np.zeros(len(e.gap_rows), dtype=np.uint8)
    ind = e.H.indices.astype(np.int64)
    ptr = e.H.indptr.astype(np.int64)
    _backsub(cw, e.piv_rows, e.piv_cols, ptr, ind, e.gap_rows, z)
    if e.gap:
        cw[e.gap_cols] = (e.gap_inv.astype(np.int64) @ z) % 2
        _backsub(cw, e.piv_rows, e.piv_cols, ptr, ind, e.gap_rows, z)
    return cw


def syndrome(H, cw) -> np.ndarray:
    return (sp.csr_matrix(H) @ np.asarray(cw, dtype=np.int64)) % 2


# --- belief propagation ----------------------------------------------------------

@dataclass(frozen=True)
class DecodeConfig:
    outer_iters: int = 10
    bp_iters: int = 20
    llr_clamp: float = LLR_MAX
    check_rule: str = "tanh"  # or "minsum"

    def __post_init__(self):
        if self.outer_iters < 1 or self.bp_iters < 0:
            raise CodecError("iteration counts must be positive")
        if not 0 < self.llr_clamp <= LLR_MAX:
            raise CodecError(f"llr_clamp must lie in (0, {LLR_MAX}]")
        if self.check_rule not in ("tanh", "minsum"):
            raise CodecError(f"unknown check rule {self.check_rule!r}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DecodeConfig":
        d = json.loads(text)
        unknown = set(d) - {"outer_iters", "bp_iters", "llr_clamp", "check_rule"}
        if unknown:
            raise CodecError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class Graph:
    """Edge arrays of a parity matrix in check-major order."""

    m: int
    n: int
    cptr: np.ndarray
    evar: np.ndarray

    @classmethod
    def from_matrix(cls, H):
        H = sp.csr_matrix(H)
        H.sort_indices()
        return cls(H.shape[0], H.shape[1], H.indptr.astype(np.int64), H.indices.astype(np.int64))


@njit(cache=True)
def _bp_kernel(cptr, evar, n, lch, c2v, iters, clamp, minsum):
    m = cptr.shape[0] - 1
    E = evar.shape[0]
    total = np.zeros(n)
    for e in range(E):
        total[evar[e]] += c2v[e]
    v2c = np.empty(E)
    t = np.empty(E)
    post = np.empty(n)
    dec = np.empty(n, dtype=np.uint8)
    lim = 1.0 - 1e-15  # tanh saturates to 1.0 well before the LLR clamp
    used = 0
    ok = False
    for it in range(iters):
        used = it + 1
        for e in range(E):
            v2c[e] = lch[evar[e]] + total[evar[e]] - c2v[e]
        for r in range(m):
            lo = cptr[r]
            hi = cptr[r + 1]
            if minsum:
                sgn = 1.0
                m1 = np.inf
                m2 = np.inf
                arg = -1
                for e in range(lo, hi):
                    a = abs(v2c[e])
                    if v2c[e] < 0:
                        sgn = -sgn
                    if a < m1:
                        m2 = m1
                        m1 = a
                        arg = e
                    elif a < m2:
                        m2 = a
                for e in range(lo, hi):
                    mag = m2 if e == arg else m1
                    s = sgn if v2c[e] >= 0 else -sgn
                    c2v[e] = s * min(mag, clamp)
            else:
                for e in range(lo, hi):
                    t[e] = np.tanh(0.5 * v2c[e])
                # exclusive products via prefix/suffix sweeps
                acc = 1.0
                for e in range(lo, hi):
                    c2v[e] = acc
                    acc *= t[e]
                acc = 1.0
                for e in range(hi - 1, lo - 1, -1):
                    p = c2v[e] * acc
                    acc *= t[e]
                    if p > lim:
                        p = lim
                    elif p < -lim:
                        p = -lim
                    c2v[e] = min(max(2.0 * np.arctanh(p), -clamp), clamp)
        for j in range(n):
            total[j] = 0.0
        for e in range(E):
            total[evar[e]] += c2v[e]
        for j in range(n):
            post[j] = lch[j] + total[j]
            dec[j] = 1 if post[j] < 0 else 0
        ok = True
        for r in range(m):
            par = 0
            for e in range(cptr[r], cptr[r + 1]):
                par ^= dec[evar[e]]
            if par:
                ok = False
                break
        if ok:
            break
    if iters == 0:
        for j in range(n):
            post[j] = lch[j]
            dec[j] = 1 if lch[j] < 0 else 0
            total[j] = 0.0
    return dec, total, ok, used


@dataclass(frozen=True)
class BpResult:
    bits: np.ndarray
    extrinsic: np.ndarray  # posterior minus channel input
    converged: bool
    iterations: int


def bp_decode(H, channel_llrs, cfg: DecodeConfig = DecodeConfig(), messages=None, graph=None) -> BpResult:
    """Flooding sum-product. ``messages`` (check-to-variable, check-major edge
    order) are updated in place when supplied, so a caller can keep decoder
    state across turbo iterations."""
    g = graph if graph is not None else Graph.from_matrix(H)
    lch = np.ascontiguousarray(channel_llrs, dtype=np.float64)
    if lch.shape != (g.n,):
        raise CodecError(f"expected {g.n} channel LLRs, got {lch.shape}")
    c2v = messages if messages is not None else np.zeros(len(g.evar))
    dec, ext, ok, it = _bp_kernel(g.cptr, g.evar, g.n, lch, c2v, int(cfg.bp_iters),
                                  float(cfg.llr_clamp), cfg.check_rule == "minsum")
    return BpResult(dec, np.clip(ext, -cfg.llr_clamp, cfg.llr_clamp), bool(ok), int(it))


# --- turbo equalization -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LdpcCode:
    """Parity matrix plus everything a receiver needs, built once per code.
    ``tx_mask`` marks the code bits sent over the channel (others are punctured)."""

    H: sp.csr_matrix
    graph: Graph
    encoder: Encoder
    tx_mask: np.ndarray

    @classmethod
    def from_matrix(cls, H, tx_mask=None):
        H = sp.csr_matrix(H, dtype=np.uint8)
        mask = np.ones(H.shape[1], dtype=bool) if tx_mask is None else np.asarray(tx_mask, dtype=bool)
        if mask.shape != (H.shape[1],):
            raise CodecError("transmit mask length must equal the code length")
        return cls(H, Graph.from_matrix(H), build_encoder(H), mask)

    @property
    def n_tx(self) -> int:
        return int(self.tx_mask.sum())

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def k(self) -> int:
        return self.encoder.k


@dataclass(frozen=True)
class TurboResult:
    codeword: np.ndarray
    payload: np.ndarray
    converged: bool
    outer_iterations: int


def turbo_equalize(y, code: LdpcCode, h: ChannelPoly, noise: NoiseModel,
                   cfg: DecodeConfig = DecodeConfig(), trellis: Trellis | None = None) -> TurboResult:
    """BCJR <-> BP loop exchanging extrinsic LLRs; stops on zero syndrome.
    ``y`` holds the channel samples of the transmitted bits only."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (code.n_tx,):
        raise CodecError(f"received {y.size} samples, code transmits {code.n_tx} bits")
    t = trellis if trellis is not None else make_trellis(h)
    tx = code.tx_mask
    prior = np.zeros(code.n_tx)
    det = np.zeros(code.n)
    c2v = np.zeros(len(code.graph.evar))
    res = None
    outer = 0
    for outer in range(1, cfg.outer_iters + 1):
        det[tx] = bcjr_detect(y, prior, h, noise, t, clamp=cfg.llr_clamp)
        res = bp_decode(None, det, cfg, messages=c2v, graph=code.graph)
        if res.converged:
            break
        prior = res.extrinsic[tx]
    return TurboResult(res.bits, res.bits[code.encoder.info_positions], res.converged, outer)
