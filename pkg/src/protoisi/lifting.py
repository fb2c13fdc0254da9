"""Two-stage lifting of protographs into quasi-cyclic LDPC codes.

Stage 1 copies the protograph ``n1`` times and places edges with progressive
edge growth (PEG) so that every cell of multiplicity b becomes a union of b
disjoint n1 x n1 permutations (no parallel edges). Stage 2 replaces each
stage-1 edge with an ``n2`` x ``n2`` circulant permutation whose shift is chosen
greedily to avoid short cycles.

Node numbering: protograph column j, stage-1 copy t is stage-1 variable
``j * n1 + t``; stage-1 variable v, circulant row x is code bit ``v * n2 + x``.
Protograph column prefixes therefore map to code-bit prefixes.

Circulant convention: the block for stage-1 edge (c, v) with shift s has a one
at (c*n2 + r, v*n2 + (r + s) mod n2).
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit

from .protograph import Protomatrix
from .rng import stream

MAX_EDGES = 10_000_000
INF_GIRTH = 10**9  # sentinel for cycle-free graphs


class LiftingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TannerGraph:
    n_checks: int
    n_vars: int
    check: np.ndarray  # per edge
    var: np.ndarray
    row_class: np.ndarray  # protograph row of each edge
    col_class: np.ndarray

    @property
    def n_edges(self) -> int:
        return len(self.check)

    def dense(self) -> np.ndarray:
        a = np.zeros((self.n_checks, self.n_vars), dtype=np.int64)
        np.add.at(a, (self.check, self.var), 1)
        return a

    def var_neighbors(self):
        nb = [[] for _ in range(self.n_vars)]
        for c, v in zip(self.check.tolist(), self.var.tolist()):
            nb[v].append(c)
        return nb


@dataclass(frozen=True, eq=False)
class QcCode:
    proto: Protomatrix
    n1: int
    n2: int
    graph: TannerGraph
    shifts: np.ndarray  # per stage-1 edge, in [0, n2)

    @property
    def n(self) -> int:
        return self.proto.cols * self.n1 * self.n2

    @property
    def m(self) -> int:
        return self.proto.rows * self.n1 * self.n2

    @property
    def k(self) -> int:
        return (self.proto.cols - self.proto.rows - len(self.proto.punctured)) * self.n1 * self.n2

    @property
    def transmitted_bits(self) -> np.ndarray:
        per = self.n1 * self.n2
        return np.repeat(self.proto.transmitted, per)

    def __eq__(self, other):
        if not isinstance(other, QcCode):
            return NotImplemented
        return (self.proto == other.proto and self.n1 == other.n1 and self.n2 == other.n2
                and np.array_equal(self.graph.check, other.graph.check)
                and np.array_equal(self.graph.var, other.graph.var)
                and np.array_equal(self.shifts, other.shifts))


# --- stage 1: PEG with permutation-block structure ----------------------------

def _bfs_depths(adj_v, adj_c, root, n_checks):
    """Distances (in check hops) from variable ``root`` to every check; -1 if unreachable."""
    depth = np.full(n_checks, -1)
    seen_v = {root}
    frontier = [root]
    d = 0
    while frontier:
        nxt = []
        for v in frontier:
            for c in adj_v[v]:
                if depth[c] < 0:
                    depth[c] = d
                    for w in adj_c[c]:
                        if w not in seen_v:
                            seen_v.add(w)
                            nxt.append(w)
        frontier = nxt
        d += 1
    return depth


def peg_order(p: Protomatrix) -> list:
    deg = p.entries.sum(axis=0)
    return sorted(range(p.cols), key=lambda j: (-deg[j], j))


def peg_lift_stage1(p: Protomatrix, n1: int = 4, seed: int = 0, attempts: int = 50) -> TannerGraph:
    """PEG lift by ``n1``; every b(i, j) cell becomes a 0/1 block with row and
    column sums b, i.e. a union of b disjoint permutations."""
    bmax = int(p.entries.max())
    if n1 < bmax:
        raise LiftingError(f"lift factor {n1} < max multiplicity {bmax}: parallel edges unavoidable")
    C, V = p.rows, p.cols
    order = peg_order(p)
    for attempt in range(attempts):
        rng = stream(seed, 1, attempt)
        adj_v = [[] for _ in range(V * n1)]
        adj_c = [[] for _ in range(C * n1)]
        cap = {}  # (i, j) -> remaining capacity per check copy
        for i, j in zip(*np.nonzero(p.entries)):
            cap[(int(i), int(j))] = np.full(n1, int(p.entries[i, j]))
        for j in order:
            rows = [int(i) for i in np.flatnonzero(p.entries[:, j])]
            for t in range(n1):
                v = j * n1 + t
                remaining = n1 - t
                for i in rows:
                    b = int(p.entries[i, j])
                    cp = cap[(i, j)]
                    # Gale-Ryser: a copy with capacity == remaining vars must be used now
                    forced = [x for x in range(n1) if cp[x] == remaining]
                    for x in forced:
                        adj_v[v].append(i * n1 + x)
                        adj_c[i * n1 + x].append(v)
                        cp[x] -= 1
                    for _ in range(b - len(forced)):
                        cands = [x for x in range(n1) if cp[x] > 0 and (i * n1 + x) not in adj_v[v]]
                        if not cands:
                            break
                        if adj_v[v]:
                            depth = _bfs_depths(adj_v, adj_c, v, C * n1)
                            dd = np.array([depth[i * n1 + x] for x in cands])
                            if (dd < 0).any():
                                cands = [x for x, d in zip(cands, dd) if d < 0]
                            else:
                                cands = [x for x, d in zip(cands, dd) if d == dd.max()]
                        degs = np.array([len(adj_c[i * n1 + x]) for x in cands])
                        cands = [x for x, d in zip(cands, degs) if d == degs.min()]
                        x = cands[int(rng.integers(len(cands)))]
                        adj_v[v].append(i * n1 + x)
                        adj_c[i * n1 + x].append(v)
                        cp[x] -= 1
        if all((cp == 0).all() for cp in cap.values()) and all(
                len(set(a)) == len(a) for a in adj_v):
            break
    else:
        raise LiftingError(f"PEG failed to complete a simple lift after {attempts} attempts")
    check, var = [], []
    for j in order:
        for t in range(n1):
            v = j * n1 + t
            for c in adj_v[v]:
                check.append(c)
                var.append(v)
    check = np.array(check, dtype=np.int64)
    var = np.array(var, dtype=np.int64)
    return TannerGraph(C * n1, V * n1, check, var, check // n1, var // n1)


# --- stage 2: circulant shifts --------------------------------------------------

def _bad_shifts(c, v, assigned_v, assigned_c, n2):
    """Shift values for new edge (c, v) that would close a 4- or 6-cycle."""
    bad4, bad6 = set(), set()
    sv = assigned_v.get(v, {})
    # two-step reach back from v: v3 -> list of (c3, s(c3,v) - s(c3,v3))
    back = {}
    for c3, s3v in sv.items():
        for v3, s33 in assigned_c.get(c3, {}).items():
            if v3 != v:
                back.setdefault(v3, []).append((c3, s3v - s33))
    for v2, s_cv2 in assigned_c.get(c, {}).items():
        if v2 == v:
            continue
        for c2, s22 in assigned_v[v2].items():
            if c2 == c:
                continue
            base = s_cv2 - s22
            s2v = sv.get(c2)
            if s2v is not None:
                bad4.add((base + s2v) % n2)
            for v3, s23 in assigned_c[c2].items():
                if v3 == v2 or v3 == v:
                    continue
                for c3, tail in back.get(v3, ()):
                    if c3 != c2 and c3 != c:
                        bad6.add((base + s23 + tail) % n2)
    return bad4, bad6


def circulant_lift_stage2(g: TannerGraph, proto: Protomatrix, n1: int, n2: int, seed: int = 0) -> QcCode:
    """Greedy circulant shifts: for each stage-1 edge, scan shifts in seeded
    random order and keep the first one that avoids 4- and 6-cycles, falling
    back to avoiding 4-cycles only, then to the first candidate."""
    if n2 < 1:
        raise LiftingError("circulant size must be >= 1")
    vdeg = np.bincount(g.var, minlength=g.n_vars)
    order = sorted(range(g.n_edges), key=lambda e: (-vdeg[g.var[e]], g.var[e], e))
    shifts = np.zeros(g.n_edges, dtype=np.int64)
    if n2 == 1:
        return QcCode(proto, n1, n2, g, shifts)
    rng = stream(seed, 2)
    assigned_v, assigned_c = {}, {}
    for e in order:
        c, v = int(g.check[e]), int(g.var[e])
        bad4, bad6 = _bad_shifts(c, v, assigned_v, assigned_c, n2)
        cand = rng.permutation(n2)
        pick = None
        for bad in (bad4 | bad6, bad4):
            if len(bad) < n2:
                for s in cand:
                    if int(s) not in bad:
                        pick = int(s)
                        break
            if pick is not None:
                break
        if pick is None:
            pick = int(cand[0])
        shifts[e] = pick
        assigned_v.setdefault(v, {})[c] = pick
        assigned_c.setdefault(c, {})[v] = pick
    return QcCode(proto, n1, n2, g, shifts)


def lift(p: Protomatrix, n1: int = 4, n2: int = 1, seed: int = 0) -> QcCode:
    return circulant_lift_stage2(peg_lift_stage1(p, n1, seed), p, n1, n2, seed)


def restrict(q: QcCode, rows: int, cols: int) -> QcCode:
    """Sub-code on the leading ``rows`` x ``cols`` protograph block: the
    higher-rate members of a nested or rate-compatible family obtained by
    deleting checks and code bits."""
    keep = (q.graph.row_class < rows) & (q.graph.col_class < cols)
    g = q.graph
    sub = TannerGraph(rows * q.n1, cols * q.n1, g.check[keep], g.var[keep],
                      g.row_class[keep], g.col_class[keep])
    return QcCode(q.proto.submatrix(rows, cols), q.n1, q.n2, sub, q.shifts[keep].copy())


# --- expansion ------------------------------------------------------------------

def to_parity_matrix(q: QcCode) -> sp.csr_matrix:
    n_edges = q.graph.n_edges * q.n2
    if n_edges > MAX_EDGES:
        raise LiftingError(f"expanded graph would have {n_edges} edges (limit {MAX_EDGES})")
    r = np.arange(q.n2)
    rows = (q.graph.check[:, None] * q.n2 + r[None, :]).ravel()
    cols = (q.graph.var[:, None] * q.n2 + (r[None, :] + q.shifts[:, None]) % q.n2).ravel()
    H = sp.csr_matrix((np.ones(len(rows), dtype=np.uint8), (rows, cols)), shape=(q.m, q.n))
    H.sum_duplicates()
    return H


# --- girth ----------------------------------------------------------------------

@njit(cache=True)
def _girth_bfs(n_vars, n_checks, vptr, vadj, cptr, cadj, roots, bound):
    """Shortest cycle through any root; nodes 0..n_vars-1 are variables,
    n_vars.. are checks."""
    N = n_vars + n_checks
    dist = np.full(N, -1, dtype=np.int64)
    parent = np.full(N, -1, dtype=np.int64)
    queue = np.empty(N, dtype=np.int64)
    best = bound
    for root in roots:
        for k in range(N):
            dist[k] = -1
            parent[k] = -1
        head = 0
        tail = 0
        queue[tail] = root
        tail += 1
        dist[root] = 0
        while head < tail:
            u = queue[head]
            head += 1
            if 2 * dist[u] + 1 >= best:
                break
            if u < n_vars:
                lo, hi = vptr[u], vptr[u + 1]
            else:
                lo, hi = cptr[u - n_vars], cptr[u - n_vars + 1]
            for k in range(lo, hi):
                w = vadj[k] + n_vars if u < n_vars else cadj[k]
                if w == parent[u]:
                    continue
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    parent[w] = u
                    queue[tail] = w
                    tail += 1
                else:
                    length = dist[u] + dist[w] + 1
                    if length < best:
                        best = length
    return best


def _csr_pair(H):
    Hc = H.tocsc()
    Hr = H.tocsr()
    return (Hc.indptr.astype(np.int64), Hc.indices.astype(np.int64),
            Hr.indptr.astype(np.int64), Hr.indices.astype(np.int64))


def parity_girth(H, roots=None) -> int:
    """Girth of the Tanner graph of ``H`` (INF_GIRTH if cycle-free)."""
    H = sp.csr_matrix(H)
    m, n = H.shape
    vptr, vadj, cptr, cadj = _csr_pair(H)
    roots = np.arange(n, dtype=np.int64) if roots is None else np.asarray(roots, dtype=np.int64)
    return int(_girth_bfs(n, m, vptr, vadj, cptr, cadj, roots, INF_GIRTH))


@njit(cache=True)
def _count_cycles(n_vars, vptr, vadj, cptr, cadj, vs, cs, n2):
    """Zero-shift-sum simple 4- and 6-cycles of the stage-1 graph, counted as
    directed walks starting at variable nodes. ``vs``/``cs`` hold the shift of
    each adjacency entry."""
    c4 = 0
    c6 = 0
    for v in range(n_vars):
        for a in range(vptr[v], vptr[v + 1]):
            c = vadj[a]
            s_cv = vs[a]
            for b in range(cptr[c], cptr[c + 1]):
                v2 = cadj[b]
                if v2 == v:
                    continue
                s1 = -s_cv + cs[b]
                for d in range(vptr[v2], vptr[v2 + 1]):
                    c2 = vadj[d]
                    if c2 == c:
                        continue
                    s2 = s1 - vs[d]
                    for f in range(cptr[c2], cptr[c2 + 1]):
                        v3 = cadj[f]
                        if v3 == v2:
                            continue
                        s3 = s2 + cs[f]
                        if v3 == v:
                            if s3 % n2 == 0:
                                c4 += 1
                            continue
                        for g in range(vptr[v3], vptr[v3 + 1]):
                            c3 = vadj[g]
                            if c3 == c2 or c3 == c:
                                continue
                            s4 = s3 - vs[g]
                            for h in range(cptr[c3], cptr[c3 + 1]):
                                if cadj[h] == v and (s4 + cs[h]) % n2 == 0:
                                    c6 += 1
    return c4, c6


@dataclass(frozen=True)
class GirthReport:
    girth: int
    cycles4: int
    cycles6: int


def girth_of(q: QcCode) -> GirthReport:
    """Exact girth of the expanded code plus 4-/6-cycle counts.

    Circulant symmetry makes every circulant row equivalent, so BFS roots are
    one code bit per stage-1 variable. Short cycles are counted on the
    stage-1 graph with the shift-sum condition.
    """
    H = to_parity_matrix(q)
    roots = np.arange(q.graph.n_vars, dtype=np.int64) * q.n2
    g = parity_girth(H, roots)
    # stage-1 adjacency with shifts
    gv = q.graph
    ov = np.lexsort((gv.check, gv.var))
    oc = np.lexsort((gv.var, gv.check))
    vptr = np.concatenate([[0], np.cumsum(np.bincount(gv.var, minlength=gv.n_vars))]).astype(np.int64)
    cptr = np.concatenate([[0], np.cumsum(np.bincount(gv.check, minlength=gv.n_checks))]).astype(np.int64)
    c4, c6 = _count_cycles(gv.n_vars, vptr, gv.check[ov], cptr, gv.var[oc],
                           q.shifts[ov], q.shifts[oc], q.n2)
    return GirthReport(g, int(c4) * q.n2 // 4, int(c6) * q.n2 // 6)


# --- persistence ------------------------------------------------------------------

def serialize_qc(q: QcCode) -> str:
    """Header ``C V N1 N2`` then one ``ci vi shift`` line per stage-1 edge (1-based nodes)."""
    out = [f"{q.proto.rows} {q.proto.cols} {q.n1} {q.n2}"]
    out += [f"{c + 1} {v + 1} {s}" for c, v, s in zip(q.graph.check.tolist(), q.graph.var.tolist(),
                                                       q.shifts.tolist())]
    return "\n".join(out) + "\n"


def parse_qc(text: str) -> QcCode:
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    try:
        C, V, n1, n2 = (int(t) for t in lines[0])
        edges = np.array([[int(t) for t in ln] for ln in lines[1:]], dtype=np.int64).reshape(-1, 3)
    except (ValueError, IndexError):
        raise LiftingError("malformed QC code file") from None
    check, var, shifts = edges[:, 0] - 1, edges[:, 1] - 1, edges[:, 2]
    if len(edges) and ((check < 0).any() or (check >= C * n1).any() or (var < 0).any()
                       or (var >= V * n1).any() or (shifts < 0).any() or (shifts >= n2).any()):
        raise LiftingError("QC code edge out of range")
    proto_e = np.zeros((C, V), dtype=np.int64)
    np.add.at(proto_e, (check // n1, var // n1), 1)
    if (proto_e % n1).any():
        raise LiftingError("stage-1 edges do not form whole permutation blocks")
    g = TannerGraph(C * n1, V * n1, check, var, check // n1, var // n1)
    return QcCode(Protomatrix(proto_e // n1), n1, n2, g, shifts)


def to_alist(H) -> str:
    H = sp.csr_matrix(H)
    m, n = H.shape
    Hc = H.tocsc()
    cdeg = np.diff(Hc.indptr)
    rdeg = np.diff(H.indptr)
    out = [f"{n} {m}", f"{cdeg.max()} {rdeg.max()}",
           " ".join(map(str, cdeg)), " ".join(map(str, rdeg))]
    for j in range(n):
        idx = sorted(Hc.indices[Hc.indptr[j]:Hc.indptr[j + 1]] + 1)
        out.append(" ".join(map(str, idx + [0] * (cdeg.max() - len(idx)))))
    for i in range(m):
        idx = sorted(H.indices[H.indptr[i]:H.indptr[i + 1]] + 1)
        out.append(" ".join(map(str, idx + [0] * (rdeg.max() - len(idx)))))
    return "\n".join(out) + "\n"


def from_alist(text: str) -> sp.csr_matrix:
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    n, m = int(lines[0][0]), int(lines[0][1])
    rows, cols = [], []
    for j in range(n):
        for t in lines[4 + j]:
            if int(t) > 0:
                rows.append(int(t) - 1)
                cols.append(j)
    return sp.csr_matrix((np.ones(len(rows), dtype=np.uint8), (rows, cols)), shape=(m, n))
