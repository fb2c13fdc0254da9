import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from protoisi.codec import build_encoder, encode, syndrome
from protoisi.lifting import (INF_GIRTH, LiftingError, QcCode, TannerGraph, circulant_lift_stage2, from_alist,
                              girth_of, lift, parity_girth, parse_qc, peg_lift_stage1, restrict,
                              serialize_qc, to_alist, to_parity_matrix)
from protoisi.protograph import NESTED_9_10, RC_27_41, Protomatrix, builtin


def test_stage1_isi_half():
    p = builtin("isi-1/2")
    g = peg_lift_stage1(p, 4, seed=0)
    a = g.dense()
    assert a.shape == (12, 24) and a.max() == 1
    for i in range(3):
        for j in range(6):
            blk = a[4 * i:4 * i + 4, 4 * j:4 * j + 4]
            assert (blk.sum(axis=0) == p.entries[i, j]).all()
            assert (blk.sum(axis=1) == p.entries[i, j]).all()
    assert (a[0:4, 20:24] == 1).all()


def test_stage1_rejects_small_factor():
    with pytest.raises(LiftingError):
        peg_lift_stage1(builtin("isi-1/2"), 2)


def test_stage1_deterministic():
    a = peg_lift_stage1(builtin("nested-2/3"), 4, seed=7)
    b = peg_lift_stage1(builtin("nested-2/3"), 4, seed=7)
    assert np.array_equal(a.check, b.check) and np.array_equal(a.var, b.var)


def test_n2_one_is_stage1():
    p = builtin("isi-1/2")
    g = peg_lift_stage1(p, 4, seed=0)
    q = circulant_lift_stage2(g, p, 4, 1)
    assert (q.shifts == 0).all()
    assert np.array_equal(to_parity_matrix(q).toarray(), g.dense())


def test_expansion_degrees():
    p = builtin("isi-1/2")
    q = lift(p, 4, 10)
    H = to_parity_matrix(q)
    assert H.shape == (120, 240)
    assert H.nnz == p.entries.sum() * 4 * 10
    assert (np.asarray(H[40:80].sum(axis=1)).ravel() == 8).all()
    cdeg = np.asarray(H.sum(axis=0)).ravel()
    assert (cdeg == np.repeat(p.entries.sum(axis=0), 40)).all()


def test_edge_multiplicity_expansion():
    p = builtin("nested-3/4")
    q = lift(p, 4, 7, seed=3)
    for i in range(p.rows):
        for j in range(p.cols):
            n = int(((q.graph.row_class == i) & (q.graph.col_class == j)).sum())
            assert n * q.n2 == p.entries[i, j] * 4 * 7


@pytest.mark.parametrize("name,n2,k", [("isi-1/2", 1364, 16_368), ("nested-9/10", 153, 16_524),
                                       ("nested-2/3", 683, 16_392), ("rc-27/41", 153, 16_524)])
def test_published_sizes(name, n2, k):
    p = builtin(name)
    q = QcCode(p, 4, n2, peg_lift_stage1(p, 4), np.zeros(int(p.entries.sum()) * 4, dtype=np.int64))
    assert q.k == k and q.n == p.cols * 4 * n2


def test_girth_of_lift_at_153():
    q = lift(builtin("isi-1/2"), 4, 153)
    rep = girth_of(q)
    assert rep.girth >= 6 and rep.cycles4 == 0


def test_girth_counts_planted_four_cycle():
    p = Protomatrix([[1, 1], [1, 1]])
    g = TannerGraph(2, 2, np.array([0, 0, 1, 1]), np.array([0, 1, 0, 1]), np.array([0, 0, 1, 1]),
                    np.array([0, 1, 0, 1]))
    q = QcCode(p, 1, 5, g, np.array([0, 2, 1, 3]))  # shift sum 0 - 2 + 3 - 1 = 0
    rep = girth_of(q)
    assert rep.girth == 4 and rep.cycles4 == 5
    q = QcCode(p, 1, 5, g, np.array([0, 1, 2, 4]))
    assert girth_of(q).cycles4 == 0


def test_tree_has_infinite_girth():
    H = sp.csr_matrix(np.array([[1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1]]))
    assert parity_girth(H) == INF_GIRTH
    assert parity_girth(sp.csr_matrix(np.array([[1, 1], [1, 1]]))) == 4


@given(st.integers(0, 2**16), st.integers(3, 12))
def test_quasi_cyclic(seed, n2):
    q = lift(builtin("isi-1/2"), 4, n2, seed=seed % 50)
    H = to_parity_matrix(q)
    e = build_encoder(H)
    cw = encode(e, np.random.default_rng(seed).integers(0, 2, e.k))
    shifted = cw.reshape(-1, n2)
    shifted = np.roll(shifted, 1, axis=1).ravel()
    assert not syndrome(H, shifted).any()


def test_nested_restriction_is_column_subset():
    big = lift(builtin("nested-9/10"), 4, 20, seed=1)
    Hb = to_parity_matrix(big).toarray()
    for name in ("isi-1/2", "nested-2/3", "nested-5/6"):
        p = builtin(name)
        sub = restrict(big, p.rows, p.cols)
        assert sub.proto == p
        Hs = to_parity_matrix(sub).toarray()
        assert np.array_equal(Hs, Hb[:, :sub.n])


def test_rc_restriction_removes_rows_and_columns():
    big = lift(Protomatrix(RC_27_41), 4, 12, seed=2)
    Hb = to_parity_matrix(big).toarray()
    p = builtin("rc-27/34")
    sub = restrict(big, p.rows, p.cols)
    Hs = to_parity_matrix(sub).toarray()
    assert np.array_equal(Hs, Hb[:sub.m, :sub.n])
    assert sub.k == big.k


def test_lift_deterministic():
    a = lift(builtin("nested-3/4"), 4, 30, seed=9)
    b = lift(builtin("nested-3/4"), 4, 30, seed=9)
    assert a == b
    assert a != lift(builtin("nested-3/4"), 4, 30, seed=10)


def test_qc_text_roundtrip():
    q = lift(builtin("isi-1/2"), 4, 17, seed=4)
    text = serialize_qc(q)
    assert text.splitlines()[0] == "3 6 4 17"
    back = parse_qc(text)
    assert back == q
    with pytest.raises(LiftingError):
        parse_qc("3 6 4 17\n1 1 99\n")
    with pytest.raises(LiftingError):
        parse_qc("garbage")


def test_alist_roundtrip():
    H = to_parity_matrix(lift(builtin("isi-1/2"), 4, 5))
    back = from_alist(to_alist(H))
    assert (back != H).nnz == 0


def test_edge_guard(monkeypatch):
    import protoisi.lifting as lifting

    monkeypatch.setattr(lifting, "MAX_EDGES", 100)
    with pytest.raises(LiftingError):
        to_parity_matrix(lift(builtin("isi-1/2"), 4, 10))


def test_large_rate_lifts_are_fast():
    for name in ("nested-9/10",):
        q = lift(Protomatrix(NESTED_9_10), 4, 153)
        assert q.k == 16_524 and girth_of(q).girth >= 6
