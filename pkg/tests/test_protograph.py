from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from protoisi.protograph import (ISI_HALF, NESTED_9_10, RC_27_41, ExtensionColumns, Protomatrix,
                                 ProtographError, RcExtension, builtin, builtin_names, load_code,
                                 nest_extend, parse_protomatrix, rate_of, rc_extend,
                                 serialize_protomatrix, validate_linear_growth)


@st.composite
def protomatrices(draw, max_rows=4, max_cols=8):
    rows = draw(st.integers(1, max_rows))
    cols = draw(st.integers(rows + 1, max_cols))
    e = np.array(draw(st.lists(st.lists(st.integers(0, 3), min_size=cols, max_size=cols),
                               min_size=rows, max_size=rows)))
    # make every row and column connected
    for i in range(rows):
        e[i, i % cols] = max(e[i, i % cols], 1)
    for j in range(cols):
        e[j % rows, j] = max(e[j % rows, j], 1)
    punct = draw(st.sets(st.integers(0, cols - 1), max_size=1))
    p = Protomatrix(e, frozenset(punct))
    try:
        rate_of(p)
    except ProtographError:
        p = Protomatrix(e)
    return p


def test_isi_half_row_and_column_sums():
    p = builtin("isi-1/2")
    assert p.entries.shape == (3, 6)
    assert p.entries.sum(axis=1).tolist() == [6, 8, 6]
    assert p.entries.sum(axis=0).tolist() == [1, 2, 3, 4, 3, 7]
    assert p.entries[0, 5] == 4


def test_published_rates():
    assert rate_of(builtin("isi-1/2")) == Fraction(1, 2)
    assert rate_of(Protomatrix(NESTED_9_10)) == Fraction(9, 10)
    assert rate_of(Protomatrix(RC_27_41)) == Fraction(27, 41)


def test_rc_prefix_equals_nested_top():
    assert RC_27_41.shape == (14, 41)
    assert (RC_27_41[:3, :30] == NESTED_9_10).all()
    assert (RC_27_41[3:, 30:] == np.eye(11, dtype=int)).all()
    assert (RC_27_41[:3, 30:] == 0).all()


def test_nested_extends_base():
    assert (NESTED_9_10[:, :6] == ISI_HALF).all()
    ext = ExtensionColumns(3, NESTED_9_10[:, 6:].T)
    assert nest_extend(builtin("isi-1/2"), ext) == Protomatrix(NESTED_9_10)


def test_rc_extend_reproduces_lowest_rate():
    ext = RcExtension(RC_27_41[3:, :30])
    assert rc_extend(Protomatrix(NESTED_9_10), ext) == Protomatrix(RC_27_41)


@pytest.mark.parametrize("name", builtin_names())
def test_builtins_rates_and_growth(name):
    p = builtin(name)
    if name.startswith("rc-"):
        m = int(name.split("/")[1]) - 30
        assert rate_of(p) == Fraction(27, 30 + m)
        assert p == Protomatrix(RC_27_41[:3 + m, :30 + m])
    else:
        num, den = (int(t) for t in name.split("-")[1].split("/"))
        assert rate_of(p) == Fraction(num, den)
        assert p == Protomatrix(NESTED_9_10[:, :3 * den])
    rep = validate_linear_growth(p, {1, 2}, range(2, min(p.cols, 30)))
    assert rep.passed, rep.violations


def test_builtin_unknown_and_alias():
    assert builtin("nested-1/2") == builtin("isi-1/2")
    with pytest.raises(ProtographError):
        builtin("nested-10/11")
    with pytest.raises(ProtographError):
        load_code("no-such-code")


def test_linear_growth_examples():
    rep = validate_linear_growth(builtin("isi-1/2"), {1, 2}, range(2, 6))
    assert rep.passed and rep.sums == {2: 3, 3: 3, 4: 3, 5: 3}
    assert validate_linear_growth(Protomatrix(NESTED_9_10), {1, 2}, range(6, 30)).passed
    bad = Protomatrix([[1, 1, 2, 1], [0, 1, 2, 1], [0, 1, 1, 0]])
    rep = validate_linear_growth(bad, {1, 2}, [2, 3])
    assert not rep.passed and rep.violations == (3,)
    with pytest.raises(ProtographError):
        validate_linear_growth(bad, set(), [1])


def test_parse_examples():
    p = parse_protomatrix("1 1\n0\n1\n")
    assert p.entries.tolist() == [[1]]
    full = parse_protomatrix(serialize_protomatrix(Protomatrix(RC_27_41)))
    assert full.entries.shape == (14, 41)
    assert (full.entries[:3, :30] == NESTED_9_10).all()


@pytest.mark.parametrize("text", [
    "", "3\n0\n1 1 1\n", "1 2\n0\n1\n", "1 2\n0\n1 x\n", "1 2\n1 3\n1 1\n", "1 2\n2 1\n1 1\n",
    "2 2\n0\n1 1\n0 0\n", "1 1\n0\n-1\n", "1 1\n0\n99\n",
])
def test_parse_rejects_malformed(text):
    with pytest.raises(ProtographError):
        parse_protomatrix(text)


def test_serializer_format():
    text = serialize_protomatrix(builtin("isi-1/2"))
    lines = text.split("\n")
    assert lines[0] == "3 6" and lines[1] == "0"
    assert text.endswith("\n") and not any(ln.endswith(" ") for ln in lines)
    p = Protomatrix([[1, 2, 1]], frozenset({2}))
    assert serialize_protomatrix(p).split("\n")[1] == "1 3"


@given(protomatrices())
def test_roundtrip(p):
    q = parse_protomatrix(serialize_protomatrix(p))
    assert q == p and q.punctured == p.punctured


@given(protomatrices(), st.lists(st.integers(0, 2), min_size=1, max_size=4))
def test_nesting_raises_rate_and_keeps_prefix(p, col):
    col = (col * p.rows)[:p.rows]
    if not any(col):
        col[0] = 1
    child = nest_extend(p, ExtensionColumns(p.rows, [col]))
    assert rate_of(child) > rate_of(p)
    assert (child.entries[:, :p.cols] == p.entries).all()
    if not p.punctured:
        assert rate_of(child) == Fraction(p.cols - p.rows + 1, p.cols + 1)


@given(protomatrices(), st.integers(1, 3), st.data())
def test_rc_lowers_rate_and_keeps_payload(p, m, data):
    rows = [data.draw(st.lists(st.integers(0, 2), min_size=p.cols, max_size=p.cols)) for _ in range(m)]
    for r in rows:
        if not any(r):
            r[0] = 1
    child = rc_extend(p, RcExtension(rows))
    assert child.entries.shape == (p.rows + m, p.cols + m)
    assert rate_of(child) < rate_of(p)
    assert child.cols - child.rows == p.cols - p.rows
    assert (child.entries[p.rows:, p.cols:] == np.eye(m, dtype=int)).all()
    assert (child.entries[:p.rows, p.cols:] == 0).all()


def test_extension_errors():
    p = builtin("isi-1/2")
    with pytest.raises(ProtographError):
        nest_extend(p, ExtensionColumns(2, [(1, 1)]))
    with pytest.raises(ProtographError):
        RcExtension([(0,) * 6])
    with pytest.raises(ProtographError):
        rc_extend(p, RcExtension([(1, 1, 1)]))
    child = rc_extend(Protomatrix(NESTED_9_10), RcExtension(RC_27_41[3:7, :30]))
    assert rate_of(child) == Fraction(27, 34)


def test_protomatrix_invariants():
    with pytest.raises(ProtographError):
        Protomatrix([[1, 0], [0, 0]])
    with pytest.raises(ProtographError):
        Protomatrix([[1, 9]])
    with pytest.raises(ProtographError):
        Protomatrix([[1, 1]], frozenset({5}))
    with pytest.raises(ProtographError):
        rate_of(Protomatrix([[1, 1], [1, 1]]))
