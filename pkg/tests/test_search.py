import json
from fractions import Fraction

import numpy as np
import pytest

from protoisi.protograph import (ISI_HALF, NESTED_9_10, RC_27_41, Protomatrix, builtin, rate_of,
                                 validate_linear_growth)
from protoisi.search import (SearchError, SearchSpec, audit_prefilter, base_template_candidates,
                             nested_candidates, search_base_rate_half, search_nested_step, search_rc_step,
                             threshold)

SMALL = SearchSpec(x_values=(1, 2), y_values=(2, 3), keep_fraction=0.2)


def test_base_feasible_count():
    cands = list(base_template_candidates())
    assert len(cands) == 43_740 == (3 * 3) ** 3 * (4 * 15)
    assert any((c == ISI_HALF).all() for c in cands)


def test_base_candidates_satisfy_constraints():
    for c in base_template_candidates():
        assert c[:, 0].tolist() == [1, 0, 0] and c[:, 1].tolist() == [0, 1, 1]
        assert (c[1:, 2:].sum(axis=0) >= 3).all()


def test_nested_counts():
    assert len(nested_candidates(builtin("isi-1/2"), 3)) == 729
    assert len(nested_candidates(builtin("isi-1/2"), 1)) == 9
    cols = {tuple(c[0]) for c in nested_candidates(builtin("isi-1/2"), 1)}
    for j in range(6, 30):  # published extension columns are feasible points
        assert tuple(NESTED_9_10[:, j]) in cols


def test_published_rc_rows_are_feasible():
    rows = RC_27_41[3:, :30]
    assert rows.max() <= 2
    assert all(5 <= r.sum() <= 12 for r in rows)


def test_search_spec_validation():
    with pytest.raises(SearchError):
        SearchSpec(x_values=())
    with pytest.raises(SearchError):
        SearchSpec(keep_fraction=0.0)


def test_threshold_helper(dicode_surface):
    p = builtin("isi-1/2")
    th = threshold(p, dicode_surface, 0.0, 4.0, 0.05)
    assert 1.0 < th < 1.6
    assert threshold(p, dicode_surface, 0.0, 0.5, 0.05) == np.inf
    assert threshold(p, dicode_surface, 3.0, 4.0, 0.05) == 3.0


def test_small_base_search_deterministic(dicode_surface):
    a = search_base_rate_half(SMALL, dicode_surface)
    b = search_base_rate_half(SearchSpec(**{**SMALL.__dict__, "workers": 2}), dicode_surface)
    assert a.feasible == len(list(base_template_candidates(SMALL)))
    assert [(p.entries.tolist(), t) for p, t in a.candidates] == [(p.entries.tolist(), t) for p, t in b.candidates]
    ths = [t for _, t in a.candidates]
    assert ths == sorted(ths)
    for p, _ in a.candidates:
        assert rate_of(p) == Fraction(1, 2)
        assert validate_linear_growth(p, {1, 2}, range(2, 6)).passed
    report = json.loads(a.to_json())
    for key in ("spec", "seed", "candidates_evaluated", "best_pm", "threshold_db", "runtime_s"):
        assert key in report


def test_prefilter_audit(dicode_surface):
    res = search_base_rate_half(SMALL, dicode_surface)
    assert res.discarded
    audited = audit_prefilter(res, dicode_surface, SMALL, fraction=0.05, seed=1)
    assert len(audited) >= 1
    assert (audited >= res.best[1] - 0.1).all()


def test_base_search_rejects_uncovered_bracket(dicode_surface):
    with pytest.raises(SearchError):
        search_base_rate_half(SearchSpec(lo_db=-3.0), dicode_surface)


def test_nested_step_from_published_base(dicode_surface):
    ext, th, res = search_nested_step(builtin("isi-1/2"), dicode_surface, 1)
    assert res.feasible == 9
    assert rate_of(res.best[0]) == Fraction(4, 7)
    assert (res.best[0].entries[:, :6] == ISI_HALF).all()
    assert th == res.best[1]
    assert (ext.as_array()[1:].sum() >= 3)


def test_rc_step(epr4_surface):
    parent = Protomatrix(NESTED_9_10)
    ext, th, trace = search_rc_step(parent, epr4_surface, budget=40, seed=5)
    row = ext.a_rows[0]
    assert 5 <= sum(row) <= 12 and max(row) <= 2 and len(row) == 30
    assert len(trace) <= 40
    assert all(5 <= sum(r) <= 12 for r, _ in trace)
    assert th == min(t for _, t in trace)
    assert th <= 4.45
    again = search_rc_step(parent, epr4_surface, budget=40, seed=5)
    assert again[0] == ext and again[2] == trace
    with pytest.raises(SearchError):
        search_rc_step(parent, epr4_surface, budget=5)
