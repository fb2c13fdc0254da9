import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from protoisi.channel import DICODE, EPR4, NoiseModel
from protoisi.pexit import (DEFAULT_IA_GRID, ExitSurface, PexitError, genie_detector_mi, measure_detector_exit,
                            mi_from_llr, monotone_smooth, pexit_converges, surface_span, threshold_search)
from protoisi.protograph import Protomatrix, builtin, builtin_names, rate_of


@pytest.fixture(scope="module")
def small_surface():
    return measure_detector_exit(DICODE, [0.0, 1.0, 2.0], DEFAULT_IA_GRID, 100_000, seed=3)


def flat_surface(value, lo=-5.0, hi=10.0):
    return ExitSurface("flat", [lo, hi], DEFAULT_IA_GRID, np.full((2, len(DEFAULT_IA_GRID)), value))


def test_mi_estimator_limits(rng):
    bits = rng.integers(0, 2, 1000)
    assert mi_from_llr(50 * (1 - 2.0 * bits), bits) > 0.999
    assert abs(mi_from_llr(np.zeros(1000), bits)) < 1e-12


def test_surface_properties(small_surface):
    t = small_surface.table
    assert (np.diff(t, axis=0) >= 0).all() and (np.diff(t, axis=1) >= 0).all()
    assert (t[:, -1] >= t[:, 0]).all()
    raw = np.array(small_surface.meta["raw"])
    assert np.max(np.abs(raw - t)) < 0.02  # smoothing only irons out Monte-Carlo noise


@pytest.mark.parametrize("h", [DICODE, EPR4], ids=["dicode", "epr4"])
def test_perfect_priors_match_genie(h):
    s = measure_detector_exit(h, [0.0, 3.0], [0.0, 1.0], 100_000, seed=1)
    for k, e in enumerate(s.ebno_grid):
        assert abs(s.table[k, 1] - genie_detector_mi(h, NoiseModel.from_ebno(e, 1.0))) < 0.02


def test_heavy_noise_gives_no_information():
    e = NoiseModel(1e3).ebno_db(1.0)
    s = measure_detector_exit(DICODE, [e], [0.0], 100_000, seed=2)
    assert s.table[0, 0] < 0.01


def test_measure_errors():
    with pytest.raises(PexitError):
        measure_detector_exit(DICODE, [1.0, 0.0], DEFAULT_IA_GRID, 100_000)
    with pytest.raises(PexitError):
        measure_detector_exit(DICODE, [0.0], DEFAULT_IA_GRID, 1000)
    with pytest.raises(PexitError):
        measure_detector_exit(DICODE, [0.0], [0.0, 1.5], 100_000)


def test_measure_deterministic_across_workers():
    a = measure_detector_exit(DICODE, [0.0, 1.0], [0.0, 0.5, 1.0], 100_000, seed=4, workers=1)
    b = measure_detector_exit(DICODE, [0.0, 1.0], [0.0, 0.5, 1.0], 100_000, seed=4, workers=3)
    assert np.array_equal(a.table, b.table)


def test_save_load_roundtrip(small_surface, tmp_path):
    path = tmp_path / "s.csv"
    small_surface.save(path)
    assert path.read_text().splitlines()[0] == "ebno_db,i_a,i_e"
    back = ExitSurface.load(path)
    assert np.array_equal(back.table, small_surface.table)
    assert np.array_equal(back.ebno_grid, small_surface.ebno_grid)
    assert back.channel == "dicode" and back.meta["seed"] == 3


def test_monotone_smooth_is_monotone(rng):
    t = monotone_smooth(rng.random((6, 9)))
    assert (np.diff(t, axis=0) >= 0).all() and (np.diff(t, axis=1) >= 0).all()
    good = np.add.outer(np.linspace(0, 0.3, 4), np.linspace(0, 0.6, 5))
    assert np.allclose(monotone_smooth(good), good)


def test_rate_referencing(small_surface):
    assert small_surface.coordinate(1.0, 0.5) == pytest.approx(1.0 - 3.0103, abs=1e-4)
    lo, hi = surface_span(small_surface, 0.5)
    assert lo == pytest.approx(3.0103, abs=1e-4) and hi == pytest.approx(5.0103, abs=1e-4)
    with pytest.raises(PexitError):
        pexit_converges(builtin("isi-1/2"), small_surface, 0.0)


def test_perfect_detector_converges_in_one_iteration():
    r = pexit_converges(Protomatrix([[1, 1]]), flat_surface(1.0), 0.0)
    assert r.converged and r.iterations == 1


def test_useless_detector_never_converges():
    r = pexit_converges(builtin("isi-1/2"), flat_surface(0.0), 0.0)
    assert not r.converged


def test_isi_half_examples(dicode_surface):
    p = builtin("isi-1/2")
    assert pexit_converges(p, dicode_surface, 1.6).converged
    assert not pexit_converges(p, dicode_surface, 0.5).converged


@pytest.mark.parametrize("name", builtin_names())
def test_state_bounded_and_convergence_monotone(name, dicode_surface):
    p = builtin(name)
    lo, hi = surface_span(dicode_surface, rate_of(p))
    grid = [e for e in np.arange(0.0, 6.01, 0.5) if lo <= e <= hi]
    flags = []
    for e in grid:
        r = pexit_converges(p, dicode_surface, e)
        assert np.all((r.trace >= 0) & (r.trace <= 1))
        flags.append(r.converged)
    first = flags.index(True) if True in flags else len(flags)
    assert all(flags[first:])


@given(st.permutations(range(6)), st.permutations(range(3)))
def test_threshold_permutation_invariance(dicode_surface, cols, rows):
    p = builtin("isi-1/2")
    q = Protomatrix(p.entries[np.ix_(rows, cols)])
    base = threshold_search(p, dicode_surface, 0.0, 4.0, 0.01)
    assert threshold_search(q, dicode_surface, 0.0, 4.0, 0.01) == base


def test_nested_ordering(dicode_surface):
    th = [threshold_search(builtin(n), dicode_surface, 0.5, 6.0) for n in builtin_names()[:9]]
    assert all(b > a - 0.15 for a, b in zip(th, th[1:]))


def test_threshold_bracket_errors(dicode_surface):
    p = builtin("isi-1/2")
    with pytest.raises(PexitError):
        threshold_search(p, dicode_surface, 3.0, 2.0)
    with pytest.raises(PexitError):
        threshold_search(p, dicode_surface, 0.0, 0.5)
    with pytest.raises(PexitError):
        threshold_search(p, dicode_surface, 2.0, 4.0)
