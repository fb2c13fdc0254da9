import numpy as np
import pytest

from protoisi.codec import DecodeConfig
from protoisi.simulator import (CSV_HEADER, LONG_N2, PointResult, SimError, SimPlan, build_code, count_errors,
                                fer_rises, long_profile_code, run_point, run_sweep)

DESK10 = dict(code="isi-1/2", channel="dicode", n2=10)


@pytest.fixture(scope="module")
def code10():
    return build_code("isi-1/2", 4, 10)[1]


def test_plan_validation():
    with pytest.raises(SimError):
        SimPlan(ebno_db=(), **DESK10)
    with pytest.raises(SimError):
        SimPlan(ebno_db=(1.0,), min_frame_errors=0, **DESK10)
    with pytest.raises(SimError):
        SimPlan(ebno_db=(1.0,), profile="huge", **DESK10)


def test_plan_json_roundtrip():
    p = SimPlan(ebno_db=(1.0, 2.5), receiver=DecodeConfig(outer_iters=3), seed=11, **DESK10)
    assert SimPlan.from_json(p.to_json()) == p


def test_count_errors():
    assert count_errors([0, 1, 1, 0], [0, 1, 1, 0]) == (0, 0)
    assert count_errors([0, 1, 1, 0], [1, 1, 0, 0]) == (2, 1)


def test_clean_channel_point(code10):
    plan = SimPlan(ebno_db=(40.0,), min_frame_errors=1, max_frames=30, **DESK10)
    r = run_point(plan, 0, code10)
    assert r.frames == 30 and r.frame_errors == 0 and r.fer == 0.0 and r.truncated


@pytest.mark.parametrize("k", [1, 5, 17])
def test_injected_errors_are_counted_exactly(code10, k):
    plan = SimPlan(ebno_db=(40.0,), min_frame_errors=100, max_frames=10, inject_bits=k, **DESK10)
    r = run_point(plan, 0, code10)
    assert (r.bit_errors, r.frame_errors) == (k, 1)


def test_stop_rule_and_counting_invariants(code10):
    plan = SimPlan(ebno_db=(1.0,), min_frame_errors=5, max_frames=500, **DESK10)
    r = run_point(plan, 0, code10)
    assert r.frame_errors == 5 and not r.truncated
    assert r.fer == r.frame_errors / r.frames and 0 <= r.fer <= 1
    assert r.ber == r.bit_errors / (r.frames * r.k)


def test_worker_count_invariance(code10):
    plan = SimPlan(ebno_db=(1.5, 2.5), min_frame_errors=4, max_frames=120, seed=3, **DESK10)
    a = [run_point(plan, i, code10, workers=1) for i in range(2)]
    b = [run_point(plan, i, code10, workers=3, batch=5) for i in range(2)]
    strip = lambda r: (r.frames, r.bit_errors, r.frame_errors, r.truncated)
    assert [strip(r) for r in a] == [strip(r) for r in b]


def test_sweep_csv_and_replay(tmp_path):
    plan = SimPlan(ebno_db=(3.0, 1.0, 2.0), min_frame_errors=3, max_frames=60, **DESK10)
    res = run_sweep(plan)
    lines = res.to_csv().strip().split("\n")
    assert lines[0] == CSV_HEADER and len(lines) == 4
    assert [p.ebno_db for p in res.points] == [1.0, 2.0, 3.0]
    res.save(tmp_path / "sim.csv")
    replay = run_sweep(SimPlan.from_json((tmp_path / "sim.plan.json").read_text()))
    drop_time = lambda text: [ln.rsplit(",", 1)[0] for ln in text.split("\n")]
    assert drop_time(replay.to_csv()) == drop_time(res.to_csv())
    with pytest.raises(SimError):
        run_sweep(plan, ebno_range=(10.0, 20.0))


def test_fer_floor_stops_sweep():
    plan = SimPlan(ebno_db=(40.0, 41.0), min_frame_errors=1, max_frames=5, fer_floor=0.5, **DESK10)
    assert len(run_sweep(plan).points) == 1


def test_monotonicity_flag():
    lo = PointResult(1.0, 1000, 0, 10, 10, 0.0, 0, False)
    hi = PointResult(2.0, 1000, 0, 200, 10, 0.0, 0, False)
    assert fer_rises(lo, hi) and not fer_rises(hi, lo)
    assert not fer_rises(lo, PointResult(2.0, 1000, 0, 12, 10, 0.0, 0, False))


def test_long_profile_sizes():
    for name, n2 in LONG_N2.items():
        q = long_profile_code(name)
        assert q.n2 == n2 and 16_000 <= q.k <= 16_600
    rc = long_profile_code("rc-27/35")
    assert rc.k == 16_524 and rc.n == 35 * 4 * 153
    with pytest.raises(SimError):
        long_profile_code("custom.pm")
