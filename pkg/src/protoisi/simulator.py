"""Monte-Carlo FER/BER harness for the turbo-equalization receiver.

Every frame draws its randomness from ``stream(seed, point, frame)``, and
per-point tallies are reduced in frame order, stopping at the frame where the
stop rule is first met. The counts therefore do not depend on how many worker
processes computed the frames.
"""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelPoly, NoiseModel, make_trellis, parse_channel, transmit
from .codec import DecodeConfig, LdpcCode, encode, turbo_equalize
from .lifting import QcCode, lift, parse_qc, restrict, to_parity_matrix
from .protograph import load_code
from .rng import stream

CSV_HEADER = "ebno_db,frames,bit_errors,frame_errors,ber,fer,seconds"

# 16k-payload configuration: circulant size per nested rate (stage-1 factor 4);
# rate-compatible members are cut from the rc-27/41 lift at 4 x 153.
LONG_N2 = {"isi-1/2": 1364, "nested-2/3": 683, "nested-3/4": 455, "nested-4/5": 342,
           "nested-5/6": 273, "nested-6/7": 227, "nested-7/8": 195, "nested-8/9": 171,
           "nested-9/10": 153}
LONG_RC_PARENT = ("rc-27/41", 153)


class SimError(ValueError):
    pass


@dataclass(frozen=True)
class SimPlan:
    """One sweep: a code (builtin name, ``.pm`` or ``.qc`` file) lifted by
    ``n1`` x ``n2``, a channel, Eb/N0 points and a stop rule per point.
    ``inject_bits`` > 0 flips that many decoded payload bits of frame 0 at every
    point (a comparator self-test). ``profile="long"`` ignores ``n1``/``n2`` and
    uses the 16k-payload lifting of ``LONG_N2`` / ``LONG_RC_PARENT``."""

    code: str
    channel: str
    ebno_db: tuple
    n1: int = 4
    n2: int = 100
    lift_seed: int = 0
    min_frame_errors: int = 100
    max_frames: int = 1_000_000
    seed: int = 0
    receiver: DecodeConfig = DecodeConfig()
    fer_floor: float = 0.0
    inject_bits: int = 0
    profile: str = "desk"

    def __post_init__(self):
        if self.profile not in ("desk", "long"):
            raise SimError(f"unknown profile {self.profile!r}")
        object.__setattr__(self, "ebno_db", tuple(float(e) for e in self.ebno_db))
        if not self.ebno_db:
            raise SimError("Eb/N0 list is empty")
        if self.min_frame_errors < 1:
            raise SimError("min_frame_errors must be >= 1")
        if self.max_frames < 1:
            raise SimError("max_frames must be >= 1")
        if self.inject_bits < 0:
            raise SimError("inject_bits must be >= 0")
        if isinstance(self.receiver, dict):
            object.__setattr__(self, "receiver", DecodeConfig(**self.receiver))

    def to_json(self) -> str:
        d = asdict(self)
        d["ebno_db"] = list(self.ebno_db)
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SimPlan":
        d = json.loads(text)
        d["receiver"] = DecodeConfig(**d.get("receiver", {}))
        return cls(**d)

    def with_points(self, ebno_db) -> "SimPlan":
        d = asdict(self)
        d["ebno_db"] = tuple(ebno_db)
        d["receiver"] = self.receiver
        return SimPlan(**d)


@dataclass(frozen=True)
class PointResult:
    ebno_db: float
    frames: int
    bit_errors: int
    frame_errors: int
    k: int
    seconds: float
    seed: int
    truncated: bool  # max_frames hit before the frame-error target

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.frames * self.k)

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames

    def csv_row(self) -> str:
        return (f"{self.ebno_db!r},{self.frames},{self.bit_errors},{self.frame_errors},"
                f"{self.ber!r},{self.fer!r},{self.seconds:.3f}")


@dataclass
class SimResult:
    plan: SimPlan
    points: list = field(default_factory=list)
    monotonicity_flags: list = field(default_factory=list)  # (i, i+1) pairs where FER rises significantly

    def to_csv(self) -> str:
        return "\n".join([CSV_HEADER] + [p.csv_row() for p in self.points]) + "\n"

    def save(self, path):
        path = Path(path)
        path.write_text(self.to_csv())
        path.with_suffix(".plan.json").write_text(self.plan.to_json() + "\n")


# --- code and frame pipeline ----------------------------------------------------

def long_profile_code(ref: str, lift_seed: int = 0) -> QcCode:
    key = ref.strip().lower()
    if key == "nested-1/2":
        key = "isi-1/2"
    if key in LONG_N2:
        return lift(load_code(key), 4, LONG_N2[key], lift_seed)
    if key.startswith("rc-27/"):
        p = load_code(key)
        parent, n2 = LONG_RC_PARENT
        return restrict(lift(load_code(parent), 4, n2, lift_seed), p.rows, p.cols)
    raise SimError(f"no 16k-payload lifting defined for {ref!r}")


def build_code(ref: str, n1: int, n2: int, lift_seed: int = 0, profile: str = "desk") -> tuple:
    """(QcCode, LdpcCode) for a builtin name, ``.pm`` file or ``.qc`` file."""
    if str(ref).endswith(".qc"):
        q = parse_qc(Path(ref).read_text())
    elif profile == "long":
        q = long_profile_code(ref, lift_seed)
    else:
        q = lift(load_code(ref), n1, n2, lift_seed)
    return q, LdpcCode.from_matrix(to_parity_matrix(q), q.transmitted_bits)


def plan_code(plan: SimPlan) -> tuple:
    return build_code(plan.code, plan.n1, plan.n2, plan.lift_seed, plan.profile)


@dataclass(frozen=True, eq=False)
class _Context:
    code: LdpcCode
    h: ChannelPoly
    rate: float
    cfg: DecodeConfig
    seed: int
    inject_bits: int


_CTX: _Context | None = None


def _init_worker(ctx):
    global _CTX
    _CTX = ctx


def count_errors(payload, decoded) -> tuple:
    """(bit errors, frame error) for one frame."""
    bits = int(np.count_nonzero(np.asarray(payload) != np.asarray(decoded)))
    return bits, int(bits > 0)


def _run_frame(ctx: _Context, point: int, frame: int, noise: NoiseModel, trellis) -> tuple:
    rng = stream(ctx.seed, point, frame)
    code = ctx.code
    u = rng.integers(0, 2, code.k, dtype=np.uint8)
    cw = encode(code.encoder, u)
    y = transmit(cw[code.tx_mask], ctx.h, noise, rng)
    dec = turbo_equalize(y, code, ctx.h, noise, ctx.cfg, trellis).payload
    if ctx.inject_bits and frame == 0:
        dec = dec.copy()
        dec[:ctx.inject_bits] ^= 1
    return count_errors(u, dec)


def _frame_batch(args):
    point, frames, ebno = args
    ctx = _CTX
    noise = NoiseModel.from_ebno(ebno, ctx.rate)
    trellis = make_trellis(ctx.h)
    return [_run_frame(ctx, point, f, noise, trellis) for f in frames]


def run_point(plan: SimPlan, point: int, code: LdpcCode | None = None, workers: int = 1,
              batch: int = 16) -> PointResult:
    """Simulate ``plan.ebno_db[point]`` until ``min_frame_errors`` frame errors
    or ``max_frames`` frames."""
    if not 0 <= point < len(plan.ebno_db):
        raise SimError(f"point index {point} out of range")
    if code is None:
        code = plan_code(plan)[1]
    if plan.inject_bits > code.k:
        raise SimError("inject_bits exceeds the payload length")
    rate = float(code.k) / code.n_tx
    ctx = _Context(code, parse_channel(plan.channel), rate, plan.receiver, plan.seed, plan.inject_bits)
    ebno = plan.ebno_db[point]
    t0 = time.time()
    frames = bits = ferr = 0
    done = False
    ex = ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(ctx,)) if workers > 1 else None
    try:
        if ex is None:
            _init_worker(ctx)
        nxt = 0
        while not done and nxt < plan.max_frames:
            span = batch * max(1, workers)
            ids = list(range(nxt, min(nxt + span, plan.max_frames)))
            nxt = ids[-1] + 1
            if ex is None:
                out = _frame_batch((point, ids, ebno))
            else:
                chunks = [ids[i:i + batch] for i in range(0, len(ids), batch)]
                out = [r for part in ex.map(_frame_batch, [(point, c, ebno) for c in chunks]) for r in part]
            for b, f in out:  # in frame order
                frames += 1
                bits += b
                ferr += f
                if ferr >= plan.min_frame_errors:
                    done = True
                    break
    finally:
        if ex is not None:
            ex.shutdown()
    return PointResult(ebno, frames, bits, ferr, code.k, time.time() - t0, plan.seed, not done)


def fer_rises(a: PointResult, b: PointResult, z: float = 3.0) -> bool:
    """True if FER at the higher-SNR point ``b`` exceeds that at ``a`` by more
    than ``z`` pooled binomial standard deviations."""
    n1, n2 = a.frames, b.frames
    p = (a.frame_errors + b.frame_errors) / (n1 + n2)
    sd = math.sqrt(max(p * (1 - p), 1e-300) * (1 / n1 + 1 / n2))
    return b.fer - a.fer > z * sd


def run_sweep(plan: SimPlan, workers: int = 1, ebno_range=None, progress=None) -> SimResult:
    """All plan points in ascending Eb/N0 (optionally restricted to
    ``ebno_range`` = (lo, hi)); stops early once a point's FER falls below
    ``plan.fer_floor``."""
    pts = sorted(range(len(plan.ebno_db)), key=lambda i: plan.ebno_db[i])
    if ebno_range is not None:
        lo, hi = ebno_range
        pts = [i for i in pts if lo <= plan.ebno_db[i] <= hi]
    if not pts:
        raise SimError("no Eb/N0 points left to simulate")
    code = plan_code(plan)[1]
    res = SimResult(plan)
    for i in pts:
        try:
            r = run_point(plan, i, code, workers)
        except Exception as exc:
            raise SimError(f"point {i} (Eb/N0 = {plan.ebno_db[i]} dB): {exc}") from exc
        res.points.append(r)
        if progress:
            progress(r)
        if r.fer < plan.fer_floor:
            break
    res.monotonicity_flags = [(j, j + 1) for j in range(len(res.points) - 1)
                              if fer_rises(res.points[j], res.points[j + 1])]
    return res

