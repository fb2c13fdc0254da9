"""Binary-input ISI channels: trellis, AWGN transmission, log-MAP BCJR and
i.u.d. information-rate (SIR) estimation.

Conventions used throughout the package:

* bit 0 maps to symbol +1, bit 1 to symbol -1;
* LLR = ln P(bit=0) / P(bit=1);
* the channel starts in the all-(+1) state and is not terminated;
* E_s = 1 (taps have unit energy) so Eb/N0 = 1 / (2 R sigma^2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numba import njit

LLR_MAX = 50.0
SIR_BURN_IN = 100
_SIGMA_FLOOR = 1e-9


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelPoly:
    """FIR channel h(D) = taps[0] + taps[1] D + ... + taps[L] D^L."""

    taps: tuple
    name: str = ""

    def __post_init__(self):
        if len(self.taps) == 0:
            raise ChannelError("channel needs at least one tap")
        object.__setattr__(self, "taps", tuple(float(t) for t in self.taps))
        if not self.name:
            object.__setattr__(self, "name", "fir:" + ",".join(repr(t) for t in self.taps))

    @property
    def memory(self) -> int:
        return len(self.taps) - 1

    @property
    def energy(self) -> float:
        return float(sum(t * t for t in self.taps))


DICODE = ChannelPoly((1 / math.sqrt(2), -1 / math.sqrt(2)), "dicode")
EPR4 = ChannelPoly((0.5, 0.5, -0.5, -0.5), "epr4")
MEMORYLESS = ChannelPoly((1.0,), "fir:1")


def parse_channel(text: str) -> ChannelPoly:
    """Parse a channel selector: ``dicode``, ``epr4`` or ``fir:c0,c1,...``."""
    key = text.strip().lower()
    if key == "dicode":
        return DICODE
    if key == "epr4":
        return EPR4
    if key.startswith("fir:"):
        try:
            taps = tuple(float(c) for c in key[4:].split(",") if c.strip())
        except ValueError as exc:
            raise ChannelError(f"bad FIR taps in {text!r}") from exc
        return ChannelPoly(taps, key)
    raise ChannelError(f"unknown channel {text!r} (expected dicode, epr4 or fir:c0,c1,...)")


@dataclass(frozen=True)
class NoiseModel:
    sigma: float

    @classmethod
    def from_ebno(cls, ebno_db: float, rate) -> "NoiseModel":
        rate = float(Fraction(rate)) if isinstance(rate, str) else float(rate)
        if not 0 < rate <= 1:
            raise ChannelError(f"rate must lie in (0, 1], got {rate}")
        return cls(math.sqrt(1.0 / (2.0 * rate * 10.0 ** (ebno_db / 10.0))))

    def ebno_db(self, rate) -> float:
        return 10.0 * math.log10(1.0 / (2.0 * float(rate) * self.sigma**2))


@dataclass(frozen=True)
class Trellis:
    """State s holds the previous L bits; bit l-1 of s is the bit sent l steps ago."""

    n_states: int
    next_state: np.ndarray  # (S, 2) int64
    output: np.ndarray  # (S, 2) float64


def _symbol(bit):
    return 1.0 - 2.0 * bit


def make_trellis(h: ChannelPoly) -> Trellis:
    L = h.memory
    if L > 8:
        raise ChannelError(f"channel memory {L} exceeds the supported maximum of 8")
    n_states = 1 << L
    mask = n_states - 1
    next_state = np.zeros((n_states, 2), dtype=np.int64)
    output = np.zeros((n_states, 2))
    for s in range(n_states):
        past = sum(h.taps[l] * _symbol((s >> (l - 1)) & 1) for l in range(1, L + 1))
        for b in (0, 1):
            next_state[s, b] = ((s << 1) | b) & mask
            output[s, b] = h.taps[0] * _symbol(b) + past
    next_state.setflags(write=False)
    output.setflags(write=False)
    return Trellis(n_states, next_state, output)


def modulate(bits) -> np.ndarray:
    return 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)


def noiseless_output(bits, h: ChannelPoly) -> np.ndarray:
    x = modulate(bits)
    L = h.memory
    padded = np.concatenate([np.ones(L), x])
    return np.convolve(padded, np.asarray(h.taps))[L : L + len(x)]


def transmit(bits, h: ChannelPoly, noise: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    bits = np.asarray(bits)
    if bits.size == 0:
        raise ChannelError("nothing to transmit")
    y = noiseless_output(bits, h)
    if noise.sigma > 0:
        y = y + noise.sigma * rng.standard_normal(len(y))
    return y


@njit(cache=True)
def _lse(a, b):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


@njit(cache=True)
def _bcjr_kernel(y, prior, next_state, output, inv2s2, clamp):
    n = y.shape[0]
    S = next_state.shape[0]
    alpha = np.full((n + 1, S), -np.inf)
    alpha[0, 0] = 0.0
    for k in range(n):
        half = 0.5 * prior[k]
        top = -np.inf
        for s in range(S):
            a = alpha[k, s]
            if a == -np.inf:
                continue
            for b in range(2):
                d = y[k] - output[s, b]
                g = -d * d * inv2s2 + (half if b == 0 else -half)
                ns = next_state[s, b]
                alpha[k + 1, ns] = _lse(alpha[k + 1, ns], a + g)
        for s in range(S):
            if alpha[k + 1, s] > top:
                top = alpha[k + 1, s]
        for s in range(S):
            alpha[k + 1, s] -= top

    out = np.empty(n)
    beta = np.zeros(S)
    nbeta = np.empty(S)
    for k in range(n - 1, -1, -1):
        half = 0.5 * prior[k]
        num0 = -np.inf
        num1 = -np.inf
        top = -np.inf
        for s in range(S):
            acc = -np.inf
            for b in range(2):
                d = y[k] - output[s, b]
                ch = -d * d * inv2s2
                bn = beta[next_state[s, b]]
                if b == 0:
                    num0 = _lse(num0, alpha[k, s] + ch + bn)
                    acc = _lse(acc, ch + half + bn)
                else:
                    num1 = _lse(num1, alpha[k, s] + ch + bn)
                    acc = _lse(acc, ch - half + bn)
            nbeta[s] = acc
            if acc > top:
                top = acc
        for s in range(S):
            beta[s] = nbeta[s] - top
        v = num0 - num1
        if v > clamp:
            v = clamp
        elif v < -clamp:
            v = -clamp
        out[k] = v
    return out


def bcjr_detect(y, prior, h, noise: NoiseModel, trellis: Trellis | None = None, clamp=LLR_MAX):
    """Log-MAP BCJR; returns extrinsic LLRs (posterior minus prior), clamped to ``clamp``.

    The prior for each bit is excluded from its own branch metric, which is
    algebraically identical to subtracting it from the posterior but stays exact
    when the prior saturates.
    """
    y = np.ascontiguousarray(y, dtype=np.float64)
    prior = np.ascontiguousarray(prior, dtype=np.float64)
    if y.shape != prior.shape:
        raise ChannelError(f"sample/prior length mismatch: {y.shape} vs {prior.shape}")
    t = trellis if trellis is not None else make_trellis(h)
    sigma = max(noise.sigma, _SIGMA_FLOOR)
    return _bcjr_kernel(y, prior, t.next_state, t.output, 1.0 / (2.0 * sigma * sigma), float(clamp))


@njit(cache=True)
def _log_likelihood_steps(y, next_state, output, sigma):
    """Per-step -log2 p(y_k | y_<k) under i.u.d. inputs."""
    n = y.shape[0]
    S = next_state.shape[0]
    inv2s2 = 1.0 / (2.0 * sigma * sigma)
    norm = -0.5 * math.log(2.0 * math.pi * sigma * sigma) - math.log(2.0)
    alpha = np.full(S, -np.inf)
    alpha[0] = 0.0
    nalpha = np.empty(S)
    steps = np.empty(n)
    for k in range(n):
        for s in range(S):
            nalpha[s] = -np.inf
        for s in range(S):
            a = alpha[s]
            if a == -np.inf:
                continue
            for b in range(2):
                d = y[k] - output[s, b]
                ns = next_state[s, b]
                nalpha[ns] = _lse(nalpha[ns], a + norm - d * d * inv2s2)
        tot = -np.inf
        for s in range(S):
            tot = _lse(tot, nalpha[s])
        for s in range(S):
            alpha[s] = nalpha[s] - tot
        steps[k] = -tot / math.log(2.0)
    return steps


def estimate_sir(h: ChannelPoly, noise: NoiseModel, n: int, rng: np.random.Generator,
                 segments: int = 20):
    """Monte-Carlo i.u.d. information rate in bits/channel use.

    Returns ``(sir, stderr)``; the standard error is a jackknife over
    ``segments`` contiguous blocks after a burn-in of ``SIR_BURN_IN`` steps.
    """
    if n < 10_000:
        raise ChannelError(f"need at least 10^4 samples for SIR estimation, got {n}")
    if noise.sigma <= 0:
        raise ChannelError("SIR needs a positive noise level")
    if segments < 10:
        raise ChannelError("jackknife needs at least 10 segments")
    t = make_trellis(h)
    bits = rng.integers(0, 2, n + SIR_BURN_IN)
    clean = noiseless_output(bits, h)
    y = clean + noise.sigma * rng.standard_normal(len(clean))
    steps = _log_likelihood_steps(y, t.next_state, t.output, noise.sigma)
    # -log2 p(y_k | x): same expectation as 0.5 log2(2 pi e sigma^2), but it
    # cancels the noise fluctuation shared with the h(Y) term
    cond = (0.5 * math.log2(2 * math.pi * noise.sigma**2)
            + (y - clean) ** 2 / (2 * noise.sigma**2) / math.log(2.0))
    info = (steps - cond)[SIR_BURN_IN:]
    seg = len(info) // segments
    means = info[: seg * segments].reshape(segments, seg).mean(axis=1)
    total = means.sum()
    loo = (total - means) / (segments - 1)
    se = math.sqrt((segments - 1) / segments * np.sum((loo - loo.mean()) ** 2))
    return float(info.mean()), se


def ebno_limit(h: ChannelPoly, rate, lo_db=-3.0, hi_db=12.0, resolution=0.05, seed=0,
               target_se=0.005, n_start=1_000_000, n_max=6_400_000):
    """Eb/N0 (dB) at which the i.u.d. rate of ``h`` equals ``rate``.

    Bisection with common random numbers across probes; the sample size is
    grown until each probe's standard error is below ``target_se``.
    """
    from .rng import stream

    R = float(Fraction(rate)) if isinstance(rate, str) else float(rate)
    if not 0 < R < 1:
        raise ChannelError(f"rate must lie in (0, 1), got {rate}")
    state = {"n": int(n_start)}

    def sir_at(e):
        while True:
            val, se = estimate_sir(h, NoiseModel.from_ebno(e, R), state["n"], stream(seed, 0))
            if se < target_se or state["n"] >= n_max:
                return val
            state["n"] *= 4

    if sir_at(lo_db) >= R or sir_at(hi_db) <= R:
        raise ChannelError(f"[{lo_db}, {hi_db}] dB does not bracket the rate-{rate} limit")
    while hi_db - lo_db > resolution:
        mid = 0.5 * (lo_db + hi_db)
        if sir_at(mid) >= R:
            hi_db = mid
        else:
            lo_db = mid
    return 0.5 * (lo_db + hi_db)


def sir_sweep_csv(h: ChannelPoly, ebno_grid, rate, n=200_000, seed=0) -> str:
    """CSV ``ebno_db,sir_bits,stderr`` with an independent stream per point."""
    from .rng import stream

    R = float(Fraction(rate)) if isinstance(rate, str) else float(rate)
    rows = ["ebno_db,sir_bits,stderr"]
    for i, e in enumerate(ebno_grid):
        sir, se = estimate_sir(h, NoiseModel.from_ebno(float(e), R), int(n), stream(seed, 1, i))
        rows.append(f"{float(e)!r},{sir!r},{se!r}")
    return "\n".join(rows) + "\n"
