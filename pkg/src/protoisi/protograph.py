"""Protomatrices: representation, ``.pm`` I/O, rates, design constraints and
the two extension operators (nested lengthening and rate-compatible
row/column extension with an identity block).

Indices are 0-based in code and 1-based in files and error messages.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

DEFAULT_MAX_MULTIPLICITY = 8


class ProtographError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Protomatrix:
    entries: np.ndarray
    punctured: frozenset = field(default_factory=frozenset)
    max_multiplicity: int = DEFAULT_MAX_MULTIPLICITY

    def __post_init__(self):
        e = np.array(self.entries, dtype=np.int64, copy=True)
        if e.ndim != 2 or e.size == 0:
            raise ProtographError("protomatrix must be a non-empty 2-D array")
        if (e < 0).any():
            raise ProtographError("edge multiplicities must be non-negative")
        if e.max() > self.max_multiplicity:
            r, c = np.argwhere(e > self.max_multiplicity)[0]
            raise ProtographError(
                f"entry ({r + 1},{c + 1}) = {e[r, c]} exceeds max multiplicity {self.max_multiplicity}")
        for r in np.flatnonzero(e.sum(axis=1) == 0):
            raise ProtographError(f"row {r + 1} has no edges")
        for c in np.flatnonzero(e.sum(axis=0) == 0):
            raise ProtographError(f"column {c + 1} has no edges")
        p = frozenset(int(i) for i in self.punctured)
        bad = [i for i in p if not 0 <= i < e.shape[1]]
        if bad:
            raise ProtographError(f"punctured column {bad[0] + 1} out of range 1..{e.shape[1]}")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "punctured", p)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def transmitted(self) -> np.ndarray:
        return np.array([j not in self.punctured for j in range(self.cols)])

    def __eq__(self, other):
        if not isinstance(other, Protomatrix):
            return NotImplemented
        return (self.entries.shape == other.entries.shape
                and bool((self.entries == other.entries).all())
                and self.punctured == other.punctured)

    def __hash__(self):
        return hash((self.entries.shape, self.entries.tobytes(), self.punctured))

    def __repr__(self):
        return f"Protomatrix({self.rows}x{self.cols}, rate={rate_of(self)})"

    def submatrix(self, rows: int, cols: int) -> "Protomatrix":
        """Leading ``rows`` x ``cols`` block (punctured set restricted)."""
        return Protomatrix(self.entries[:rows, :cols],
                           frozenset(i for i in self.punctured if i < cols),
                           self.max_multiplicity)


@dataclass(frozen=True)
class ExtensionColumns:
    parent_rows: int
    cols: tuple  # each a tuple of length parent_rows

    def __post_init__(self):
        cols = tuple(tuple(int(v) for v in c) for c in self.cols)
        if not cols:
            raise ProtographError("extension needs at least one column")
        for k, c in enumerate(cols):
            if len(c) != self.parent_rows:
                raise ProtographError(f"extension column {k + 1} has length {len(c)}, expected {self.parent_rows}")
            if not any(c):
                raise ProtographError(f"extension column {k + 1} is all zero")
        object.__setattr__(self, "cols", cols)

    def as_array(self) -> np.ndarray:
        return np.array(self.cols, dtype=np.int64).T


@dataclass(frozen=True)
class RcExtension:
    """Rows of the A block; B is implicitly the m x m identity."""

    a_rows: tuple

    def __post_init__(self):
        rows = tuple(tuple(int(v) for v in r) for r in self.a_rows)
        if not rows:
            raise ProtographError("rate-compatible extension needs at least one row")
        for k, r in enumerate(rows):
            if not any(r):
                raise ProtographError(f"A row {k + 1} is all zero (new check would only see its own degree-1 node)")
        object.__setattr__(self, "a_rows", rows)

    @property
    def m(self) -> int:
        return len(self.a_rows)


def rate_of(p: Protomatrix) -> Fraction:
    n_tx = p.cols - len(p.punctured)
    if n_tx <= 0:
        raise ProtographError("no transmitted columns")
    r = Fraction(p.cols - p.rows - len(p.punctured), n_tx)
    if r <= 0:
        raise ProtographError(f"non-positive design rate {r}")
    return r


# --- .pm format -------------------------------------------------------------

def parse_protomatrix(text: str, max_multiplicity: int = DEFAULT_MAX_MULTIPLICITY) -> Protomatrix:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2:
        raise ProtographError("truncated .pm file: need header and puncture lines")
    try:
        head = [int(t) for t in lines[0].split()]
    except ValueError:
        raise ProtographError(f"line 1: malformed header {lines[0]!r}") from None
    if len(head) != 2 or head[0] < 1 or head[1] < 1:
        raise ProtographError(f"line 1: header must be 'C V' with positive counts, got {lines[0]!r}")
    C, V = head
    try:
        punct = [int(t) for t in lines[1].split()]
    except ValueError:
        raise ProtographError(f"line 2: malformed puncture list {lines[1]!r}") from None
    if not punct or punct[0] != len(punct) - 1:
        raise ProtographError(f"line 2: puncture count does not match list {lines[1]!r}")
    for i in punct[1:]:
        if not 1 <= i <= V:
            raise ProtographError(f"line 2: punctured index {i} out of range 1..{V}")
    if len(lines) != 2 + C:
        raise ProtographError(f"expected {C} matrix rows, found {len(lines) - 2}")
    rows = []
    for k, ln in enumerate(lines[2:], start=3):
        toks = ln.split()
        if len(toks) != V:
            raise ProtographError(f"line {k}: expected {V} entries, found {len(toks)}")
        try:
            rows.append([int(t) for t in toks])
        except ValueError:
            raise ProtographError(f"line {k}: non-integer entry in {ln!r}") from None
    return Protomatrix(np.array(rows), frozenset(i - 1 for i in punct[1:]), max_multiplicity)


def serialize_protomatrix(p: Protomatrix) -> str:
    punct = sorted(i + 1 for i in p.punctured)
    out = [f"{p.rows} {p.cols}", " ".join(str(v) for v in [len(punct), *punct])]
    out += [" ".join(str(int(v)) for v in row) for row in p.entries]
    return "\n".join(out) + "\n"


def load_protomatrix(path) -> Protomatrix:
    with open(path) as fh:
        return parse_protomatrix(fh.read())


# --- design constraints -----------------------------------------------------

@dataclass(frozen=True)
class GrowthReport:
    passed: bool
    sums: dict  # column -> sum over protected rows (0-based keys)
    violations: tuple  # 0-based columns summing to < 3

    def __bool__(self):
        return self.passed


def validate_linear_growth(p: Protomatrix, protected_rows: Iterable[int],
                           candidate_cols: Iterable[int], minimum: int = 3) -> GrowthReport:
    """Every candidate column must carry at least ``minimum`` edges into the
    protected rows (0-based indices)."""
    rows = sorted(set(protected_rows))
    cols = sorted(set(candidate_cols))
    if not rows or not cols:
        raise ProtographError("protected rows and candidate columns must be non-empty")
    if rows[0] < 0 or rows[-1] >= p.rows:
        raise ProtographError(f"protected rows out of range 1..{p.rows}")
    if cols[0] < 0 or cols[-1] >= p.cols:
        raise ProtographError(f"candidate columns out of range 1..{p.cols}")
    sums = {c: int(p.entries[rows, c].sum()) for c in cols}
    bad = tuple(c for c in cols if sums[c] < minimum)
    return GrowthReport(not bad, sums, bad)


# --- extensions -------------------------------------------------------------

def nest_extend(parent: Protomatrix, ext: ExtensionColumns) -> Protomatrix:
    """Lengthen ``parent`` by appending new variable-node columns: [H_l | H_e]."""
    if ext.parent_rows != parent.rows:
        raise ProtographError(f"extension built for {ext.parent_rows} rows, parent has {parent.rows}")
    return Protomatrix(np.hstack([parent.entries, ext.as_array()]), parent.punctured,
                       parent.max_multiplicity)


def rc_extend(parent: Protomatrix, ext: RcExtension) -> Protomatrix:
    """[[H, 0], [A, I_m]]: m new checks, each with its own new degree-1 variable."""
    for k, r in enumerate(ext.a_rows):
        if len(r) != parent.cols:
            raise ProtographError(f"A row {k + 1} has length {len(r)}, parent has {parent.cols} columns")
    m = ext.m
    top = np.hstack([parent.entries, np.zeros((parent.rows, m), dtype=np.int64)])
    bottom = np.hstack([np.array(ext.a_rows, dtype=np.int64), np.eye(m, dtype=np.int64)])
    return Protomatrix(np.vstack([top, bottom]), parent.punctured, parent.max_multiplicity)


# --- published matrices -----------------------------------------------------

_ISI_HALF = """\
1 0 0 1 0 4
0 1 2 1 2 2
0 1 1 2 1 1"""

_RC_27_41 = """\
1 0 0 1 0 4 2 0 0 0 0 2 2 0 0 0 0 1 0 0 0 2 0 0 0 0 0 0 0 1 0 0 0 0 0 0 0 0 0 0 0
0 1 2 1 2 2 1 2 2 2 1 2 2 2 2 2 2 1 2 2 2 1 2 1 1 1 1 2 2 1 0 0 0 0 0 0 0 0 0 0 0
0 1 1 2 1 1 2 1 1 1 2 1 1 1 1 1 1 2 2 1 1 2 1 2 2 2 2 2 1 2 0 0 0 0 0 0 0 0 0 0 0
0 0 1 1 1 1 1 0 1 0 0 1 0 0 0 0 0 0 0 0 0 0 0 1 1 0 0 1 0 0 1 0 0 0 0 0 0 0 0 0 0
0 0 1 1 1 2 0 0 1 0 1 0 1 1 1 0 1 0 0 0 0 0 0 0 0 0 0 0 0 1 0 1 0 0 0 0 0 0 0 0 0
0 0 1 1 1 1 1 0 1 1 0 1 1 0 1 1 1 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 1 0 0 0 0 0 0 0 0
0 1 0 0 0 2 0 0 0 0 1 1 1 0 1 0 1 0 0 0 0 1 0 1 0 0 0 1 0 1 0 0 0 1 0 0 0 0 0 0 0
0 0 1 0 1 1 0 0 0 0 0 0 1 1 0 0 0 0 0 0 0 0 1 0 0 1 0 0 0 1 0 0 0 0 1 0 0 0 0 0 0
0 0 0 0 0 2 0 0 1 0 0 0 1 0 0 0 1 0 0 0 0 1 1 0 1 0 0 0 0 1 0 0 0 0 0 1 0 0 0 0 0
0 0 0 0 0 2 0 0 0 0 0 1 0 1 0 0 0 0 0 0 1 0 0 0 0 0 0 1 0 1 0 0 0 0 0 0 1 0 0 0 0
0 0 0 0 0 1 0 0 0 0 0 1 1 1 0 0 0 0 0 0 0 1 0 0 0 0 0 1 1 1 0 0 0 0 0 0 0 1 0 0 0
0 0 0 0 0 2 0 0 1 0 0 1 0 0 0 0 1 0 0 0 1 1 0 0 0 0 1 0 0 1 0 0 0 0 0 0 0 0 1 0 0
0 0 0 0 0 1 0 0 0 0 0 0 0 0 0 0 1 0 0 0 1 0 0 0 1 0 0 1 1 1 0 0 0 0 0 0 0 0 0 1 0
0 0 0 0 0 1 1 0 0 1 0 0 0 0 0 1 0 0 0 0 1 0 0 0 1 0 1 1 0 0 0 0 0 0 0 0 0 0 0 0 1"""

# The rate-9/10 nested matrix is the top-left 3x30 block of the 14x41 matrix;
# it is kept as its own literal so the two transcriptions can be cross-checked.
_NESTED_9_10 = """\
1 0 0 1 0 4 2 0 0 0 0 2 2 0 0 0 0 1 0 0 0 2 0 0 0 0 0 0 0 1
0 1 2 1 2 2 1 2 2 2 1 2 2 2 2 2 2 1 2 2 2 1 2 1 1 1 1 2 2 1
0 1 1 2 1 1 2 1 1 1 2 1 1 1 1 1 1 2 2 1 1 2 1 2 2 2 2 2 1 2"""


def _literal(text):
    return np.array([[int(v) for v in ln.split()] for ln in text.splitlines()], dtype=np.int64)


ISI_HALF = _literal(_ISI_HALF)
NESTED_9_10 = _literal(_NESTED_9_10)
RC_27_41 = _literal(_RC_27_41)


def builtin_names() -> list:
    names = ["isi-1/2"] + [f"nested-{n}/{n + 1}" for n in range(2, 10)]
    return names + [f"rc-27/{30 + m}" for m in range(1, 12)]


def builtin(name: str) -> Protomatrix:
    """Published protomatrices by name (``isi-1/2``, ``nested-n/(n+1)``, ``rc-27/(30+m)``)."""
    key = name.strip().lower()
    if key in ("isi-1/2", "nested-1/2"):
        return Protomatrix(ISI_HALF)
    if key.startswith("nested-"):
        try:
            num, den = (int(t) for t in key[7:].split("/"))
        except ValueError:
            raise ProtographError(f"unknown code {name!r}") from None
        if den == num + 1 and 1 <= num <= 9:
            return Protomatrix(NESTED_9_10[:, : 3 * den])
    if key.startswith("rc-27/"):
        try:
            m = int(key[6:]) - 30
        except ValueError:
            raise ProtographError(f"unknown code {name!r}") from None
        if 1 <= m <= 11:
            return Protomatrix(RC_27_41[: 3 + m, : 30 + m])
    raise ProtographError(f"unknown code {name!r}; known: {', '.join(builtin_names())}")


def load_code(ref: str) -> Protomatrix:
    """Builtin name or path to a ``.pm`` file."""
    try:
        return builtin(ref)
    except ProtographError:
        if ref.endswith(".pm"):
            return load_protomatrix(ref)
        raise
