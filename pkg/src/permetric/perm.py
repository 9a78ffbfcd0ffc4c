"""Permutations, pattern containment, seeded sampling and serialization.

Everything is 1-indexed: a permutation of length n is stored as the tuple
``(pi(1), ..., pi(n))``.
"""
from __future__ import annotations

import bisect
import json
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np


class PermutationError(ValueError):
    """Invalid permutation input. ``code`` is one of
    ``empty``, ``duplicate``, ``out_of_range``, ``not_integer``."""

    def __init__(self, code: str, message: str, token: str | None = None):
        super().__init__(message)
        self.code = code
        self.token = token


@dataclass(frozen=True)
class Permutation:
    values: tuple[int, ...]

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        n = len(vals)
        if n == 0:
            raise PermutationError("empty", "permutation must have length >= 1")
        seen = bytearray(n + 1)
        for pos, v in enumerate(vals, start=1):
            if v < 1 or v > n:
                raise PermutationError(
                    "out_of_range", f"value {v} at position {pos} outside 1..{n}", str(v))
            if seen[v]:
                raise PermutationError(
                    "duplicate", f"value {v} repeated at position {pos}", str(v))
            seen[v] = 1

    @property
    def n(self) -> int:
        return len(self.values)

    def __len__(self):
        return len(self.values)

    def __call__(self, i: int) -> int:
        return self.values[i - 1]

    def __iter__(self):
        return iter(self.values)

    def __str__(self):
        return to_text(self)

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for i, v in enumerate(self.values, start=1):
            inv[v - 1] = i
        return Permutation(tuple(inv))

    def compose(self, other: "Permutation") -> "Permutation":
        """``(self o other)(i) = self(other(i))``."""
        if other.n != self.n:
            raise ValueError("length mismatch")
        return Permutation(tuple(self.values[j - 1] for j in other.values))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.int64)

    def points(self) -> list[tuple[Fraction, Fraction]]:
        """The unit-square view: one point ``(i/n, pi(i)/n)`` per position."""
        n = self.n
        return [(Fraction(i, n), Fraction(v, n)) for i, v in enumerate(self.values, start=1)]


def identity(n: int) -> Permutation:
    return Permutation(tuple(range(1, n + 1)))


def reverse(n: int) -> Permutation:
    return Permutation(tuple(range(n, 0, -1)))


def perm(*values: int) -> Permutation:
    """Shorthand: ``perm(2, 1)`` or ``perm(21)`` for single-digit one-liners."""
    if len(values) == 1 and values[0] > 9:
        return Permutation(tuple(int(c) for c in str(values[0])))
    return Permutation(tuple(values))


# -- parsing / serialization -------------------------------------------------

_SPLIT = re.compile(r"[\s,]+")


def parse_permutation(text: str) -> Permutation:
    tokens = [t for t in _SPLIT.split(text.strip()) if t]
    if not tokens:
        raise PermutationError("empty", "no values in input")
    values = []
    for tok in tokens:
        try:
            values.append(int(tok))
        except ValueError:
            raise PermutationError("not_integer", f"token {tok!r} is not an integer", tok) from None
    n = len(values)
    seen = set()
    for tok, v in zip(tokens, values):
        if v < 1 or v > n:
            raise PermutationError("out_of_range", f"token {tok!r} outside 1..{n}", tok)
        if v in seen:
            raise PermutationError("duplicate", f"duplicate value on token {tok!r}", tok)
        seen.add(v)
    return Permutation(tuple(values))


def to_text(p: Permutation) -> str:
    return " ".join(map(str, p.values))


def to_json(p: Permutation) -> str:
    return json.dumps({"n": p.n, "values": list(p.values)}, separators=(",", ":"))


def from_json(text: str | dict) -> Permutation:
    obj = json.loads(text) if isinstance(text, str) else text
    p = Permutation(tuple(obj["values"]))
    if p.n != obj["n"]:
        raise PermutationError("out_of_range", f"declared n={obj['n']} but {p.n} values given")
    return p


def read_permutations(path) -> list[Permutation]:
    """One permutation per non-blank line, or a JSON object / list of objects."""
    with open(path) as fh:
        text = fh.read()
    stripped = text.strip()
    if stripped.startswith("{"):
        return [from_json(stripped)]
    if stripped.startswith("["):
        return [from_json(obj) for obj in json.loads(stripped)]
    return [parse_permutation(line) for line in text.splitlines() if line.strip()]


# -- patterns ------------------------------------------------------------------

def pattern_of(points: Iterable[tuple[int, int]]) -> Permutation:
    """Order type (flattening) of points with distinct positions and values."""
    pts = sorted(points)
    if not pts:
        raise PermutationError("empty", "no points")
    xs = [p[0] for p in pts]
    if len(set(xs)) != len(xs):
        raise PermutationError("duplicate", "duplicate position")
    ys = [p[1] for p in pts]
    order = sorted(range(len(ys)), key=ys.__getitem__)
    ranks = [0] * len(ys)
    prev = None
    for r, idx in enumerate(order, start=1):
        if ys[idx] == prev:
            raise PermutationError("duplicate", f"duplicate value {prev}")
        prev = ys[idx]
        ranks[idx] = r
    return Permutation(tuple(ranks))


def flatten(values: Sequence[int]) -> tuple[int, ...]:
    """Ranks of a sequence of distinct numbers (positions implied)."""
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0] * len(values)
    for r, idx in enumerate(order, start=1):
        ranks[idx] = r
    return tuple(ranks)


def _find3(vals: Sequence[int], sigma: tuple[int, ...]) -> tuple[int, int, int] | None:
    # middle-element sweep: for each j, best left candidate and best right
    # candidate from sorted neighbour sets; O(n log n) up to list insertion.
    a, b, c = sigma
    left_low = a < b   # left value must be below the middle one
    right_low = c < b
    left_small = a < c  # left value must be below the right one
    n = len(vals)
    # suffix structure built once, consumed from the left
    right_sorted = sorted(vals[1:])
    left_sorted: list[int] = []
    pos_of = {v: i for i, v in enumerate(vals)}
    for j in range(n):
        v = vals[j]
        if j > 0:
            bisect.insort(left_sorted, vals[j - 1])
            del right_sorted[bisect.bisect_left(right_sorted, v)]
        if not left_sorted or not right_sorted:
            continue
        li = bisect.bisect_left(left_sorted, v)
        ri = bisect.bisect_left(right_sorted, v)
        # candidate ranges [lo, hi) in each sorted list
        l_lo, l_hi = (0, li) if left_low else (li, len(left_sorted))
        r_lo, r_hi = (0, ri) if right_low else (ri, len(right_sorted))
        if l_lo == l_hi or r_lo == r_hi:
            continue
        if left_small:
            x, y = left_sorted[l_lo], right_sorted[r_hi - 1]
            if x < y:
                return pos_of[x], j, pos_of[y]
        else:
            x, y = left_sorted[l_hi - 1], right_sorted[r_lo]
            if x > y:
                return pos_of[x], j, pos_of[y]
    return None


def _find_dfs(vals: Sequence[int], sigma: tuple[int, ...]) -> tuple[int, ...] | None:
    k = len(sigma)
    n = len(vals)
    chosen: list[int] = []

    def consistent(idx: int) -> bool:
        t = len(chosen)
        v = vals[idx]
        for s in range(t):
            if (vals[chosen[s]] < v) != (sigma[s] < sigma[t]):
                return False
        return True

    def rec(start: int) -> bool:
        t = len(chosen)
        if t == k:
            return True
        for idx in range(start, n - (k - t) + 1):
            if consistent(idx):
                chosen.append(idx)
                if rec(idx + 1):
                    return True
                chosen.pop()
        return False

    return tuple(chosen) if rec(0) else None


def find_pattern(p: Permutation | Sequence[int], sigma: Permutation) -> tuple[int, ...] | None:
    """1-indexed positions of one copy of ``sigma`` in ``p``, or None."""
    vals = p.values if isinstance(p, Permutation) else tuple(p)
    s = sigma.values
    if len(s) > len(vals):
        return None
    if len(s) == 1:
        return (1,)
    if len(s) == 2:
        up = s == (1, 2)
        best = 0  # index of running min (up) or max (down)
        for j in range(1, len(vals)):
            if (vals[best] < vals[j]) == up:
                return best + 1, j + 1
            if (vals[j] < vals[best]) == up:
                best = j
        return None
    if len(s) == 3:
        hit = _find3(vals, s)
    else:
        hit = _find_dfs(vals, s)
    return None if hit is None else tuple(i + 1 for i in hit)


def contains_pattern(p: Permutation | Sequence[int], sigma: Permutation) -> bool:
    return find_pattern(p, sigma) is not None


def avoids_all(p: Permutation | Sequence[int], forbidden: Iterable[Permutation]) -> bool:
    return all(find_pattern(p, s) is None for s in forbidden)


# -- randomness ----------------------------------------------------------------

def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(master_seed: int, index: int) -> int:
    """Per-trial seed; independent of scheduling order."""
    ss = np.random.SeedSequence([int(master_seed), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def random_permutation(n: int, seed) -> Permutation:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = make_rng(seed)
    vals = list(range(1, n + 1))
    # Fisher-Yates, drawing all swap indices in one call
    js = rng.integers(0, np.arange(n, 0, -1))
    for i, j in zip(range(n - 1, 0, -1), js[:-1]):
        vals[i], vals[j] = vals[j], vals[i]
    return Permutation(tuple(vals))


@dataclass(frozen=True)
class SampleDraw:
    positions: tuple[int, ...]
    induced: Permutation


def m_sample(p: Permutation, M: int, seed) -> SampleDraw:
    if M < 1 or M > p.n:
        raise ValueError(f"sample size M={M} must lie in 1..{p.n}")
    rng = make_rng(seed)
    pos = np.sort(rng.choice(p.n, size=M, replace=False)) + 1
    positions = tuple(int(x) for x in pos)
    induced = Permutation(flatten([p.values[i - 1] for i in positions]))
    return SampleDraw(positions, induced)


def random_dyck_path(n: int, seed) -> list[int]:
    """Uniform Dyck path of semilength n as a list of +1/-1 steps (cycle lemma)."""
    rng = make_rng(seed)
    steps = np.array([1] * n + [-1] * (n + 1))
    rng.shuffle(steps)
    prefix = np.cumsum(steps)
    start = int(np.argmin(prefix)) + 1  # first index attaining the minimum
    rotated = np.concatenate([steps[start:], steps[:start]])
    return [int(s) for s in rotated[:-1]]


def dyck_to_321_avoider(path: Sequence[int]) -> Permutation:
    """Bijection from Dyck paths to 321-avoiders.

    The peaks fix the left-to-right maxima: after up-run a_1 + ... + a_k and
    down-run total b_1 + ... + b_{k-1}, the k-th maximum has value
    a_1 + ... + a_k at position b_1 + ... + b_{k-1} + 1. The other values fill
    the remaining positions in increasing order.
    """
    n = sum(1 for s in path if s > 0)
    maxima = []
    ups = downs = 0
    i = 0
    while i < len(path):
        while i < len(path) and path[i] > 0:
            ups += 1
            i += 1
        maxima.append((downs + 1, ups))
        while i < len(path) and path[i] < 0:
            downs += 1
            i += 1
    vals = [0] * n
    used = set()
    for pos, v in maxima:
        vals[pos - 1] = v
        used.add(v)
    rest = iter(v for v in range(1, n + 1) if v not in used)
    for idx in range(n):
        if vals[idx] == 0:
            vals[idx] = next(rest)
    return Permutation(tuple(vals))


def random_member_321(n: int, seed) -> Permutation:
    """Uniform random 321-avoiding permutation of length n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return dyck_to_321_avoider(random_dyck_path(n, seed))
