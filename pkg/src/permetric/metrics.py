"""Distances between equal-length permutations, all returned as exact fractions.

Rectangle counts are over the unit-square points ``(i/n, pi(i)/n)`` with
closed boundaries. Internally everything is done on integer grid indices: a
closed interval of [0,1] selects a contiguous range of columns (or rows).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .perm import Permutation

ExactFraction = Fraction

KINDS = ("kt", "footrule", "rect", "dyadic", "square", "dsquare", "emd", "ppt")


class LengthMismatch(ValueError):
    pass


def _check_pair(p1: Permutation, p2: Permutation, min_n: int = 1) -> int:
    if p1.n != p2.n:
        raise LengthMismatch(f"length mismatch: {p1.n} vs {p2.n}")
    if p1.n < min_n:
        raise ValueError(f"need n >= {min_n}, got {p1.n}")
    return p1.n


def pairs(n: int) -> int:
    return n * (n - 1) // 2


# -- classical rank distances ---------------------------------------------------

def discordant_pairs(p1: Permutation, p2: Permutation) -> int:
    a, b = p1.as_array(), p2.as_array()
    s1 = np.sign(a[:, None] - a[None, :])
    s2 = np.sign(b[:, None] - b[None, :])
    return int(np.count_nonzero(s1 != s2)) // 2


def kendall_tau(p1: Permutation, p2: Permutation) -> Fraction:
    n = _check_pair(p1, p2, 2)
    return Fraction(discordant_pairs(p1, p2), pairs(n))


def footrule_sum(p1: Permutation, p2: Permutation) -> int:
    return int(np.abs(p1.as_array() - p2.as_array()).sum())


def spearman_footrule(p1: Permutation, p2: Permutation) -> Fraction:
    n = _check_pair(p1, p2, 2)
    return Fraction(footrule_sum(p1, p2), pairs(n))


# -- rectangle counting ---------------------------------------------------------

@dataclass(frozen=True)
class Rect:
    x_lo: Fraction
    x_hi: Fraction
    y_lo: Fraction
    y_hi: Fraction

    def __post_init__(self):
        for name in ("x_lo", "x_hi", "y_lo", "y_hi"):
            v = Fraction(getattr(self, name))
            if not 0 <= v <= 1:
                raise ValueError(f"{name}={v} outside [0,1]")
            object.__setattr__(self, name, v)
        if self.x_lo > self.x_hi or self.y_lo > self.y_hi:
            raise ValueError("empty rectangle")


def rect_count(p: Permutation, r: Rect) -> int:
    n = p.n
    return sum(
        1 for i, v in enumerate(p.values, start=1)
        if r.x_lo <= Fraction(i, n) <= r.x_hi and r.y_lo <= Fraction(v, n) <= r.y_hi
    )


def index_range(lo: Fraction, hi: Fraction, n: int) -> tuple[int, int]:
    """Grid indices j in 1..n with lo <= j/n <= hi, as an inclusive (first, last)."""
    first = max(1, math.ceil(lo * n))
    last = min(n, math.floor(hi * n))
    return first, last


def diff_prefix(p1: Permutation, p2: Permutation) -> np.ndarray:
    """S[a, b] = #{i <= a : p1(i) <= b} - #{i <= a : p2(i) <= b}, shape (n+1, n+1)."""
    n = p1.n
    D = np.zeros((n + 1, n + 1), dtype=np.int64)
    idx = np.arange(1, n + 1)
    D[idx, p1.as_array()] += 1
    D[idx, p2.as_array()] -= 1
    return D.cumsum(0).cumsum(1)


def _box_values(S: np.ndarray, cols: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Count differences for every (column range, row range) pair.

    ``cols`` and ``rows`` are (k, 2) arrays of inclusive 1-based ranges.
    """
    c0, c1 = cols[:, 0] - 1, cols[:, 1]
    r0, r1 = rows[:, 0] - 1, rows[:, 1]
    return (S[np.ix_(c1, r1)] - S[np.ix_(c0, r1)]
            - S[np.ix_(c1, r0)] + S[np.ix_(c0, r0)])


def rectangular_exact_count(p1: Permutation, p2: Permutation) -> int:
    """Max count discrepancy over all closed rectangles (unnormalized)."""
    n = _check_pair(p1, p2)
    S = diff_prefix(p1, p2)
    best = 0
    for a in range(1, n + 1):
        # rows of S[b] - S[a-1] for b >= a are the row-prefix sums of the
        # column block a..b; the best row window is max - min of the prefix
        block = S[a:] - S[a - 1]
        best = max(best, int((block.max(axis=1) - block.min(axis=1)).max()))
    return best


def rectangular_exact(p1: Permutation, p2: Permutation) -> Fraction:
    return Fraction(rectangular_exact_count(p1, p2), p1.n)


def rectangular_approx(p1: Permutation, p2: Permutation, epsilon) -> Fraction:
    """Lower approximation using only rectangles with endpoints on a grid of step epsilon/8."""
    eps = Fraction(epsilon)
    if not 0 < eps <= 1:
        raise ValueError(f"epsilon={epsilon} outside (0, 1]")
    n = _check_pair(p1, p2)
    step = eps / 8
    m = math.floor(1 / step)
    grid = [step * k for k in range(m + 1)]
    if grid[-1] != 1:
        grid.append(Fraction(1))
    # per grid point: last index at or below it, first index at or above it
    floor_idx = np.array([math.floor(g * n) for g in grid])
    ceil_idx = np.array([max(1, math.ceil(g * n)) for g in grid])

    col_ranges = set()
    for a in range(len(grid)):
        for b in range(a, len(grid)):
            lo, hi = ceil_idx[a], floor_idx[b]
            if lo <= hi:
                col_ranges.add((int(lo), int(hi)))
    if not col_ranges:
        return Fraction(0)
    cols = np.array(sorted(col_ranges))
    S = diff_prefix(p1, p2)
    # row-prefix of every column block, sampled at the grid
    P = S[cols[:, 1]] - S[cols[:, 0] - 1]
    upper = P[:, floor_idx]
    lower = P[:, ceil_idx - 1]
    run_min = np.minimum.accumulate(lower, axis=1)
    run_max = np.maximum.accumulate(lower, axis=1)
    best = max(int((upper - run_min).max()), int((run_max - upper).max()), 0)
    return Fraction(best, n)


# -- dyadic and square families -------------------------------------------------

def dyadic_depth(n: int) -> int:
    """Depth beyond which dyadic intervals hold at most one grid coordinate."""
    return max(0, math.ceil(math.log2(n))) + 1 if n > 1 else 1


def dyadic_ranges(n: int, depth: int | None = None) -> list[tuple[int, int, int]]:
    """(level, first, last) index ranges of nonempty closed dyadic intervals."""
    depth = dyadic_depth(n) if depth is None else depth
    out = []
    for k in range(depth + 1):
        size = 1 << k
        for i in range(size):
            first = max(1, -((-i * n) // size))
            last = ((i + 1) * n) // size
            if first <= last:
                out.append((k, first, last))
    return out


def dyadic_exact(p1: Permutation, p2: Permutation, depth: int | None = None) -> Fraction:
    n = _check_pair(p1, p2)
    ranges = np.array([(a, b) for _, a, b in dyadic_ranges(n, depth)])
    S = diff_prefix(p1, p2)
    return Fraction(int(np.abs(_box_values(S, ranges, ranges)).max()), n)


def dyadic_square_exact(p1: Permutation, p2: Permutation, depth: int | None = None) -> Fraction:
    n = _check_pair(p1, p2)
    S = diff_prefix(p1, p2)
    by_level: dict[int, list[tuple[int, int]]] = {}
    for k, a, b in dyadic_ranges(n, depth):
        by_level.setdefault(k, []).append((a, b))
    best = 0
    for rng in by_level.values():
        arr = np.array(rng)
        best = max(best, int(np.abs(_box_values(S, arr, arr)).max()))
    return Fraction(best, n)


@lru_cache(maxsize=64)
def _square_feasibility(n: int):
    """For every index range a..b, the side lengths (in units of 1/n) of
    closed intervals inside [0,1] that select exactly that range."""
    a, b = np.triu_indices(n)
    a, b = a + 1, b + 1
    lo = b - a
    right = np.where(b < n, b + 1, n)
    hi = right - (a - 1)
    closed = (a == 1) & (b == n)
    return np.stack([a, b], axis=1), lo, hi, closed


def square_exact(p1: Permutation, p2: Permutation) -> Fraction:
    n = _check_pair(p1, p2)
    S = diff_prefix(p1, p2)
    ranges, lo, hi, closed = _square_feasibility(n)
    best = 0
    # feasibility intervals have integer ends, so integer and half-integer
    # side lengths realize every distinct feasible set
    for twice_s in range(0, 2 * n + 1):
        s = twice_s / 2
        ok = (lo <= s) & ((s < hi) | ((s == hi) & closed))
        if not ok.any():
            continue
        sel = ranges[ok]
        best = max(best, int(np.abs(_box_values(S, sel, sel)).max()))
    return Fraction(best, n)


# -- planar distances -----------------------------------------------------------

def emd_exact(p1: Permutation, p2: Permutation):
    """Returns (normalized distance, witness bijection theta, unnormalized cost)."""
    from .matching import emd_cost_matrix, min_cost_assignment

    n = _check_pair(p1, p2, 2)
    res = min_cost_assignment(emd_cost_matrix(p1, p2))
    return Fraction(res.total_cost, pairs(n)), res.theta, res.total_cost


def emd(p1: Permutation, p2: Permutation) -> Fraction:
    return emd_exact(p1, p2)[0]


class CapExceeded(ValueError):
    pass


@lru_cache(maxsize=16)
def _all_perms(n: int):
    thetas = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    s = np.sign(thetas[:, :, None] - thetas[:, None, :])
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    inversions = ((s > 0) & upper).sum(axis=(1, 2))
    return thetas, inversions, upper


def planar_tau_exact_small(p1: Permutation, p2: Permutation, cap: int = 8) -> Fraction:
    n = _check_pair(p1, p2, 2)
    if n > cap:
        raise CapExceeded(f"n={n} exceeds cap {cap}; use planar_tau_bounds")
    thetas, inv, upper = _all_perms(n)
    a = p1.as_array()
    composed = p2.as_array()[thetas]  # row t: (p2 o theta_t)(i)
    s1 = np.sign(a[:, None] - a[None, :])
    s2 = np.sign(composed[:, :, None] - composed[:, None, :])
    disc = ((s1[None] != s2) & upper).sum(axis=(1, 2))
    return Fraction(int((inv + disc).min()), pairs(n))


def planar_tau_bounds(p1: Permutation, p2: Permutation) -> tuple[Fraction, Fraction]:
    e = emd(p1, p2)
    return e / 2, e


def distance(kind: str, p1: Permutation, p2: Permutation, epsilon=None) -> Fraction:
    """Dispatch by short name; ``rect`` uses the grid approximation when epsilon is given."""
    if kind == "kt":
        return kendall_tau(p1, p2)
    if kind == "footrule":
        return spearman_footrule(p1, p2)
    if kind == "rect":
        return rectangular_exact(p1, p2) if epsilon is None else rectangular_approx(p1, p2, epsilon)
    if kind == "dyadic":
        return dyadic_exact(p1, p2)
    if kind == "square":
        return square_exact(p1, p2)
    if kind == "dsquare":
        return dyadic_square_exact(p1, p2)
    if kind == "emd":
        return emd(p1, p2)
    if kind == "ppt":
        return planar_tau_exact_small(p1, p2)
    raise ValueError(f"unknown metric kind {kind!r}")


# -- exact log bounds -------------------------------------------------------------

def log2_bounds(x: Fraction, denom: int = 1024) -> tuple[Fraction, Fraction]:
    """Rational lo <= log2(x) <= hi with hi - lo <= 1/denom, certified by
    comparing integer powers (2**p <= x**denom)."""
    x = Fraction(x)
    if x <= 0:
        raise ValueError("log2 of non-positive number")
    xd_num, xd_den = x.numerator ** denom, x.denominator ** denom

    def below(p: int) -> bool:  # 2**(p/denom) <= x
        if p >= 0:
            return (1 << p) * xd_den <= xd_num
        return xd_den <= xd_num * (1 << -p)

    p = math.floor((math.log2(x.numerator) - math.log2(x.denominator)) * denom)
    while not below(p):
        p -= 1
    while below(p + 1):
        p += 1
    return Fraction(p, denom), Fraction(p + 1, denom)


def dyadic_bound_holds(rect: Fraction, dyadic: Fraction) -> bool:
    """rect / (8 log2^2(8/rect)) <= dyadic, decided in exact arithmetic."""
    if rect == 0:
        return True
    denom = 64
    while True:
        lo, hi = log2_bounds(8 / rect, denom)
        if rect <= 8 * lo * lo * dyadic:
            return True
        if rect > 8 * hi * hi * dyadic:
            return False
        denom *= 4
