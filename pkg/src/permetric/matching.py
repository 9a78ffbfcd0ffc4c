"""Assignment problems on permutation point sets.

Costs are integers in grid units: moving point ``(i, p1(i))`` onto
``(t, p2(t))`` costs ``|i - t| + |p1(i) - p2(t)|``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment

from .perm import Permutation


@dataclass(frozen=True)
class Assignment:
    theta: tuple[int, ...]  # 1-indexed: row i is matched to column theta[i-1]
    total_cost: int


def _as_matrix(c) -> np.ndarray:
    arr = np.asarray(c)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.round(arr)):
            raise ValueError("cost matrix must hold integers")
        arr = arr.astype(np.int64)
    return arr


def emd_cost_matrix(p1: Permutation, p2: Permutation) -> np.ndarray:
    i = np.arange(1, p1.n + 1)
    a, b = p1.as_array(), p2.as_array()
    return np.abs(i[:, None] - i[None, :]) + np.abs(a[:, None] - b[None, :])


def min_cost_assignment(c) -> Assignment:
    arr = _as_matrix(c)
    rows, cols = linear_sum_assignment(arr)
    theta = tuple(int(j) + 1 for j in cols[np.argsort(rows)])
    return Assignment(theta, int(arr[rows, cols].sum()))


def brute_force_assignment(c, cap: int = 8) -> Assignment:
    arr = _as_matrix(c)
    n = arr.shape[0]
    if n > cap:
        raise ValueError(f"n={n} exceeds brute-force cap {cap}")
    rows = list(range(n))
    best = None
    for cols in itertools.permutations(range(n)):
        cost = int(arr[rows, list(cols)].sum())
        if best is None or cost < best[0]:
            best = (cost, cols)
    return Assignment(tuple(j + 1 for j in best[1]), best[0])


def assignment_cost(c, theta) -> int:
    arr = _as_matrix(c)
    return int(sum(arr[i, t - 1] for i, t in enumerate(theta)))


# -- round-based dyadic matching ------------------------------------------------

def cell_index(coord: int, n: int, level: int) -> int:
    """Half-open dyadic cell of grid coordinate coord/n at a level; 1 falls in the last cell."""
    side = 1 << level
    return min(coord * side // n, side - 1)


@dataclass
class RoundRecord:
    round: int
    level: int  # dyadic level of the squares used in this round
    pairs: list[tuple[int, int]] = field(default_factory=list)


@dataclass
class DyadicMatching:
    assignment: Assignment
    rect: Fraction
    h: int
    rounds: list[RoundRecord]

    @property
    def normalized_cost(self) -> Fraction:
        n = len(self.assignment.theta)
        return Fraction(self.assignment.total_cost, n * (n - 1) // 2)

    def certified(self) -> bool:
        """normalized_cost**2 <= 2304 * rect, compared exactly."""
        return self.normalized_cost ** 2 <= 2304 * self.rect


def rounds_exponent(eps: Fraction) -> int:
    """Largest h with 2**h <= 1/(2 sqrt(eps)), clamped at 0."""
    h = 0
    while 4 ** (h + 2) * eps <= 1:
        h += 1
    return h


def dyadic_round_matching(p1: Permutation, p2: Permutation, rect: Fraction | None = None) -> DyadicMatching:
    """Round-based matching inside shrinking-to-growing dyadic squares.

    Round r uses squares of side 2**r * 2**-h (dyadic level h - r). Within a
    square the lowest unmatched p1 position is paired with the lowest
    unmatched p2 position.
    """
    from .metrics import rectangular_exact

    if p1.n != p2.n:
        raise ValueError("length mismatch")
    n = p1.n
    if n < 2:
        raise ValueError("need n >= 2")
    eps = rectangular_exact(p1, p2) if rect is None else Fraction(rect)
    if eps == 0:
        return DyadicMatching(Assignment(tuple(range(1, n + 1)), 0), eps, 0, [])
    h = rounds_exponent(eps)
    a, b = p1.values, p2.values
    theta = [0] * n
    free1 = list(range(1, n + 1))
    free2 = list(range(1, n + 1))
    rounds = []
    for r in range(h + 1):
        level = h - r
        buckets: dict[tuple[int, int], tuple[list[int], list[int]]] = {}
        for i in free1:
            key = (cell_index(i, n, level), cell_index(a[i - 1], n, level))
            buckets.setdefault(key, ([], []))[0].append(i)
        for t in free2:
            key = (cell_index(t, n, level), cell_index(b[t - 1], n, level))
            if key in buckets:
                buckets[key][1].append(t)
        rec = RoundRecord(r, level)
        for ones, twos in buckets.values():
            for i, t in zip(ones, twos):
                theta[i - 1] = t
                rec.pairs.append((i, t))
        matched1 = {i for i, _ in rec.pairs}
        matched2 = {t for _, t in rec.pairs}
        free1 = [i for i in free1 if i not in matched1]
        free2 = [t for t in free2 if t not in matched2]
        rounds.append(rec)
    assert not free1 and not free2
    cost = sum(abs(i - t) + abs(a[i - 1] - b[t - 1]) for i, t in enumerate(theta, start=1))
    return DyadicMatching(Assignment(tuple(theta), cost), eps, h, rounds)


# -- footrule transform -----------------------------------------------------------

def footrule_transform(gamma) -> tuple[int, ...]:
    """Stable ranking of a map [n] -> [n]: beta(i) < beta(j) iff
    gamma(i) < gamma(j), ties broken by i < j."""
    g = list(gamma)
    n = len(g)
    if any(not isinstance(v, (int, np.integer)) or not 1 <= v <= n for v in g):
        raise ValueError("gamma must map 1..n into 1..n")
    order = sorted(range(n), key=lambda i: (g[i], i))
    beta = [0] * n
    for rank, i in enumerate(order, start=1):
        beta[i] = rank
    return tuple(beta)


def displacement(f) -> int:
    """Sum of |i - f(i)| over 1-indexed i."""
    return sum(abs(i - v) for i, v in enumerate(f, start=1))
