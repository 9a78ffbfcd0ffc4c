"""Blow-ups of permutations and the search for blow-ups inside a pattern class."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .perm import Permutation, avoids_all, find_pattern, identity, pattern_of, reverse


@dataclass(frozen=True)
class BlowUpSpec:
    base: Permutation
    block_sizes: tuple[int, ...]
    block_contents: tuple[Permutation, ...] | None = None

    def __post_init__(self):
        if len(self.block_sizes) != self.base.n:
            raise ValueError(f"need {self.base.n} block sizes, got {len(self.block_sizes)}")
        if any(s < 1 for s in self.block_sizes):
            raise ValueError("block sizes must be positive")
        if self.block_contents is not None:
            if len(self.block_contents) != self.base.n:
                raise ValueError("one content permutation per block is required")
            for s, c in zip(self.block_sizes, self.block_contents):
                if c.n != s:
                    raise ValueError(f"block content {c} does not have size {s}")

    @classmethod
    def uniform(cls, base: Permutation, k: int, contents: Sequence[Permutation]) -> "BlowUpSpec":
        return cls(base, (k,) * base.n, tuple(contents))


@dataclass(frozen=True)
class HereditaryProperty:
    forbidden: tuple[Permutation, ...]

    def __post_init__(self):
        if not self.forbidden:
            raise ValueError("at least one forbidden pattern is required")

    @classmethod
    def avoiding(cls, *patterns: Permutation) -> "HereditaryProperty":
        return cls(tuple(patterns))

    def contains(self, p: Permutation | Sequence[int]) -> bool:
        return avoids_all(p, self.forbidden)

    def violation(self, p: Permutation | Sequence[int]) -> tuple[Permutation, tuple[int, ...]] | None:
        for sigma in self.forbidden:
            w = find_pattern(p, sigma)
            if w is not None:
                return sigma, w
        return None

    @property
    def shortest(self) -> int:
        return min(s.n for s in self.forbidden)

    def __str__(self):
        return "Av(" + ",".join(str(s) for s in self.forbidden) + ")"


def realize_blowup(spec: BlowUpSpec) -> Permutation:
    if spec.block_contents is None:
        raise ValueError("block contents are required to realize a blow-up")
    a = spec.base.values
    sizes = spec.block_sizes
    # block t occupies the value range after all blocks with a smaller base value
    offset = {}
    acc = 0
    for t in sorted(range(len(a)), key=lambda t: a[t]):
        offset[t] = acc
        acc += sizes[t]
    out = []
    for t, content in enumerate(spec.block_contents):
        out.extend(offset[t] + v for v in content.values)
    return Permutation(tuple(out))


def _realize_values(base: Sequence[int], contents: Sequence[Sequence[int]]) -> list[int]:
    order = sorted(range(len(base)), key=lambda t: base[t])
    offset = [0] * len(base)
    acc = 0
    for t in order:
        offset[t] = acc
        acc += len(contents[t])
    out = []
    for t, c in enumerate(contents):
        out.extend(offset[t] + v for v in c)
    return out


def blowup_boundaries(p: Permutation, alpha: Permutation) -> tuple[int, ...] | None:
    """Boundaries k_1 < ... < k_{m+1} (1-indexed, k_1 = 1, k_{m+1} = n+1) cutting p
    into blocks ordered like alpha, or None."""
    n, m = p.n, alpha.n
    if m > n:
        return None
    v = p.values
    a = alpha.values
    spans: list[tuple[int, int]] = []  # (min, max) value per placed block
    cuts = [1]

    def rec(t: int, start: int) -> bool:
        if t == m:
            return start == n + 1
        remaining = m - t - 1
        lo = hi = v[start - 1]
        for end in range(start, n + 1 - remaining):
            x = v[end - 1]
            lo, hi = min(lo, x), max(hi, x)
            if hi - lo != end - start:
                continue
            if all((lo > smax) == (a[t] > a[j]) for j, (smin, smax) in enumerate(spans)) and \
               all((hi < smin) == (a[t] < a[j]) for j, (smin, smax) in enumerate(spans)):
                spans.append((lo, hi))
                cuts.append(end + 1)
                if rec(t + 1, end + 1):
                    return True
                spans.pop()
                cuts.pop()
        return False

    return tuple(cuts) if rec(0, 1) else None


def is_blowup_of(p: Permutation, alpha: Permutation) -> bool:
    return blowup_boundaries(p, alpha) is not None


# -- existence search -------------------------------------------------------------

class Yes:
    def __init__(self, spec: BlowUpSpec, explored: int):
        self.spec = spec
        self.explored = explored

    def __repr__(self):
        return f"Yes(explored={self.explored})"


class No:
    def __init__(self, explored: int):
        self.explored = explored

    def __repr__(self):
        return f"No(explored={self.explored})"


class Unknown:
    def __init__(self, explored: int):
        self.explored = explored

    def __repr__(self):
        return f"Unknown(explored={self.explored})"


def exists_kblowup_in(alpha: Permutation, k: int, prop: HereditaryProperty, budget: int = 10 ** 6):
    """Search for a k-blow-up of alpha lying in prop.

    Monotone contents (all increasing, then all decreasing) are tried first.
    Otherwise block contents are assigned left to right in lexicographic order,
    abandoning any prefix whose realization already contains a forbidden pattern.
    ``budget`` caps the number of block assignments examined.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    m = alpha.n
    explored = 0
    for mono in (identity(k), reverse(k)):
        explored += 1
        spec = BlowUpSpec.uniform(alpha, k, [mono] * m)
        if prop.contains(realize_blowup(spec)):
            return Yes(spec, explored)
        if k == 1:
            return No(explored)
    contents = [tuple(c) for c in itertools.permutations(range(1, k + 1))]
    chosen: list[tuple[int, ...]] = []
    a = alpha.values
    out_of_budget = False

    def rec(t: int) -> bool:
        nonlocal explored, out_of_budget
        sub = pattern_of([(j + 1, a[j]) for j in range(t + 1)]).values
        for c in contents:
            if explored >= budget:
                out_of_budget = True
                return False
            explored += 1
            chosen.append(c)
            if prop.contains(_realize_values(sub, chosen)):
                if t + 1 == m or rec(t + 1):
                    return True
            chosen.pop()
            if out_of_budget:
                return False
        return False

    if rec(0):
        spec = BlowUpSpec.uniform(alpha, k, [Permutation(c) for c in chosen])
        return Yes(spec, explored)
    if out_of_budget:
        return Unknown(explored)
    return No(explored)


@dataclass
class KStarResult:
    kind: str  # "finite" | "infinite" | "unknown"
    value: int  # k* when finite, the cap when infinite, the k that ran out of budget when unknown
    witnesses: dict = field(default_factory=dict)  # k -> BlowUpSpec found inside the class
    explored: int = 0

    @property
    def finite(self) -> bool:
        return self.kind == "finite"

    def __str__(self):
        if self.kind == "finite":
            return str(self.value)
        if self.kind == "infinite":
            return f"Infinite({self.value})"
        return f"Unknown(k={self.value})"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value, "explored": self.explored,
                "witnesses": {str(k): [list(c.values) for c in s.block_contents]
                              for k, s in sorted(self.witnesses.items())}}


def k_star_alpha(alpha: Permutation, prop: HereditaryProperty, k_cap: int = 4, budget: int = 10 ** 6) -> KStarResult:
    """Smallest k <= k_cap with no k-blow-up of alpha in prop.

    The first No settles it: a (k+1)-blow-up contains a k-blow-up, and the
    class is closed under patterns.
    """
    if k_cap < 1 or budget < 1:
        raise ValueError("caps must be positive")
    res = KStarResult("infinite", k_cap)
    for k in range(1, k_cap + 1):
        r = exists_kblowup_in(alpha, k, prop, budget)
        res.explored += r.explored
        if isinstance(r, Yes):
            res.witnesses[k] = r.spec
        elif isinstance(r, No):
            res.kind, res.value = "finite", k
            return res
        else:
            res.kind, res.value = "unknown", k
            return res
    return res


MAX_T = 6


def k_star_T(T: int, prop: HereditaryProperty, k_cap: int = 4, budget: int = 10 ** 6) -> KStarResult:
    """Largest finite k*(alpha) over all alpha of length T."""
    if not 1 <= T <= MAX_T:
        raise ValueError(f"T must lie in 1..{MAX_T} for exhaustive enumeration")
    best = None
    explored = 0
    for vals in itertools.permutations(range(1, T + 1)):
        r = k_star_alpha(Permutation(vals), prop, k_cap, budget)
        explored += r.explored
        if r.kind == "unknown":
            r.explored = explored
            return r
        if r.finite and (best is None or r.value > best):
            best = r.value
    if best is None:
        return KStarResult("infinite", k_cap, explored=explored)
    return KStarResult("finite", best, explored=explored)


# -- grid detection ---------------------------------------------------------------

def grid_cells(p: Permutation, t: int) -> tuple[np.ndarray, np.ndarray]:
    n = p.n
    i = np.arange(1, n + 1, dtype=np.int64)
    cols = np.minimum(i * t // n, t - 1)
    rows = np.minimum(p.as_array().astype(np.int64) * t // n, t - 1)
    return cols, rows


def _pattern_ok(rows: Sequence[int], target: Sequence[int], r: int) -> bool:
    j = len(rows)
    return all((r > rows[l]) == (target[j] > target[l]) and r != rows[l] for l in range(j))


def find_grid_blowup(p: Permutation, sub: Permutation, k: int, t: int,
                     hint: Sequence[int] | None = None) -> list[tuple[int, int]] | None:
    """Cells (col, row) in distinct columns and rows, ordered like sub, each
    holding at least k points of p; None if no such choice exists."""
    m = sub.n
    if t < m:
        raise ValueError("need t >= |sub|")
    cols, rows = grid_cells(p, t)
    keys, cnt = np.unique(cols * t + rows, return_counts=True)
    counts = dict(zip(keys.tolist(), cnt.tolist()))
    target = sub.values
    if hint is not None:
        cells = [(int(cols[i - 1]), int(rows[i - 1])) for i in sorted(hint)]
        cs = [c for c, _ in cells]
        rs = [r for _, r in cells]
        if (len(cells) == m and len(set(cs)) == m and len(set(rs)) == m
                and all(counts.get(c * t + r, 0) >= k for c, r in cells)
                and pattern_of(list(zip(cs, rs))).values == target):
            return cells
    dense: dict[int, list[int]] = {}
    for key, c in counts.items():
        if c >= k:
            dense.setdefault(key // t, []).append(key % t)
    dense_cols = sorted(dense)
    chosen: list[tuple[int, int]] = []

    def rec(start: int) -> bool:
        j = len(chosen)
        if j == m:
            return True
        rs = [r for _, r in chosen]
        for ci in range(start, len(dense_cols) - (m - j) + 1):
            c = dense_cols[ci]
            for r in dense[c]:
                if _pattern_ok(rs, target, r):
                    chosen.append((c, r))
                    if rec(ci + 1):
                        return True
                    chosen.pop()
        return False

    return list(chosen) if rec(0) else None


def grid_blowup_detector(p: Permutation, sub: Permutation, k: int, t: int,
                         hint: Sequence[int] | None = None) -> bool:
    return find_grid_blowup(p, sub, k, t, hint) is not None


def extract_grid_witness(p: Permutation, cells: Sequence[tuple[int, int]], k: int, t: int) -> list[int]:
    """k positions of p from each cell (lowest positions first), sorted."""
    cols, rows = grid_cells(p, t)
    picked = []
    for c, r in cells:
        idx = np.flatnonzero((cols == c) & (rows == r))[:k]
        if len(idx) < k:
            raise ValueError(f"cell {(c, r)} holds fewer than {k} points")
        picked.extend(int(i) + 1 for i in idx)
    return sorted(picked)


def witness_is_blowup(p: Permutation, positions: Iterable[int], sub: Permutation, k: int) -> bool:
    """The sub-permutation at positions is a blow-up of sub with all blocks of size k."""
    pos = sorted(positions)
    if len(pos) != k * sub.n:
        return False
    w = pattern_of([(i, p(i)) for i in pos])
    return _cut_is_valid(w, sub, tuple(range(1, w.n + 2, k)))


def _cut_is_valid(w: Permutation, sub: Permutation, cuts: Sequence[int]) -> bool:
    spans = []
    for a, b in zip(cuts, cuts[1:]):
        vals = w.values[a - 1:b - 1]
        if max(vals) - min(vals) != len(vals) - 1:
            return False
        spans.append((min(vals), max(vals)))
    return pattern_of([(j, lo) for j, (lo, _) in enumerate(spans, start=1)]).values == sub.values
