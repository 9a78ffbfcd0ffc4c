"""Dyadic partitions of a permutation's point set and the constructions built on them.

Cells are half-open, ``[i/2^k, (i+1)/2^k)``, with the boundary at 1 closed,
so every point lies in exactly one cell per level. Density is the point
count divided by n; it is never divided by the cell's area.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .matching import cell_index, footrule_transform
from .perm import Permutation, pattern_of


class DyadicSquare(NamedTuple):
    level: int
    col: int
    row: int

    @property
    def side(self) -> Fraction:
        return Fraction(1, 1 << self.level)

    def parent(self) -> "DyadicSquare":
        if self.level == 0:
            raise ValueError("the unit square has no parent")
        return DyadicSquare(self.level - 1, self.col >> 1, self.row >> 1)

    def children(self) -> list["DyadicSquare"]:
        k, c, r = self.level + 1, 2 * self.col, 2 * self.row
        return [DyadicSquare(k, c + dc, r + dr) for dc in (0, 1) for dr in (0, 1)]

    def ancestor(self, level: int) -> "DyadicSquare":
        shift = self.level - level
        if shift < 0:
            raise ValueError("ancestor level below own level")
        return DyadicSquare(level, self.col >> shift, self.row >> shift)

    def contains_square(self, other: "DyadicSquare") -> bool:
        return other.level >= self.level and other.ancestor(self.level) == self

    def holds(self, i: int, v: int, n: int) -> bool:
        """Whether grid point (i, v) of a length-n permutation lies in this cell."""
        return cell_index(i, n, self.level) == self.col and cell_index(v, n, self.level) == self.row

    def bounds(self) -> tuple[Fraction, Fraction, Fraction, Fraction]:
        s = self.side
        return self.col * s, (self.col + 1) * s, self.row * s, (self.row + 1) * s


ROOT = DyadicSquare(0, 0, 0)


class PartitionError(ValueError):
    pass


class UnhitRichSquare(RuntimeError):
    def __init__(self, square: DyadicSquare):
        super().__init__(f"rich square {tuple(square)} contains no sample point")
        self.square = square


def cells_at(p: Permutation, level: int) -> tuple[np.ndarray, np.ndarray]:
    n = p.n
    side = 1 << level
    i = np.arange(1, n + 1, dtype=np.int64)
    cols = np.minimum(i * side // n, side - 1)
    rows = np.minimum(p.as_array().astype(np.int64) * side // n, side - 1)
    return cols, rows


def level_counts(p: Permutation, level: int) -> dict[tuple[int, int], int]:
    cols, rows = cells_at(p, level)
    keys, cnt = np.unique((cols << level) | rows, return_counts=True)
    mask = (1 << level) - 1
    return {(int(k) >> level, int(k) & mask): int(c) for k, c in zip(keys, cnt)}


def _as_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass
class PartitionOutcome:
    n: int
    max_level: int
    thresholds: tuple[Fraction, ...]  # density threshold indexed by level
    active: frozenset
    frozen: frozenset
    mature: frozenset
    ever_active: frozenset
    counts: dict = field(repr=False)
    params: dict = field(default_factory=dict)

    def threshold(self, level: int) -> Fraction:
        return self.thresholds[level]

    @property
    def rich(self) -> frozenset:
        return self.active | self.mature

    @property
    def d(self) -> Fraction:
        return Fraction(1, 1 << self.max_level)

    def state(self, sq: DyadicSquare) -> str:
        if sq in self.active:
            return "active"
        if sq in self.mature:
            return "mature"
        if sq in self.frozen:
            return "frozen"
        if sq in self.ever_active:
            return "split"
        return "unvisited"


def _run_partition(p: Permutation, thresholds: Sequence[Fraction], max_level: int, params: dict) -> PartitionOutcome:
    n = p.n
    active = {ROOT}
    ever = {ROOT}
    frozen: set = set()
    mature: set = set()
    counts = {ROOT: n}
    for level in range(1, max_level + 1):
        if not active:
            break
        here = level_counts(p, level)
        cut = thresholds[level] * n
        nxt = set()
        for sq in sorted(active):
            dense_child = False
            for ch in sq.children():
                c = here.get((ch.col, ch.row), 0)
                counts[ch] = c
                if c >= cut:
                    nxt.add(ch)
                    dense_child = True
                else:
                    frozen.add(ch)
            if not dense_child:
                mature.add(sq)
        active = nxt
        ever |= nxt
    return PartitionOutcome(
        n, max_level, tuple(thresholds), frozenset(active), frozenset(frozen), frozenset(mature),
        frozenset(ever), counts, params,
    )


def dyadic_partition_v1(p: Permutation, delta, max_level: int) -> PartitionOutcome:
    """Split every square whose density is at least delta until max_level."""
    delta = _as_fraction(delta)
    if not 0 < delta < 1:
        raise PartitionError(f"delta must lie in (0,1), got {delta}")
    if max_level < 1:
        raise PartitionError(f"max_level must be >= 1, got {max_level}")
    thr = [delta] * (max_level + 1)
    return _run_partition(p, thr, max_level, {"variant": "v1", "delta": delta, "max_level": max_level})


def dyadic_partition_v2(p: Permutation, delta1, delta2, K: int, max_level: int) -> PartitionOutcome:
    """As v1, but squares at level <= K use delta1 and deeper squares use delta2."""
    delta1, delta2 = _as_fraction(delta1), _as_fraction(delta2)
    for name, v in (("delta1", delta1), ("delta2", delta2)):
        if not 0 < v < 1:
            raise PartitionError(f"{name} must lie in (0,1), got {v}")
    if max_level < 1:
        raise PartitionError(f"max_level must be >= 1, got {max_level}")
    if not 0 <= K <= max_level:
        raise PartitionError(f"K must satisfy 0 <= K <= max_level, got K={K}")
    thr = [delta1 if level <= K else delta2 for level in range(max_level + 1)]
    params = {"variant": "v2", "delta1": delta1, "delta2": delta2, "K": K, "max_level": max_level}
    return _run_partition(p, thr, max_level, params)


# -- default parameters ------------------------------------------------------------

def default_params_v1(eps, c_sigma) -> tuple[Fraction, int]:
    eps = float(eps)
    if not 0 < eps <= 1:
        raise PartitionError("epsilon must lie in (0,1]")
    delta = Fraction(eps / (512 * float(c_sigma) * math.log2(32 / eps)))
    return delta, math.ceil(math.log2(64 / eps))


def default_params_v2(eps) -> tuple[Fraction, Fraction, int, int]:
    eps = float(eps)
    if not 0 < eps < 0.5:
        raise PartitionError("the two-threshold defaults need 0 < epsilon < 1/2")
    d1 = math.sqrt(2) / 96 * eps ** 2 * math.log2(1 / eps)
    d2 = eps ** 2 / 5200
    K = max(0, math.ceil(-math.log2(12 * 16 * d1 / eps)))
    max_level = math.ceil(math.log2(48 / eps))
    return Fraction(d1), Fraction(d2), min(K, max_level), max_level


def default_params_v3(eps) -> tuple[Fraction, int]:
    """(delta3, max_level) for the block-size analysis; the finest side is 2**-max_level."""
    eps = float(eps)
    if not 0 < eps < 1:
        raise PartitionError("epsilon must lie in (0,1)")
    return Fraction(eps ** 2 * math.log2(2 / eps) / 448), math.ceil(2 * math.log2(1 / eps))


# -- validation --------------------------------------------------------------------

@dataclass
class ValidationReport:
    checks: dict[str, bool]
    problems: list[str]

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def _count_in(p: Permutation, sq: DyadicSquare) -> int:
    n = p.n
    return sum(1 for i, v in enumerate(p.values, start=1) if sq.holds(i, v, n))


def validate_partition(p: Permutation, out: PartitionOutcome) -> ValidationReport:
    """Recount every square from scratch and check the structural guarantees.

    tiling: active and frozen squares are pairwise disjoint and cover [0,1]^2.
    active_vs_mature: no active square overlaps a mature one.
    active_level: terminal active squares all sit at max_level.
    frozen_parent: the parent of each frozen square was split while dense.
    density: mature counts stay below 4x the child threshold, terminal active
    counts stay within floor(d*n)+1, and rich squares reach their threshold.
    """
    n = p.n
    problems: list[str] = []
    bad_counts = [sq for sq, c in out.counts.items() if _count_in(p, sq) != c]
    if bad_counts:
        problems.append(f"stored counts disagree with recount on {len(bad_counts)} squares")

    tiles = sorted(out.active | out.frozen)
    area = sum((Fraction(1, 4 ** sq.level) for sq in tiles), Fraction(0))
    tileset = set(tiles)
    overlap = [sq for sq in tiles if any(sq.ancestor(k) in tileset for k in range(sq.level))]
    tiling = area == 1 and not overlap and not (out.active & out.frozen)
    if not tiling:
        problems.append(f"tiling broken: area={area}, overlaps={len(overlap)}")

    clash = [a for a in out.active for m in out.mature if m.contains_square(a) or a.contains_square(m)]
    if clash:
        problems.append(f"{len(clash)} active squares overlap mature squares")

    off_level = [a for a in out.active if a.level != out.max_level]
    if off_level:
        problems.append(f"{len(off_level)} terminal active squares above max_level")

    orphan = []
    for f in out.frozen:
        par = f.parent()
        if par not in out.ever_active or out.counts.get(par, 0) < out.threshold(par.level) * n:
            orphan.append(f)
    if orphan:
        problems.append(f"{len(orphan)} frozen squares with a sparse parent")

    dens = []
    for m in out.mature:
        if not out.counts[m] < 4 * out.threshold(m.level + 1) * n:
            dens.append(("mature", m))
    lattice = math.floor(out.d * n) + 1
    for a in out.active:
        if out.counts[a] > lattice:
            dens.append(("active", a))
    for r in out.rich:
        if out.counts[r] < out.threshold(r.level) * n:
            dens.append(("rich", r))
    if dens:
        problems.append(f"density bounds violated on {len(dens)} squares")

    checks = {
        "counts": not bad_counts,
        "tiling": tiling,
        "active_vs_mature": not clash,
        "active_level": not off_level,
        "frozen_parent": not orphan,
        "density": not dens,
    }
    return ValidationReport(checks, problems)


def candidate_counts(out: PartitionOutcome) -> list[int]:
    """n_i for i = 0..max_level: points in frozen squares one level below i,
    and, at i = max_level, points in terminal active squares. Sums to n."""
    L = out.max_level
    res = [0] * (L + 1)
    for f in out.frozen:
        res[f.level - 1] += out.counts[f]
    res[L] += sum(out.counts[a] for a in out.active)
    return res


def candidate_bound_holds(out: PartitionOutcome, K: int) -> bool:
    """n_i <= 4 * delta(i+1) * 4**i * n for K < i < max_level."""
    nc = candidate_counts(out)
    return all(nc[i] <= 4 * out.threshold(i + 1) * 4 ** i * out.n for i in range(K + 1, out.max_level))


def point_levels(p: Permutation, out: PartitionOutcome) -> list[int]:
    """For each point, the candidate level i its tile contributes to."""
    res = []
    for i, v in enumerate(p.values, start=1):
        for level in range(out.max_level, 0, -1):
            sq = DyadicSquare(level, cell_index(i, p.n, level), cell_index(v, p.n, level))
            if sq in out.frozen:
                res.append(level - 1)
                break
            if sq in out.active:
                res.append(level)
                break
        else:
            raise PartitionError(f"point {i} lies in no tile")
    return res


# -- associations ----------------------------------------------------------------

@dataclass(frozen=True)
class Association:
    phi: tuple[int, ...]  # phi[i-1] is the sample position point i is sent to
    blocks: dict

    @classmethod
    def from_phi(cls, phi: Sequence[int]) -> "Association":
        blocks: dict[int, list[int]] = {}
        for i, t in enumerate(phi, start=1):
            blocks.setdefault(t, []).append(i)
        return cls(tuple(phi), {t: tuple(v) for t, v in sorted(blocks.items())})

    def block_sizes(self) -> dict[int, int]:
        return {t: len(v) for t, v in self.blocks.items()}


def rich_squares(out: PartitionOutcome) -> frozenset:
    return out.rich


def chosen_samples(p: Permutation, out: PartitionOutcome, sample: Sequence[int]) -> dict[DyadicSquare, int]:
    """Smallest sample position inside each rich square."""
    n = p.n
    pos = sorted(set(sample))
    chosen: dict[DyadicSquare, int] = {}
    by_level: dict[int, list[DyadicSquare]] = {}
    for sq in out.rich:
        by_level.setdefault(sq.level, []).append(sq)
    for level, squares in by_level.items():
        want = set(squares)
        for t in pos:
            sq = DyadicSquare(level, cell_index(t, n, level), cell_index(p(t), n, level))
            if sq in want and sq not in chosen:
                chosen[sq] = t
    for sq in sorted(out.rich):
        if sq not in chosen:
            raise UnhitRichSquare(sq)
    return chosen


def unhit_squares(p: Permutation, squares: Iterable[DyadicSquare], sample: Sequence[int]) -> list[DyadicSquare]:
    """Squares that contain no sample point."""
    n = p.n
    squares = list(squares)
    pos = set(sample)
    hit: set = set()
    for level in {sq.level for sq in squares}:
        hit |= {DyadicSquare(level, cell_index(t, n, level), cell_index(p(t), n, level)) for t in pos}
    return sorted(sq for sq in squares if sq not in hit)


def _first_rich_below(sq: DyadicSquare, out: PartitionOutcome) -> DyadicSquare:
    for ch in sorted(sq.children(), key=lambda s: (s.col, s.row)):
        if ch not in out.ever_active:
            continue
        if ch in out.active or ch in out.mature:
            return ch
        return _first_rich_below(ch, out)
    raise PartitionError(f"split square {tuple(sq)} has no dense descendant")


def associate_phi_v1(p: Permutation, out: PartitionOutcome, sample: Sequence[int]) -> Association:
    """Send each point to the chosen sample of a rich square.

    Points in an active square go to that square's sample. Points in a frozen
    square go to the parent's sample if the parent is mature; otherwise to the
    first rich square met by a depth-first walk down from the parent.
    """
    n = p.n
    chosen = chosen_samples(p, out, sample)
    target_of_parent: dict[DyadicSquare, int] = {}
    phi = []
    L = out.max_level
    for i, v in enumerate(p.values, start=1):
        sq = DyadicSquare(L, cell_index(i, n, L), cell_index(v, n, L))
        if sq in out.active:
            phi.append(chosen[sq])
            continue
        while sq not in out.frozen:
            sq = sq.parent()
        par = sq.parent()
        if par not in target_of_parent:
            dest = par if par in out.mature else _first_rich_below(par, out)
            target_of_parent[par] = chosen[dest]
        phi.append(target_of_parent[par])
    return Association.from_phi(phi)


def block_bound_v1(out: PartitionOutcome, delta) -> tuple[Fraction, Fraction]:
    """(lower, upper) block sizes guaranteed for the rich-square association."""
    delta = _as_fraction(delta)
    n = out.n
    upper = 3 * delta * n * out.max_level + max(Fraction(math.floor(out.d * n) + 1), 4 * delta * n)
    return delta * n, upper


def block_bound_nearest(delta3, max_level: int, n: int) -> Fraction:
    """56 * log2(2/d') * delta3 * n with d' = 2**-max_level, so log2(2/d') = max_level + 1."""
    return 56 * (max_level + 1) * _as_fraction(delta3) * n


def associate_phi_nearest(p: Permutation, sample: Sequence[int]) -> Association:
    """Send each point to the Euclidean-nearest sample point, lowest position on ties."""
    pos = np.array(sorted(set(int(t) for t in sample)), dtype=np.int64)
    if pos.size == 0:
        raise PartitionError("sample is empty")
    vals = p.as_array().astype(np.int64)
    spts = np.column_stack([pos, vals[pos - 1]])
    pts = np.column_stack([np.arange(1, p.n + 1, dtype=np.int64), vals])
    tree = cKDTree(spts)
    k = min(4, len(pos))
    _, idx = tree.query(pts, k=k)
    idx = idx.reshape(len(pts), k)
    d2 = ((spts[idx] - pts[:, None, :]) ** 2).sum(axis=2)
    best = d2.min(axis=1)
    phi = np.empty(p.n, dtype=np.int64)
    for r in range(p.n):
        cand = idx[r][d2[r] == best[r]]
        if k < len(pos) and d2[r, :].max() == best[r]:
            # every returned neighbour ties; there may be more at the same distance
            near = tree.query_ball_point(pts[r], math.sqrt(best[r]) + 0.5)
            near = np.asarray(near, dtype=np.int64)
            dd = ((spts[near] - pts[r]) ** 2).sum(axis=1)
            cand = near[dd == best[r]]
        phi[r] = pos[cand].min()
    return Association.from_phi([int(t) for t in phi])


@dataclass(frozen=True)
class InducedBlowup:
    alpha: Permutation
    alpha_tilde: Permutation
    psi: tuple[int, ...]
    targets: tuple[int, ...]  # sample positions, in block order


def induced_blowup(p: Permutation, assoc: Association) -> InducedBlowup:
    """Blow up the pattern of the used sample points, filling block t with
    the pattern of p restricted to the points sent to t."""
    targets = tuple(sorted(assoc.blocks))
    alpha = pattern_of([(t, p(t)) for t in targets])
    psi = footrule_transform(assoc.phi)
    # value of point i in alpha~: ordered by (alpha value of its block, p(i))
    vkey = [p(t) for t in assoc.phi]
    order = sorted(range(p.n), key=lambda i: (vkey[i], p.values[i]))
    newval = [0] * p.n
    for rank, i in enumerate(order, start=1):
        newval[i] = rank
    tilde = [0] * p.n
    for i in range(p.n):
        tilde[psi[i] - 1] = newval[i]
    return InducedBlowup(alpha, Permutation(tuple(tilde)), psi, targets)


def displacement_sums(p: Permutation, assoc: Association, ib: InducedBlowup) -> tuple[int, int]:
    """(sum of L1 moves from p onto alpha~ via psi, sum of L1 moves onto the phi targets)."""
    to_tilde = sum(abs(i - s) + abs(v - ib.alpha_tilde(s))
                   for i, (v, s) in enumerate(zip(p.values, ib.psi), start=1))
    to_sample = sum(abs(i - t) + abs(v - p(t)) for i, (v, t) in enumerate(zip(p.values, assoc.phi), start=1))
    return to_tilde, to_sample


# -- interval covers and square tilings --------------------------------------------------------------

def _largest_dyadic_inside(lo: Fraction, hi: Fraction, prefer_right: bool) -> tuple[Fraction, Fraction]:
    k = 0
    while True:
        size = Fraction(1, 1 << k)
        if prefer_right:
            j = math.floor(hi / size) - 1
            if j * size >= lo and j >= 0:
                return j * size, (j + 1) * size
        else:
            j = math.ceil(lo / size)
            if (j + 1) * size <= hi:
                return j * size, (j + 1) * size
        k += 1


def dyadic_cover(a, b, eps) -> tuple[list[tuple[Fraction, Fraction]], list[tuple[Fraction, Fraction]]]:
    """Greedy cover of [a,b] by disjoint dyadic intervals.

    The longest uncovered stretch is repeatedly given its largest dyadic
    subinterval, packed against the neighbouring piece, until the uncovered
    length is at most eps/4. Returns (pieces sorted left to right, residuals).
    """
    a, b, eps = Fraction(a), Fraction(b), Fraction(eps)
    if not 0 <= a < b <= 1:
        raise PartitionError(f"need 0 <= a < b <= 1, got [{a}, {b}]")
    if not 0 < eps <= 1:
        raise PartitionError("epsilon must lie in (0,1]")
    pieces = []
    # residual stretches carry which side touches an existing piece
    residual = [(a, b, None)]
    while sum(r[1] - r[0] for r in residual) > eps / 4:
        idx = max(range(len(residual)), key=lambda j: (residual[j][1] - residual[j][0], -j))
        lo, hi, side = residual.pop(idx)
        x, y = _largest_dyadic_inside(lo, hi, prefer_right=(side == "right"))
        pieces.append((x, y))
        if lo < x:
            residual.append((lo, x, "right"))
        if y < hi:
            residual.append((y, hi, "left"))
        residual.sort()
    return sorted(pieces), [(lo, hi) for lo, hi, _ in residual]


def is_dyadic(lo: Fraction, hi: Fraction) -> bool:
    size = hi - lo
    if size <= 0 or size.numerator != 1 or size.denominator & (size.denominator - 1):
        return False
    return (lo / size).denominator == 1


@dataclass(frozen=True)
class Tile:
    x: Fraction
    y: Fraction
    side: Fraction


def square_tiling(w, h, eps) -> tuple[list[Tile], tuple[Fraction, Fraction, Fraction, Fraction] | None]:
    """Euclid-style tiling of [0,w] x [0,h] by squares.

    Cut as many squares of the short side as fit, then continue on the
    leftover strip until its short side is at most eps/2. Returns the tiles and
    the leftover rectangle (x, y, w, h), or None when nothing is left.
    """
    w, h, eps = Fraction(w), Fraction(h), Fraction(eps)
    if not (0 < w <= 1 and 0 < h <= 1):
        raise PartitionError(f"degenerate rectangle {w} x {h}")
    if not 0 < eps <= 1:
        raise PartitionError("epsilon must lie in (0,1]")
    tiles = []
    x, y = Fraction(0), Fraction(0)
    while w > 0 and h > 0 and min(w, h) > eps / 2:
        s = min(w, h)
        if w >= h:
            q = math.floor(w / s)
            tiles += [Tile(x + j * s, y, s) for j in range(q)]
            x, w = x + q * s, w - q * s
        else:
            q = math.floor(h / s)
            tiles += [Tile(x, y + j * s, s) for j in range(q)]
            y, h = y + q * s, h - q * s
    rest = (x, y, w, h) if w > 0 and h > 0 else None
    return tiles, rest
