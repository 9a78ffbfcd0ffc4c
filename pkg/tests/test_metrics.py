import itertools
import random
from fractions import Fraction as F

import numpy as np
import pytest

from permetric.matching import brute_force_assignment, emd_cost_matrix
from permetric.metrics import (LengthMismatch, Rect, dyadic_depth, dyadic_exact, dyadic_bound_holds,
                               dyadic_square_exact, emd, emd_exact, kendall_tau, log2_bounds, planar_tau_bounds,
                               planar_tau_exact_small, rect_count, rectangular_approx, rectangular_exact,
                               spearman_footrule, square_exact, CapExceeded)
from permetric.perm import Permutation, identity, perm, random_permutation, reverse


def all_perms(n):
    return [Permutation(v) for v in itertools.permutations(range(1, n + 1))]


def random_pairs(n, count, seed):
    rng = random.Random(seed)
    return [(random_permutation(n, rng.randrange(2 ** 32)), random_permutation(n, rng.randrange(2 ** 32)))
            for _ in range(count)]


# Independent oracles: enumerate every closed rectangle (or square) with corners on a
# fine grid and count points directly. Coordinates are scaled by `scale` so
# everything stays integral.
def _in_range(coords, scale):
    g = np.arange(scale + 1)
    lo, hi = g[:, None, None], g[None, :, None]
    return (lo <= coords[None, None, :]) & (coords[None, None, :] <= hi)  # (lo, hi, point)


def _diff_counts(p1, p2, scale):
    n = p1.n
    f = scale // n
    xs = np.arange(1, n + 1) * f
    X = _in_range(xs, scale).astype(np.int64)
    c1 = np.einsum("abi,cdi->abcd", X, _in_range(p1.as_array() * f, scale).astype(np.int64))
    c2 = np.einsum("abi,cdi->abcd", X, _in_range(p2.as_array() * f, scale).astype(np.int64))
    return np.abs(c1 - c2)


def brute_rect(p1, p2):
    d = _diff_counts(p1, p2, 2 * p1.n)
    return F(int(d.max()), p1.n)


def brute_square(p1, p2):
    scale = 4 * p1.n
    d = _diff_counts(p1, p2, scale)
    g = np.arange(scale + 1)
    side_x = g[None, :] - g[:, None]
    mask = (side_x[:, :, None, None] == side_x[None, None, :, :]) & (side_x[:, :, None, None] >= 0)
    return F(int(d[mask].max()), p1.n)


def brute_dyadic(p1, p2, depth, squares=False):
    # membership of coordinate j/n in the closed interval [i/2^k, (i+1)/2^k]
    n = p1.n
    ivs = [(i, k) for k in range(depth + 1) for i in range(2 ** k)]
    j = np.arange(1, n + 1)
    D = np.array([(i * n <= j * 2 ** k) & (j * 2 ** k <= (i + 1) * n) for i, k in ivs], dtype=np.int64)
    levels = np.array([k for _, k in ivs])
    diff = D @ (np.eye(n, dtype=np.int64)[p1.as_array() - 1] - np.eye(n, dtype=np.int64)[p2.as_array() - 1]) @ D.T
    diff = np.abs(diff)
    if squares:
        diff = diff[levels[:, None] == levels[None, :]]
    return F(int(diff.max()), n)


class TestClassical:
    def test_examples(self):
        assert kendall_tau(perm(123), perm(132)) == F(1, 3)
        assert spearman_footrule(perm(123), perm(132)) == F(2, 3)
        assert kendall_tau(identity(6), reverse(6)) == 1
        p = random_permutation(10, 3)
        assert kendall_tau(p, p) == 0 == spearman_footrule(p, p)

    def test_errors(self):
        with pytest.raises(LengthMismatch):
            kendall_tau(identity(3), identity(4))
        with pytest.raises(ValueError):
            kendall_tau(identity(1), identity(1))

    def test_diaconis_graham_n4(self):
        for a in all_perms(4):
            for b in all_perms(4):
                kt, fr = kendall_tau(a, b), spearman_footrule(a, b)
                assert kt <= fr <= 2 * kt


class TestRect:
    def test_counts(self):
        assert rect_count(identity(4), Rect(0, 1, 0, 1)) == 4
        assert rect_count(identity(4), Rect(F(1, 2), F(1, 2), F(1, 2), F(1, 2))) == 1
        assert rect_count(identity(4), Rect(0, F(1, 2), 0, F(1, 2))) == 2

    def test_bad_rect(self):
        with pytest.raises(ValueError):
            Rect(F(1, 2), F(1, 3), 0, 1)

    def test_examples(self):
        assert rectangular_exact(perm(12), perm(21)) == F(1, 2)
        p = random_permutation(12, 0)
        assert rectangular_exact(p, p) == 0

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_exhaustive_oracle(self, n):
        for a in all_perms(n):
            for b in all_perms(n):
                assert rectangular_exact(a, b) == brute_rect(a, b)

    def test_random_oracle(self):
        for a, b in random_pairs(6, 15, 1):
            assert rectangular_exact(a, b) == brute_rect(a, b)

    def test_positivity(self):
        for a, b in random_pairs(20, 100, 2):
            if a != b:
                assert rectangular_exact(a, b) >= F(1, 20)

    def test_approx(self):
        assert F(1, 2) - F(1, 100) <= rectangular_approx(perm(12), perm(21), F(1, 100)) <= F(1, 2)
        for a, b in random_pairs(100, 5, 3):
            r = rectangular_exact(a, b)
            v = rectangular_approx(a, b, F(1, 10))
            assert r - F(1, 10) <= v <= r
            assert rectangular_approx(a, a, F(1, 10)) == 0

    def test_approx_range(self):
        with pytest.raises(ValueError):
            rectangular_approx(identity(3), identity(3), 0)


class TestRestricted:
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_square_exhaustive(self, n):
        for a in all_perms(n):
            for b in all_perms(n):
                assert square_exact(a, b) == brute_square(a, b)

    def test_square_random(self):
        for a, b in random_pairs(6, 10, 4):
            assert square_exact(a, b) == brute_square(a, b)

    @pytest.mark.parametrize("n", [3, 5, 8, 11, 16])
    def test_dyadic_depth_suffices(self, n):
        deep = dyadic_depth(n) + 3
        for a, b in random_pairs(n, 10, n):
            assert dyadic_exact(a, b) == brute_dyadic(a, b, deep)
            assert dyadic_square_exact(a, b) == brute_dyadic(a, b, deep, squares=True)

    def test_chain(self):
        for a, b in random_pairs(30, 300, 5):
            r, d, s, ds = rectangular_exact(a, b), dyadic_exact(a, b), square_exact(a, b), dyadic_square_exact(a, b)
            assert ds <= d <= r and ds <= s <= r
        p = random_permutation(30, 9)
        assert dyadic_exact(p, p) == square_exact(p, p) == dyadic_square_exact(p, p) == 0


class TestEMD:
    def test_examples(self):
        val, theta, cost = emd_exact(perm(12), perm(21))
        assert val == 2 and cost == 2
        p = random_permutation(7, 1)
        assert emd_exact(p, p) == (0, tuple(range(1, 8)), 0)

    def test_matches_brute_force_n4(self):
        for a in all_perms(4):
            for b in all_perms(4):
                val, theta, cost = emd_exact(a, b)
                assert cost == brute_force_assignment(emd_cost_matrix(a, b)).total_cost
                assert val == F(cost, 6)
                assert sum(abs(i - t) + abs(a(i) - b(t)) for i, t in enumerate(theta, 1)) == cost

    def test_planar(self):
        assert planar_tau_exact_small(perm(12), perm(21)) == 1
        assert planar_tau_bounds(perm(12), perm(21)) == (1, 2)
        with pytest.raises(CapExceeded):
            planar_tau_exact_small(identity(9), identity(9))

    def test_planar_n5(self):
        for a in all_perms(5)[::7]:
            for b in all_perms(5):
                ppt = planar_tau_exact_small(a, b)
                lo, hi = planar_tau_bounds(a, b)
                assert lo <= ppt <= hi
                assert ppt <= kendall_tau(a, b)
                assert emd(a, b) <= spearman_footrule(a, b)


class TestSymmetryTriangle:
    METRICS = [kendall_tau, spearman_footrule, rectangular_exact, dyadic_exact, square_exact,
               dyadic_square_exact, emd]

    def test_symmetry_n4(self):
        for a in all_perms(4):
            for b in all_perms(4):
                for m in self.METRICS:
                    assert m(a, b) == m(b, a)

    def test_symmetry_random(self):
        for a, b in random_pairs(30, 100, 6):
            for m in self.METRICS:
                assert m(a, b) == m(b, a)

    def test_triangle(self):
        rng = random.Random(7)
        for _ in range(100):
            a, b, c = (random_permutation(15, rng.randrange(2 ** 32)) for _ in range(3))
            for m in (kendall_tau, spearman_footrule, emd, rectangular_exact):
                assert m(a, c) <= m(a, b) + m(b, c)


class TestLog:
    @pytest.mark.parametrize("x", [F(8), F(3), F(81, 7), F(1, 3), F(1024)])
    def test_log2_bounds(self, x):
        lo, hi = log2_bounds(x, 256)
        assert 2 ** float(lo) <= float(x) * (1 + 1e-12)
        assert float(x) <= 2 ** float(hi) * (1 + 1e-12)
        assert hi - lo == F(1, 256)

    def test_dyadic_bound_decisions(self):
        assert dyadic_bound_holds(F(1, 2), F(1, 100))
        assert not dyadic_bound_holds(F(1, 2), F(1, 10 ** 6))
        assert dyadic_bound_holds(F(0), F(0))
