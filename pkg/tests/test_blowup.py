import itertools
import random

import pytest

from permetric.blowup import (BlowUpSpec, HereditaryProperty, No, Unknown, Yes, blowup_boundaries,
                              exists_kblowup_in, extract_grid_witness, find_grid_blowup, grid_blowup_detector,
                              is_blowup_of, k_star_alpha, k_star_T, realize_blowup, witness_is_blowup)
from permetric.perm import Permutation, contains_pattern, identity, m_sample, pattern_of, perm, random_permutation

AV321 = HereditaryProperty.avoiding(perm(321))
AV12 = HereditaryProperty.avoiding(perm(12))
AV_MONO = HereditaryProperty.avoiding(perm(123), perm(321))


def all_perms(n):
    return [Permutation(v) for v in itertools.permutations(range(1, n + 1))]


def brute_is_blowup(p, alpha):
    n, m = p.n, alpha.n
    for cuts in itertools.combinations(range(2, n + 1), m - 1):
        bounds = (1,) + cuts + (n + 1,)
        blocks = [p.values[a - 1:b - 1] for a, b in zip(bounds, bounds[1:])]
        ok = all((min(blocks[s]) > max(blocks[t])) == (alpha(s + 1) > alpha(t + 1))
                 and (max(blocks[s]) < min(blocks[t])) == (alpha(s + 1) < alpha(t + 1))
                 for s in range(m) for t in range(m) if s != t)
        if ok:
            return True
    return False


class TestRealize:
    def test_one_blowup(self):
        assert realize_blowup(BlowUpSpec(perm(21), (1, 1), (identity(1), identity(1)))) == perm(21)

    def test_increasing_blocks(self):
        assert realize_blowup(BlowUpSpec.uniform(perm(21), 2, [perm(12), perm(12)])) == perm(3412)

    def test_sizes_3421(self):
        base = perm(2413)
        contents = (perm(132), perm(2143), perm(21), identity(1))
        p = realize_blowup(BlowUpSpec(base, (3, 4, 2, 1), contents))
        assert p.n == 10
        assert blowup_boundaries(p, base) == (1, 4, 8, 10, 11)
        assert pattern_of([(i, p(i)) for i in (1, 4, 8, 10)]) == base

    def test_errors(self):
        with pytest.raises(ValueError):
            BlowUpSpec(perm(21), (1,))
        with pytest.raises(ValueError):
            BlowUpSpec(perm(21), (2, 1), (identity(1), identity(1)))
        with pytest.raises(ValueError):
            realize_blowup(BlowUpSpec(perm(21), (1, 1)))

    def test_round_trip(self):
        rng = random.Random(0)
        for _ in range(200):
            base = random_permutation(rng.randint(1, 6), rng.randrange(2 ** 32))
            sizes = tuple(rng.randint(1, 4) for _ in range(base.n))
            contents = tuple(random_permutation(s, rng.randrange(2 ** 32)) for s in sizes)
            p = realize_blowup(BlowUpSpec(base, sizes, contents))
            assert is_blowup_of(p, base)
            starts = [1 + sum(sizes[:t]) for t in range(base.n)]
            assert pattern_of([(i, p(i)) for i in starts]) == base


class TestIsBlowup:
    def test_examples(self):
        assert is_blowup_of(perm(3412), perm(21))
        assert blowup_boundaries(perm(3412), perm(21)) == (1, 3, 5)
        assert not is_blowup_of(perm(2413), perm(21))
        p = random_permutation(8, 1)
        assert is_blowup_of(p, p)
        assert not is_blowup_of(perm(12), perm(123))

    @pytest.mark.parametrize("n", [3, 4, 5])
    def test_against_enumeration(self, n):
        for p in all_perms(n):
            for m in range(1, n + 1):
                for alpha in all_perms(m) if m <= 3 else all_perms(m)[::5]:
                    assert is_blowup_of(p, alpha) == brute_is_blowup(p, alpha)


class TestSearch:
    def test_examples(self):
        assert isinstance(exists_kblowup_in(perm(321), 1, AV321), No)
        assert isinstance(exists_kblowup_in(perm(12), 1, AV12), No)
        for k in range(1, 5):
            r = exists_kblowup_in(perm(21), k, AV321)
            assert isinstance(r, Yes)
            assert r.spec.block_contents == (identity(k), identity(k))

    def test_witness_valid(self):
        rng = random.Random(1)
        for _ in range(50):
            alpha = random_permutation(rng.randint(1, 4), rng.randrange(2 ** 32))
            prop = HereditaryProperty.avoiding(random_permutation(rng.randint(2, 4), rng.randrange(2 ** 32)))
            for k in (1, 2, 3):
                r = exists_kblowup_in(alpha, k, prop)
                if isinstance(r, Yes):
                    q = realize_blowup(r.spec)
                    assert prop.contains(q) and is_blowup_of(q, alpha) and q.n == k * alpha.n

    def test_no_is_exhaustive(self):
        # brute force over all content tuples for small cases
        for alpha in all_perms(2) + all_perms(3):
            for sigma in (perm(123), perm(132), perm(2413)):
                prop = HereditaryProperty.avoiding(sigma)
                for k in (1, 2):
                    found = any(prop.contains(realize_blowup(BlowUpSpec.uniform(alpha, k, cs)))
                                for cs in itertools.product(all_perms(k), repeat=alpha.n))
                    assert isinstance(exists_kblowup_in(alpha, k, prop), Yes) == found

    def test_budget(self):
        r = exists_kblowup_in(perm(2413), 3, HereditaryProperty.avoiding(perm(123), perm(321)), budget=3)
        assert isinstance(r, Unknown)
        with pytest.raises(ValueError):
            exists_kblowup_in(perm(1), 0, AV12)

    def test_monotone(self):
        for alpha in all_perms(3):
            for sigma in (perm(123), perm(132), perm(321), perm(2413)):
                prop = HereditaryProperty.avoiding(sigma)
                prev_no = False
                for k in (1, 2, 3):
                    r = exists_kblowup_in(alpha, k, prop)
                    if prev_no and not isinstance(r, Unknown):
                        assert isinstance(r, No)
                    prev_no = isinstance(r, No)


class TestKStar:
    def test_examples(self):
        assert k_star_alpha(perm(321), AV321).value == 1
        assert k_star_alpha(perm(12), AV12).value == 1
        r = k_star_alpha(perm(21), AV321)
        assert (r.kind, r.value) == ("infinite", 4) and str(r) == "Infinite(4)"
        assert sorted(r.witnesses) == [1, 2, 3, 4]

    def test_erdos_szekeres(self):
        r = k_star_alpha(identity(1), AV_MONO, k_cap=6)
        assert r.finite and r.value == 5 and 4 in r.witnesses
        assert prop_ok(r.witnesses[4])

    def test_forbidden_patterns_have_k1(self):
        for sigma in all_perms(3) + all_perms(4)[::3]:
            assert k_star_alpha(sigma, HereditaryProperty.avoiding(sigma)).value == 1

    def test_T(self):
        assert k_star_T(2, AV12).value == 1
        assert k_star_T(3, AV321).value == 1
        assert k_star_T(1, AV321).kind == "infinite"
        for sigma in (perm(12), perm(21), perm(132), perm(321)):
            assert k_star_T(4, HereditaryProperty.avoiding(sigma), k_cap=3).finite
        with pytest.raises(ValueError):
            k_star_T(7, AV321)

    def test_unknown_propagates(self):
        r = k_star_T(2, AV_MONO, k_cap=4, budget=2)
        assert r.kind == "unknown"

    def test_str(self):
        assert str(HereditaryProperty.avoiding(perm(321), perm(12))) == "Av(3 2 1,1 2)"


def prop_ok(spec):
    return AV_MONO.contains(realize_blowup(spec))


class TestGrid:
    def test_clusters(self):
        sub, k, t = perm(231), 5, 6
        contents = [identity(k)] * 3
        p = realize_blowup(BlowUpSpec.uniform(sub, k, contents))
        # 1-indexed coordinates push one point of each cluster into the next cell
        assert grid_blowup_detector(p, sub, k - 1, 3)
        cells = find_grid_blowup(p, sub, k - 1, 3)
        w = extract_grid_witness(p, cells, k - 1, 3)
        assert witness_is_blowup(p, w, sub, k - 1)
        assert not grid_blowup_detector(p, sub, k, 3)
        assert not grid_blowup_detector(p, perm(321), 1, t) or contains_pattern(p, perm(321))

    def test_trivial(self):
        for s in range(10):
            assert grid_blowup_detector(random_permutation(7, s), identity(1), 1, 1)
        with pytest.raises(ValueError):
            find_grid_blowup(identity(3), perm(12), 1, 1)

    def test_witness_extraction_random(self):
        rng = random.Random(5)
        hits = 0
        for _ in range(100):
            n = rng.randint(50, 400)
            p = random_permutation(n, rng.randrange(2 ** 32))
            draw = m_sample(p, 3, rng.randrange(2 ** 32))
            k, t = rng.randint(1, 3), rng.randint(3, 6)
            cells = find_grid_blowup(p, draw.induced, k, t, hint=draw.positions)
            if cells is None:
                continue
            hits += 1
            w = extract_grid_witness(p, cells, k, t)
            assert witness_is_blowup(p, w, draw.induced, k)
            sub = pattern_of([(i, p(i)) for i in w])
            assert is_blowup_of(sub, draw.induced)
        assert hits > 50
