import itertools
import json
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from permetric.perm import (Permutation, PermutationError, contains_pattern, derive_seed, dyck_to_321_avoider,
                            find_pattern, from_json, identity, m_sample, parse_permutation, pattern_of, perm,
                            random_dyck_path, random_member_321, random_permutation, read_permutations, reverse,
                            to_json, to_text)

perms_st = st.integers(1, 12).flatmap(lambda n: st.permutations(range(1, n + 1))).map(lambda v: Permutation(tuple(v)))


def brute_contains(values, sigma):
    k = len(sigma)
    return any(pattern_of([(i, values[i - 1]) for i in idx]).values == sigma
               for idx in itertools.combinations(range(1, len(values) + 1), k))


class TestParse:
    def test_figure_example(self):
        p = parse_permutation("8 2 7 6 4 5 3 1 9 10")
        assert p.n == 10 and p(1) == 8 and p(10) == 10

    def test_single(self):
        assert parse_permutation("1") == identity(1)

    def test_commas(self):
        assert parse_permutation("2,1, 3") == perm(2, 1, 3)

    @pytest.mark.parametrize("text,code,token", [
        ("1 1 2", "duplicate", "1"),
        ("1 4 2", "out_of_range", "4"),
        ("", "empty", None),
        ("1 x", "not_integer", "x"),
    ])
    def test_errors(self, text, code, token):
        with pytest.raises(PermutationError) as ei:
            parse_permutation(text)
        assert ei.value.code == code
        assert ei.value.token == token

    def test_duplicate_names_second_occurrence(self):
        # "1 1 2" is rejected with a duplicate error (value 1 repeats)
        with pytest.raises(PermutationError, match="duplicate"):
            parse_permutation("1 1 2")

    @given(perms_st)
    def test_text_round_trip(self, p):
        assert parse_permutation(to_text(p)) == p

    def test_json(self):
        assert to_json(perm(21)) == '{"n":2,"values":[2,1]}'
        assert from_json(to_json(perm(3, 1, 2))) == perm(3, 1, 2)

    def test_read_file(self, tmp_path):
        f = tmp_path / "p.txt"
        f.write_text("1 2 3\n\n3 2 1\n")
        assert read_permutations(f) == [identity(3), reverse(3)]
        g = tmp_path / "p.json"
        g.write_text(json.dumps([{"n": 2, "values": [2, 1]}]))
        assert read_permutations(g) == [perm(21)]


class TestPermutation:
    def test_invalid(self):
        with pytest.raises(PermutationError):
            Permutation((1, 3))

    @given(perms_st)
    def test_inverse_involution(self, p):
        assert p.inverse().inverse() == p
        assert p.compose(p.inverse()) == identity(p.n)

    def test_perm_digits(self):
        assert perm(321) == Permutation((3, 2, 1))


class TestPattern:
    def test_examples(self):
        assert pattern_of([(3, 7), (5, 2), (9, 4)]) == perm(312)
        assert pattern_of([(1, 1)]) == identity(1)
        assert pattern_of([(2, 5), (4, 6)]) == perm(12)

    def test_duplicates_rejected(self):
        with pytest.raises(PermutationError):
            pattern_of([(1, 2), (1, 3)])

    @given(perms_st)
    def test_idempotent(self, p):
        assert pattern_of([(i, p(i)) for i in range(1, p.n + 1)]) == p

    def test_contains_examples(self):
        assert find_pattern(perm(4321), perm(321)) is not None
        assert not contains_pattern(perm(123), perm(321))
        assert contains_pattern(parse_permutation("8 2 7 6 4 5 3 1 9 10"), perm(321))

    @given(perms_st)
    def test_trivial_containment(self, p):
        assert contains_pattern(p, identity(1))
        assert contains_pattern(p, p)

    @settings(max_examples=300)
    @given(st.integers(1, 9).flatmap(lambda n: st.permutations(range(1, n + 1))),
           st.sampled_from([(1, 2), (2, 1), (3, 2, 1), (1, 3, 2), (2, 4, 1, 3), (1, 3, 2, 4)]))
    def test_against_brute_force(self, vals, sigma):
        w = find_pattern(list(vals), Permutation(sigma))
        assert (w is not None) == brute_contains(vals, sigma)
        if w is not None:
            assert pattern_of([(i, vals[i - 1]) for i in w]).values == sigma


class TestRandom:
    def test_determinism(self):
        assert random_permutation(5, 7) == random_permutation(5, 7)
        assert random_permutation(1, 3) == identity(1)

    def test_uniform_n3(self):
        counts = Counter(random_permutation(3, derive_seed(11, s)).values for s in range(60000))
        assert len(counts) == 6
        assert all(abs(c / 60000 - 1 / 6) < 0.02 for c in counts.values())

    def test_sample_full_and_single(self):
        p = random_permutation(9, 1)
        full = m_sample(p, 9, 2)
        assert full.positions == tuple(range(1, 10)) and full.induced == p
        assert m_sample(p, 1, 3).induced == identity(1)

    def test_sample_errors(self):
        with pytest.raises(ValueError):
            m_sample(identity(3), 4, 0)
        with pytest.raises(ValueError):
            m_sample(identity(3), 0, 0)

    def test_sample_uniform_pairs(self):
        counts = Counter(m_sample(identity(4), 2, derive_seed(5, s)).positions for s in range(60000))
        assert len(counts) == 6
        assert all(abs(c / 60000 - 1 / 6) < 0.02 for c in counts.values())

    def test_heredity_of_samples(self):
        for s in range(200):
            p = random_member_321(30, s)
            assert not contains_pattern(m_sample(p, 10, s).induced, perm(321))


class TestAvoiders:
    @pytest.mark.parametrize("n", range(1, 9))
    def test_dyck_bijection_hits_all_avoiders(self, n):
        def paths(n):
            for ups in itertools.combinations(range(2 * n), n):
                steps = [-1] * (2 * n)
                for u in ups:
                    steps[u] = 1
                h = 0
                ok = True
                for s in steps:
                    h += s
                    ok &= h >= 0
                if ok:
                    yield steps
        images = {dyck_to_321_avoider(pth).values for pth in paths(n)}
        avoiders = {v for v in itertools.permutations(range(1, n + 1)) if not brute_contains(v, (3, 2, 1))}
        assert images == avoiders

    def test_random_member_small(self):
        seen = Counter(random_member_321(3, s).values for s in range(5000))
        assert set(seen) == {v for v in itertools.permutations((1, 2, 3)) if v != (3, 2, 1)}
        assert random_member_321(1, 4) == identity(1)

    def test_dyck_path_valid(self):
        for s in range(100):
            path = random_dyck_path(7, s)
            heights = list(itertools.accumulate(path))
            assert len(path) == 14 and min(heights) >= 0 and heights[-1] == 0

    def test_avoids(self):
        for s in range(100):
            assert not contains_pattern(random_member_321(50, s), perm(321))
