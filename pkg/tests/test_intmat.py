"""Oracle tests for the integer matrix core.

Expected values are hand-computed and frozen; nothing here calls back into
the code under test to produce its own oracle.
"""

from __future__ import annotations

import random

from torus_model.intmat import (
    elementary_divisors,
    hnf,
    hnf_contains,
    hnf_solve,
    index_in_saturation,
    lattice_contains,
    lattice_intersect,
    lattice_sum,
    left_kernel,
    mat_mul,
    saturation,
    snf,
)


def test_hnf_hand_values():
    assert hnf([[2, 0], [0, 1]]) == [[2, 0], [0, 1]]
    assert hnf([[0, 1], [2, 0]]) == [[2, 0], [0, 1]]
    assert hnf([[1, 2], [3, 4]]) == [[1, 0], [0, 2]]
    assert hnf([[4, 6]]) == [[4, 6]]
    assert hnf([[-4, -6]]) == [[4, 6]]
    assert hnf([[2, 0], [0, 2], [1, 1]]) == [[1, 1], [0, 2]]
    assert hnf([[0, 0], [0, 0]]) == []
    assert hnf([]) == []


def test_hnf_pivots_canonical():
    basis = hnf([[3, 1, 2], [1, 4, 7], [0, 0, 5]])
    pivots = []
    for row in basis:
        c = next(j for j, x in enumerate(row) if x != 0)
        assert row[c] > 0
        pivots.append(c)
        for above in basis[: basis.index(row)]:
            assert 0 <= above[c] < row[c]
    assert pivots == sorted(pivots)


def test_hnf_left_unimodular_invariance():
    # canonical form depends only on the row lattice
    rng = random.Random(7)
    for _ in range(300):
        m, n = rng.randint(1, 4), rng.randint(1, 4)
        a = [[rng.randint(-9, 9) for _ in range(n)] for _ in range(m)]
        u = [[1 if i == j else 0 for j in range(m)] for i in range(m)]
        for _ in range(6):
            i, j = rng.randrange(m), rng.randrange(m)
            if i == j:
                continue
            c = rng.randint(-3, 3)
            u[i] = [x + c * y for x, y in zip(u[i], u[j])]
        assert hnf(mat_mul(u, a)) == hnf(a)


def test_snf_round_trip():
    rng = random.Random(11)
    for _ in range(200):
        m, n = rng.randint(1, 4), rng.randint(1, 4)
        a = [[rng.randint(-30, 30) for _ in range(n)] for _ in range(m)]
        d, u, v, vinv = snf(a)
        prod = mat_mul(mat_mul(u, a), v)
        for i in range(m):
            for j in range(n):
                expect = d[i] if i == j and i < len(d) else 0
                assert prod[i][j] == expect
        # v * vinv = identity
        vv = mat_mul(v, vinv)
        assert vv == [[1 if i == j else 0 for j in range(n)] for i in range(n)]
        nonzero = [x for x in d if x]
        for x, y in zip(nonzero, nonzero[1:]):
            assert y % x == 0


def test_elementary_divisors_hand_values():
    assert elementary_divisors([[2, 0], [0, 3]]) == [1, 6]
    assert elementary_divisors([[2, 0], [0, 2]]) == [2, 2]
    assert elementary_divisors([[4]]) == [4]
    assert elementary_divisors([[0, 0]]) == []


def test_saturation_hand_values():
    assert saturation([[2, 0]]) == [[1, 0]]
    assert saturation([[2, 4]]) == [[1, 2]]
    assert saturation([[2, 0], [0, 3]]) == [[1, 0], [0, 1]]
    assert saturation([[6, 4]], ncols=2) == [[3, 2]]
    assert saturation([], ncols=2) == []


def test_index_in_saturation():
    assert index_in_saturation([[2, 0], [0, 3]]) == 6
    assert index_in_saturation([[1, 0], [0, 1]]) == 1
    assert index_in_saturation([[2, 4]]) == 2


def test_membership_and_solve():
    basis = hnf([[2, 0], [1, 3]])
    assert hnf_contains(basis, [3, 3])
    assert not hnf_contains(basis, [1, 0])
    coeffs = hnf_solve(basis, [3, 3])
    assert coeffs is not None
    v = [0, 0]
    for c, row in zip(coeffs, basis):
        v = [x + c * y for x, y in zip(v, row)]
    assert v == [3, 3]
    assert hnf_solve(basis, [0, 1]) is None


def test_left_kernel():
    assert left_kernel([[1, 2], [2, 4]]) == [[2, -1]]
    assert left_kernel([[1, 0], [0, 1]]) == []
    k = left_kernel([[1, 1, 1], [1, 1, 1], [2, 2, 2]])
    # kernel of a rank-1 stack of three rows has rank 2
    assert len(k) == 2
    for z in k:
        s = [0, 0, 0]
        for c, row in zip(z, [[1, 1, 1], [1, 1, 1], [2, 2, 2]]):
            s = [x + c * y for x, y in zip(s, row)]
        assert s == [0, 0, 0]


def test_lattice_operations():
    assert lattice_intersect([[2, 0]], [[3, 0]], 2) == [[6, 0]]
    assert lattice_intersect([[1, 0]], [[0, 1]], 2) == []
    assert lattice_intersect([[2, 0], [0, 1]], [[1, 1]], 2) == [[2, 2]]
    assert lattice_sum([[2, 0]], [[0, 3]], 2) == [[2, 0], [0, 3]]
    assert lattice_sum([[2, 0]], [[3, 0]], 2) == [[1, 0]]
    assert lattice_contains(hnf([[1, 0], [0, 1]]), [[5, -7]])
    assert not lattice_contains(hnf([[2, 0]]), [[1, 0]])


def test_intersection_contained_in_both():
    rng = random.Random(3)
    for _ in range(150):
        n = rng.randint(1, 3)
        a = [[rng.randint(-6, 6) for _ in range(n)] for _ in range(rng.randint(1, 3))]
        b = [[rng.randint(-6, 6) for _ in range(n)] for _ in range(rng.randint(1, 3))]
        cap = lattice_intersect(a, b, n)
        ha, hb = hnf(a), hnf(b)
        assert lattice_contains(ha, cap)
        assert lattice_contains(hb, cap)
        # and the sum of the two lattices contains both
        s = lattice_sum(a, b, n)
        assert lattice_contains(s, ha)
        assert lattice_contains(s, hb)
