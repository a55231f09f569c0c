import random

import pytest
from hypothesis import given, strategies as st

from torus_model import intmat
from torus_model.lattice_groups import (
    Character,
    Representation,
    TorusContext,
    canonical_subgroup,
    contains,
    fixed_subrep,
    full_torus,
    identity_component,
    intersection,
    is_cotoral,
    join,
    kernel_decomposition,
    kernel_of_character,
    lattice_ops,
    punctured_cube_support,
    representation,
    representation_from_json,
    representation_to_json,
    subgroup_from_json,
    subgroup_to_json,
    trivial_subgroup,
)

R1 = TorusContext(1)
R2 = TorusContext(2)


def sub(ctx, rows):
    return canonical_subgroup(ctx, rows)


def random_subgroup(ctx, rng):
    k = rng.randrange(0, ctx.rank + 1)
    rows = [[rng.randrange(-4, 5) for _ in range(ctx.rank)] for _ in range(k)]
    return sub(ctx, rows)


class TestCanonicalForm:
    def test_full_torus(self):
        g = sub(R1, [])
        assert g.dimension == 1
        assert g.is_connected
        assert g.is_full
        assert g == full_torus(R1)

    def test_finite_order_two(self):
        h = sub(R2, [[2, 0], [0, 1]])
        assert h.dimension == 0
        assert h.codimension == 2
        assert h.component_order == 2
        assert not h.is_connected

    def test_circle_subgroup(self):
        h = sub(R2, [[1, 0]])
        assert h.dimension == 1
        assert h.is_connected

    def test_idempotent_on_canonical_input(self):
        h = sub(R2, [[2, 1], [0, 3]])
        again = sub(R2, h.annihilator_rows())
        assert h == again

    def test_canonical_invariance_1000_random(self):
        # row operations must not change the canonical encoding
        rng = random.Random(97)
        for _ in range(1000):
            r = rng.randrange(1, 4)
            ctx = TorusContext(r)
            k = rng.randrange(0, r + 2)
            rows = [[rng.randrange(-6, 7) for _ in range(r)] for _ in range(k)]
            h = sub(ctx, rows)
            mixed = [list(row) for row in rows]
            rng.shuffle(mixed)
            if len(mixed) >= 2:
                i, j = rng.randrange(len(mixed)), rng.randrange(len(mixed))
                if i != j:
                    c = rng.randrange(-3, 4)
                    mixed[i] = [x + c * y for x, y in zip(mixed[i], mixed[j])]
            if mixed:
                i = rng.randrange(len(mixed))
                mixed[i] = [-x for x in mixed[i]]
            # appending a row already in the span changes nothing
            if mixed:
                mixed.append(list(mixed[rng.randrange(len(mixed))]))
            assert sub(ctx, mixed) == h

    def test_rejects_bad_rows(self):
        with pytest.raises(ValueError):
            sub(R2, [[1, 2, 3]])
        with pytest.raises(ValueError):
            sub(R1, [["x"]])


class TestIdentityComponent:
    def test_connected_fixed_point(self):
        h = sub(R2, [[1, 0]])
        assert identity_component(h) == h

    def test_full_rank_index_two(self):
        h = sub(R2, [[2, 0], [0, 1]])
        assert identity_component(h) == trivial_subgroup(R2)

    def test_rank_one_index_two(self):
        h = sub(R2, [[2, 0]])
        assert identity_component(h) == sub(R2, [[1, 0]])

    def test_maximal_connected_subgroup(self):
        # identity_component(H) contains every connected subgroup of H
        rng = random.Random(31)
        for r in (1, 2, 3):
            ctx = TorusContext(r)
            family = [random_subgroup(ctx, rng) for _ in range(40)]
            for h in family:
                h1 = identity_component(h)
                assert contains(h, h1)
                assert h1.dimension == h.dimension
                for c in family:
                    if c.is_connected and contains(h, c):
                        assert contains(h1, c)


class TestLatticeOps:
    def test_top_element(self):
        g = full_torus(R2)
        rng = random.Random(5)
        for _ in range(20):
            k = random_subgroup(R2, rng)
            assert contains(g, k)

    def test_two_coordinate_kernels(self):
        h = kernel_of_character(R2, [1, 0])
        k = kernel_of_character(R2, [0, 1])
        ops = lattice_ops(h, k)
        assert ops["intersection"] == trivial_subgroup(R2)
        assert ops["join"] == full_torus(R2)
        assert not ops["contains"]

    def test_reflexive(self):
        h = sub(R2, [[2, 1], [0, 3]])
        assert contains(h, h)
        assert intersection(h, h) == h
        assert join(h, h) == h

    def test_galois_antitone_membership_sampling(self):
        rng = random.Random(41)
        for _ in range(200):
            r = rng.randrange(1, 4)
            ctx = TorusContext(r)
            h = random_subgroup(ctx, rng)
            k = random_subgroup(ctx, rng)
            c = contains(h, k)
            # K <= H iff every character killing H also kills K
            ah, ak = h.annihilator_rows(), k.annihilator_rows()
            if c:
                for _ in range(5):
                    combo = [0] * r
                    for row in ah:
                        m = rng.randrange(-2, 3)
                        combo = [x + m * y for x, y in zip(combo, row)]
                    assert intmat.hnf_contains(ak, combo)
            else:
                assert any(not intmat.hnf_contains(ak, list(row)) for row in ah)

    def test_intersection_join_bounds(self):
        rng = random.Random(43)
        for _ in range(100):
            r = rng.randrange(1, 4)
            ctx = TorusContext(r)
            h = random_subgroup(ctx, rng)
            k = random_subgroup(ctx, rng)
            m = intersection(h, k)
            j = join(h, k)
            assert contains(h, m) and contains(k, m)
            assert contains(j, h) and contains(j, k)


class TestCotoral:
    def test_full_in_full(self):
        g = full_torus(R1)
        assert is_cotoral(g, g)

    def test_order_two_in_circle(self):
        l = sub(R1, [[2]])
        assert is_cotoral(l, full_torus(R1))

    def test_torsion_quotient_rejected(self):
        # K/L = Z/2 x circle is not a torus
        l = sub(R2, [[2, 0], [0, 1]])
        k = sub(R2, [[4, 0]])
        assert contains(k, l)
        assert not is_cotoral(l, k)

    def test_disconnected_pair_can_be_cotoral(self):
        l = sub(R2, [[2, 0], [0, 1]])
        k = sub(R2, [[2, 0]])
        assert is_cotoral(l, k)

    def test_not_contained_is_not_cotoral(self):
        l = kernel_of_character(R2, [1, 0])
        k = kernel_of_character(R2, [0, 1])
        assert not is_cotoral(l, k)

    def test_connected_l_descends_to_identity_component(self):
        rng = random.Random(59)
        for _ in range(300):
            r = rng.randrange(1, 4)
            ctx = TorusContext(r)
            l = random_subgroup(ctx, rng)
            k = random_subgroup(ctx, rng)
            if l.is_connected and is_cotoral(l, k):
                assert is_cotoral(l, identity_component(k))


class TestRepresentations:
    def test_trivial_subgroup_fixes_everything(self):
        v = representation([((1,), 2), ((3,), 1)])
        assert fixed_subrep(v, trivial_subgroup(R1)) == v

    def test_weight_one_not_fixed_by_order_two(self):
        v = representation([((1,), 1)])
        h = sub(R1, [[2]])
        assert fixed_subrep(v, h).summands == ()

    def test_weight_two_fixed_by_order_two(self):
        v = representation([((2,), 3)])
        h = sub(R1, [[2]])
        assert fixed_subrep(v, h) == v

    @given(
        st.lists(
            st.tuples(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), st.integers(1, 3)),
            max_size=6,
        ),
        st.lists(
            st.tuples(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), st.integers(1, 3)),
            max_size=6,
        ),
        st.lists(st.lists(st.integers(-3, 3), min_size=2, max_size=2), max_size=2),
    )
    def test_fixed_subrep_additive(self, ws1, ws2, rows):
        h = sub(R2, rows)
        v, w = representation(ws1), representation(ws2)
        lhs = fixed_subrep(v.direct_sum(w), h)
        rhs = fixed_subrep(v, h).direct_sum(fixed_subrep(w, h))
        assert lhs == rhs

    def test_rejects_nonpositive_mult(self):
        with pytest.raises(ValueError):
            representation([((1,), 0)])


class TestKernelDecomposition:
    def test_full_torus_empty(self):
        assert kernel_decomposition(full_torus(R2)) == []

    def test_trivial_subgroup_two_kernels(self):
        ks = kernel_decomposition(trivial_subgroup(R2))
        assert len(ks) == 2
        assert all(k.codimension == 1 for k in ks)
        meet = ks[0]
        for k in ks[1:]:
            meet = intersection(meet, k)
        assert meet == trivial_subgroup(R2)

    def test_codimension_one_is_its_own_kernel(self):
        h = sub(R1, [[2]])
        assert kernel_decomposition(h) == [h]

    def test_intersection_recovers_h(self):
        rng = random.Random(61)
        for _ in range(100):
            r = rng.randrange(1, 4)
            ctx = TorusContext(r)
            h = random_subgroup(ctx, rng)
            ks = kernel_decomposition(h)
            assert all(k.codimension == 1 for k in ks)
            meet = full_torus(ctx)
            for k in ks:
                meet = intersection(meet, k)
            assert meet == h


class TestPuncturedCubeSupport:
    def test_finite_k_never_supported(self):
        circles = [kernel_of_character(R2, [1, 0]), kernel_of_character(R2, [0, 1])]
        k = sub(R2, [[2, 0], [0, 1]])
        assert not punctured_cube_support(circles, k)

    def test_full_torus_supported(self):
        circles = [kernel_of_character(R2, [1, 0])]
        assert punctured_cube_support(circles, full_torus(R2))

    def test_kernel_supports_itself(self):
        c1 = kernel_of_character(R2, [1, 0])
        c2 = kernel_of_character(R2, [0, 1])
        assert punctured_cube_support([c1, c2], c1)

    def test_rejects_non_circle(self):
        with pytest.raises(ValueError):
            punctured_cube_support([sub(R2, [[2, 0]])], full_torus(R2))
        with pytest.raises(ValueError):
            punctured_cube_support([trivial_subgroup(R2)], full_torus(R2))


class TestJson:
    def test_subgroup_round_trip(self):
        h = sub(R2, [[2, 1], [0, 3]])
        assert subgroup_from_json(subgroup_to_json(h)) == h

    def test_subgroup_json_canonicalizes(self):
        obj = {"rank": 2, "annihilator": [[0, 3], [2, 1]]}
        assert subgroup_from_json(obj) == sub(R2, [[2, 1], [0, 3]])

    def test_representation_round_trip(self):
        v = representation([((1, 0), 2), ((0, 3), 1)])
        assert representation_from_json(representation_to_json(v)) == v

    def test_malformed_rejected(self):
        with pytest.raises(ValueError):
            subgroup_from_json({"rank": 2})
        with pytest.raises(ValueError):
            subgroup_from_json({"rank": -1, "annihilator": []})
        with pytest.raises(ValueError):
            representation_from_json({"summands": [{"weight": [1], "mult": 0}]})
