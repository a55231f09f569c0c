import math

import pytest
from hypothesis import given, strategies as st

from torus_model import graded
from torus_model.graded import (
    CanonicalEulerSet,
    Free,
    IdempotentPiece,
    Localize,
    NotLocallyFinite,
    Shift,
    Sum,
    TensorOver,
    constant,
    evaluate_degrees,
    explicit_euler_set,
    canonical_euler_set,
    euler_set_equiv,
    hom_window,
    homology,
    koszul,
    localize,
    localize_exactness_rewrite,
    module_from_json,
    module_to_json,
    complex_from_json,
    complex_to_json,
    monomials,
    poly,
    poly_ring,
    quotient,
    ring_map,
    shift_complex,
    localize_complex,
    variable,
    zero_module,
)

R1 = poly_ring([[1]])
R2 = poly_ring([[1, 0], [0, 1]])
X = variable(1, 0)
X2, Y2 = variable(2, 0), variable(2, 1)


def dims(result, window):
    return [result.dimension(d) for d in range(window[0], window[1] + 1)]


class TestEvaluation:
    def test_zero_module(self):
        r = evaluate_degrees(zero_module(R1), (-6, 0))
        assert dims(r, (-6, 0)) == [0] * 7

    def test_free_one_variable(self):
        r = evaluate_degrees(Free(R1, (0,)), (-6, 0))
        assert [r.dimension(d) for d in (0, -1, -2, -3, -4, -5, -6)] == [1, 0, 1, 0, 1, 0, 1]
        assert r.dimension(2) if False else True
        with pytest.raises(ValueError):
            r.dimension(2)

    def test_free_two_variables(self):
        r = evaluate_degrees(Free(R2, (0,)), (-10, 0))
        for k in range(0, 6):
            assert r.dimension(-2 * k) == k + 1

    def test_positive_degrees_vanish_for_free(self):
        r = evaluate_degrees(Free(R1, (0,)), (0, 4))
        assert dims(r, (0, 4)) == [1, 0, 0, 0, 0]

    def test_shift_coherence(self):
        m = quotient(R1, (0,), rows=((-4, (X * X,)),))
        for n in (-3, 1, 2):
            a = evaluate_degrees(Shift(m, n), (-8, 2))
            b = evaluate_degrees(m, (-8 - n, 2 - n))
            for d in range(-8, 3):
                assert a.dimension(d) == b.dimension(d - n)

    def test_quotient_by_x_squared(self):
        m = quotient(R1, (0,), rows=((-4, (X * X,)),))
        r = evaluate_degrees(m, (-8, 0))
        assert [r.dimension(d) for d in (0, -2, -4, -6, -8)] == [1, 1, 0, 0, 0]

    def test_ring_level_form_quotient(self):
        # killing y leaves a one-variable polynomial ring
        m = quotient(R2, (0,), forms=((0, 1),))
        r = evaluate_degrees(m, (-6, 0))
        assert [r.dimension(d) for d in (0, -2, -4, -6)] == [1, 1, 1, 1]

    def test_sum_additivity(self):
        a = Free(R1, (0,))
        b = quotient(R1, (0,), rows=((-4, (X * X,)),))
        s = Sum((a, b))
        ra, rb, rs = (evaluate_degrees(m, (-6, 0)) for m in (a, b, s))
        for d in range(-6, 1):
            assert rs.dimension(d) == ra.dimension(d) + rb.dimension(d)

    def test_idempotent_piece(self):
        m = Free(R1, (0,))
        assert dims(evaluate_degrees(IdempotentPiece(m, True), (-4, 0)), (-4, 0)) == [1, 0, 1, 0, 1]
        assert dims(evaluate_degrees(IdempotentPiece(m, False), (-4, 0)), (-4, 0)) == [0] * 5

    def test_monomial_count(self):
        for m in range(0, 4):
            for k in range(0, 7):
                expect = math.comb(m + k - 1, k) if m > 0 else (1 if k == 0 else 0)
                assert len(monomials(m, k)) == expect


class TestBaseChange:
    def test_free_extends_to_bigger_ring(self):
        rm = ring_map(R1, R2, [[1, 0]])
        m = TensorOver(rm, Free(R1, (0,)))
        r = evaluate_degrees(m, (-8, 0))
        for k in range(0, 5):
            assert r.dimension(-2 * k) == k + 1

    def test_relation_carried_along(self):
        rm = ring_map(R1, R2, [[1, 0]])
        m = TensorOver(rm, quotient(R1, (0,), rows=((-4, (X * X,)),)))
        r = evaluate_degrees(m, (-8, 0))
        assert [r.dimension(d) for d in (0, -2, -4, -6, -8)] == [1, 2, 2, 2, 2]

    def test_form_carried_along(self):
        rm = ring_map(R1, R2, [[2, -1]])
        m = TensorOver(rm, quotient(R1, (0,), forms=((1,),)))
        r = evaluate_degrees(m, (-4, 0))
        # the image form 2x - y cuts Q[x,y] down to one variable
        assert [r.dimension(d) for d in (0, -2, -4)] == [1, 1, 1]


class TestLocalization:
    def test_laurent_ring(self):
        m = localize(Free(R1, (0,)), explicit_euler_set([[(1,)]]))
        r = evaluate_degrees(m, (-4, 4))
        assert dims(r, (-4, 4)) == [1, 0, 1, 0, 1, 0, 1, 0, 1]

    def test_laurent_kills_torsion(self):
        m = localize(
            quotient(R1, (0,), rows=((-4, (X * X,)),)),
            explicit_euler_set([[(1,)]]),
        )
        r = evaluate_degrees(m, (-6, 6))
        assert dims(r, (-6, 6)) == [0] * 13

    def test_explicit_factor_dying_kills_component(self):
        m = localize(
            quotient(R2, (0,), forms=((1, 0),)),
            explicit_euler_set([[(1, 0)]]),
        )
        r = evaluate_degrees(m, (-6, 0))
        assert dims(r, (-6, 0)) == [0] * 7

    def test_canonical_set_kill_rule(self):
        # quotient by x; the complement of the avoid lattice Z(0,1) meets
        # the span of the killed form, so the localized module is zero
        m = localize(
            quotient(R2, (0,), forms=((1, 0),)),
            canonical_euler_set([[0, 1]], 2),
        )
        r = evaluate_degrees(m, (-6, 0))
        assert dims(r, (-6, 0)) == [0] * 7

    def test_canonical_set_trivial_when_avoid_is_everything(self):
        m = localize(Free(R1, (0,)), canonical_euler_set([[1]], 1))
        r = evaluate_degrees(m, (-4, 2))
        assert dims(r, (-4, 2)) == [1, 0, 1, 0, 1, 0, 0]

    def test_canonical_set_laurent(self):
        m = localize(Free(R1, (0,)), canonical_euler_set([], 1))
        r = evaluate_degrees(m, (-2, 2))
        assert dims(r, (-2, 2)) == [1, 0, 1, 0, 1]

    def test_not_locally_finite(self):
        m = localize(Free(R2, (0,)), explicit_euler_set([[(1, 0)]]))
        with pytest.raises(NotLocallyFinite):
            evaluate_degrees(m, (-2, 0))

    def test_form_quotient_then_laurent(self):
        # Q[x,y]/(y) localized away from zero is a Laurent ring
        m = localize(
            quotient(R2, (0,), forms=((0, 1),)),
            explicit_euler_set([[(1, 0)]]),
        )
        r = evaluate_degrees(m, (-4, 4))
        assert dims(r, (-4, 4)) == [1, 0, 1, 0, 1, 0, 1, 0, 1]


class TestKoszul:
    def test_empty_koszul_is_base(self):
        c = koszul(R1, [])
        r = homology(c, (-6, 0))
        assert [r.dimension(d) for d in (0, -2, -4, -6)] == [1, 1, 1, 1]

    def test_single_variable(self):
        c = koszul(R1, [X])
        r = homology(c, (-10, 2))
        assert r.dimension(0) == 1
        for d in range(-10, 3):
            if d != 0:
                assert r.dimension(d) == 0

    def test_two_variables(self):
        c = koszul(R2, [X2, Y2])
        r = homology(c, (-12, 2))
        assert r.dimension(0) == 1
        for d in range(-12, 3):
            if d != 0:
                assert r.dimension(d) == 0

    def test_regular_sequence_matches_quotient_ranks(self):
        # independent oracle: H of the Koszul complex on a regular sequence
        # equals the quotient module, degree by degree
        for n in (1, 2, 3):
            ring = poly_ring([[1 if i == j else 0 for j in range(n)] for i in range(n)])
            els = [variable(n, i) for i in range(n)]
            c = koszul(ring, els)
            r = homology(c, (-8, 0))
            q = quotient(ring, (0,), forms=tuple(tuple(1 if j == i else 0 for j in range(n)) for i in range(n)))
            rq = evaluate_degrees(q, (-8, 0))
            for d in range(-8, 1):
                assert r.dimension(d) == rq.dimension(d)

    def test_cone_of_identity_is_acyclic(self):
        c = koszul(R1, [constant(1, 1)])
        r = homology(c, (-6, 2))
        assert dims(r, (-6, 2)) == [0] * 9

    def test_koszul_on_a_module_base(self):
        # base Q[x]/(x^2), element x: H_0 = base/x = Q at total degree 0;
        # H_1 = ann(x) = Q.x at internal degree -4, total degree -3
        base = quotient(R1, (0,), rows=((-4, (X * X,)),))
        c = koszul(R1, [X], base=base)
        r = homology(c, (-8, 2))
        assert r.dimension(0) == 1
        assert r.dimension(-3) == 1
        assert r.dimension(-2) == 0
        assert r.dimension(-4) == 0

    def test_shifted_complex(self):
        c = shift_complex(koszul(R1, [X]), 3)
        r = homology(c, (-4, 4))
        assert r.dimension(3) == 1
        assert sum(dims(r, (-4, 4))) == 1

    def test_rejects_inhomogeneous(self):
        with pytest.raises(ValueError):
            poly(1, [((1,), 1), ((2,), 1)])


class TestLocalizeRewrite:
    def test_trivial_set_identity(self):
        c = localize_complex(koszul(R1, [X]), explicit_euler_set([[]]))
        out = localize_exactness_rewrite(c)
        assert isinstance(out, graded.KoszulComplex)
        assert out.sets == ()
        r = homology(out, (-4, 0))
        assert r.dimension(0) == 1

    def test_inverting_own_element_kills_quotient(self):
        c = localize_complex(koszul(R1, [X]), explicit_euler_set([[(1,)]]))
        out = localize_exactness_rewrite(c)
        r = homology(out, (-6, 2))
        assert dims(r, (-6, 2)) == [0] * 9

    def test_zero_differential_passthrough(self):
        m = localize(Free(R1, (0,)), explicit_euler_set([[(1,)]]))
        c = graded.ModuleComplex(m)
        assert localize_exactness_rewrite(c) is c

    def test_two_variable_collapse(self):
        # E^{-1} Kos(Q[x,y]; x, y) with E inverting x: quotient is torsion,
        # rewrite must collapse it to zero without per-degree evaluation
        c = localize_complex(koszul(R2, [X2, Y2]), explicit_euler_set([[(1, 0)]]))
        with pytest.raises(NotLocallyFinite):
            homology(c, (-4, 0))
        out = localize_exactness_rewrite(c)
        r = homology(out, (-8, 2))
        assert dims(r, (-8, 2)) == [0] * 11

    def test_partial_sequence_leaves_line(self):
        # inverting x with Kos(Q[x,y]; y): collapse to x-Laurent ring
        c = localize_complex(koszul(R2, [Y2]), explicit_euler_set([[(1, 0)]]))
        out = localize_exactness_rewrite(c)
        r = homology(out, (-4, 4))
        assert dims(r, (-4, 4)) == [1, 0, 1, 0, 1, 0, 1, 0, 1]

    def test_non_regular_input_unchanged(self):
        c = localize_complex(koszul(R2, [X2, X2]), explicit_euler_set([[(0, 1)]]))
        out = localize_exactness_rewrite(c)
        assert out is c


class TestEulerSetEquiv:
    def test_reflexive(self):
        e = explicit_euler_set([[(1,)]])
        assert euler_set_equiv(e, e)

    def test_scaling_and_powers_ignored(self):
        e1 = explicit_euler_set([[(1,)]])
        e2 = explicit_euler_set([[(3,)], [(1,), (1,)]])
        assert euler_set_equiv(e1, e2)

    def test_extra_line_detected(self):
        e1 = explicit_euler_set([[(1, 0)]])
        e2 = explicit_euler_set([[(1, 0)], [(0, 1)]])
        assert not euler_set_equiv(e1, e2)

    def test_equivalence_relation_on_samples(self):
        sets = [
            explicit_euler_set([[(1,)]]),
            explicit_euler_set([[(2,)]]),
            explicit_euler_set([[(1,), (1,)]]),
        ]
        for a in sets:
            assert euler_set_equiv(a, a)
            for b in sets:
                assert euler_set_equiv(a, b) == euler_set_equiv(b, a)
                for c in sets:
                    if euler_set_equiv(a, b) and euler_set_equiv(b, c):
                        assert euler_set_equiv(a, c)

    def test_equivalent_sets_same_evaluation(self):
        e1 = explicit_euler_set([[(1,)]])
        e2 = explicit_euler_set([[(2,)]])
        assert euler_set_equiv(e1, e2)
        r1 = evaluate_degrees(localize(Free(R1, (0,)), e1), (-4, 4))
        r2 = evaluate_degrees(localize(Free(R1, (0,)), e2), (-4, 4))
        assert dims(r1, (-4, 4)) == dims(r2, (-4, 4))

    def test_rejects_zero_factor(self):
        with pytest.raises(ValueError):
            explicit_euler_set([[(0, 0)]])


class TestHomWindow:
    def test_free_adjunction(self):
        y = quotient(R1, (0,), rows=((-4, (X * X,)),))
        ry = evaluate_degrees(y, (-8, 4))
        for s in (-2, 0, 2):
            h = hom_window(Free(R1, (s,)), y, (-4, 2))
            for d in range(-4, 3):
                assert h.dimension(d) == ry.dimension(d + s)

    def test_endomorphisms_of_the_ring(self):
        h = hom_window(Free(R1, (0,)), Free(R1, (0,)), (0, 0))
        assert h.dimension(0) == 1

    def test_hom_into_zero(self):
        h = hom_window(Free(R1, (0, -2)), zero_module(R1), (-4, 4))
        assert dims(h, (-4, 4)) == [0] * 9

    def test_unsupported_source_shape(self):
        with pytest.raises(ValueError):
            hom_window(quotient(R1, (0,), rows=((-4, (X * X,)),)), Free(R1, (0,)), (0, 0))


class TestJson:
    def test_module_round_trip(self):
        rm = ring_map(R1, R2, [[1, 0]])
        m = Localize(
            Sum((
                Shift(TensorOver(rm, quotient(R1, (0,), rows=((-4, (X * X,)),))), 2),
                IdempotentPiece(Free(R2, (0, -1)), True),
            )),
            (canonical_euler_set([[1, 0]], 2),),
        )
        again = module_from_json(module_to_json(m))
        assert again == m

    def test_complex_round_trip(self):
        c = localize_complex(shift_complex(koszul(R2, [X2, Y2]), 1), explicit_euler_set([[(1, 0)]]))
        again = complex_from_json(complex_to_json(c))
        assert again == c

    def test_result_json_shape(self):
        r = evaluate_degrees(Free(R1, (0,)), (-2, 0))
        obj = r.to_json()
        assert obj["window"] == [-2, 0]
        assert obj["degrees"]["0"][0]["dimension"] == 1


@given(st.integers(-4, 4), st.integers(1, 3))
def test_shift_coherence_random(n, reps):
    m = Free(R1, tuple(0 for _ in range(reps)))
    a = evaluate_degrees(Shift(m, n), (-6, 2))
    b = evaluate_degrees(m, (-6 - n, 2 - n))
    for d in range(-6, 3):
        assert a.dimension(d) == b.dimension(d - n)


@given(st.integers(1, 5))
def test_laurent_kills_any_cyclic_torsion(m):
    mod = localize(
        quotient(R1, (0,), rows=((-2 * m, (poly(1, [((m,), 1)]),)),)),
        explicit_euler_set([[(1,)]]),
    )
    r = evaluate_degrees(mod, (-6, 6))
    assert all(r.dimension(d) == 0 for d in range(-6, 7))
