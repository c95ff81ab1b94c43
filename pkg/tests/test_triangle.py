import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypflow.triangle import (
    InadmissibleTriangleError,
    TriAngles,
    TriLengths,
    admissible_mask,
    angles_from_length_array,
    dangle_du_diag,
    dangle_du_offdiag,
    darea_du,
    extended_angles,
    half_angle_identity_check,
    scaled_length,
    tri_angles,
    tri_area,
)

from fd import fd_dangle, fd_darea, random_admissible_lengths, rel_err

# high-precision reference values (mpmath, 50 significant digits)
EQUILATERAL_UNIT_ANGLE = 0.91879787217802736904
EQUILATERAL_UNIT_AREA = 0.38519903705571113135
SCALED_UNIT_BY_LOG2 = 1.8217888580681214048  # 2*asinh(2*sinh(1/2))

lengths_st = st.floats(min_value=0.3, max_value=2.0, allow_nan=False)


def admissible_triples():
    return st.tuples(lengths_st, lengths_st, lengths_st).filter(
        lambda t: sum(t) - 2 * max(t) > 0.05
    )


class TestAngles:
    def test_equilateral_reference_values(self):
        a = tri_angles(TriLengths(1.0, 1.0, 1.0))
        assert a.a_i == pytest.approx(EQUILATERAL_UNIT_ANGLE, abs=1e-15)
        assert a.a_j == pytest.approx(EQUILATERAL_UNIT_ANGLE, abs=1e-15)
        assert a.a_k == pytest.approx(EQUILATERAL_UNIT_ANGLE, abs=1e-15)
        assert tri_area(a) == pytest.approx(EQUILATERAL_UNIT_AREA, abs=1e-15)

    def test_right_angle_from_pythagorean_relation(self):
        # hyperbolic Pythagoras: cosh c = cosh a cosh b forces a right angle
        a, b = 0.7, 1.1
        c = math.acosh(math.cosh(a) * math.cosh(b))
        ang = tri_angles(TriLengths(l_ij=a, l_ik=b, l_jk=c))
        assert ang.a_i == pytest.approx(math.pi / 2, abs=1e-14)

    @given(admissible_triples())
    @settings(max_examples=200, deadline=None)
    def test_angle_sum_below_pi_and_area_positive(self, triple):
        a = tri_angles(TriLengths(*triple))
        assert 0.0 < a.total() < math.pi
        assert tri_area(a) > 0.0
        assert min(a.a_i, a.a_j, a.a_k) > 0.0

    @given(admissible_triples())
    @settings(max_examples=200, deadline=None)
    def test_half_angle_identity(self, triple):
        l = TriLengths(*triple)
        assert half_angle_identity_check(l, tri_angles(l)) <= 1e-12

    def test_inadmissible_raises(self):
        with pytest.raises(InadmissibleTriangleError):
            tri_angles(TriLengths(0.3, 0.3, 2.0))

    def test_nonpositive_length_rejected(self):
        with pytest.raises(ValueError):
            TriLengths(-1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            TriLengths(0.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            TriLengths(math.inf, 1.0, 1.0)


class TestExtendedAngles:
    def test_matches_strict_on_admissible(self):
        l = TriLengths(1.0, 1.2, 0.9)
        assert extended_angles(l) == tri_angles(l)

    def test_degenerate_assigns_pi_opposite_longest(self):
        a = extended_angles(TriLengths(l_ij=0.3, l_ik=0.3, l_jk=2.0))
        # l_jk is longest, opposite vertex i
        assert a == TriAngles(math.pi, 0.0, 0.0)

    def test_tied_longest_edges_are_always_admissible(self):
        # with two edges tied for longest, sum - 2*max equals the third edge,
        # so the strict triangle inequalities hold and no convention is needed
        a = extended_angles(TriLengths(l_ij=0.1, l_ik=2.0, l_jk=2.0))
        assert a == tri_angles(TriLengths(l_ij=0.1, l_ik=2.0, l_jk=2.0))

    def test_near_degenerate_limit_is_continuous(self):
        # slightly admissible flat triangle: angles close to (pi, 0, 0)
        a = tri_angles(TriLengths(l_ij=0.5, l_ik=0.5, l_jk=0.999))
        assert a.a_i > 2.9
        assert a.a_j < 0.2 and a.a_k < 0.2


class TestScaledLength:
    def test_zero_factors_identity(self):
        assert scaled_length(1.3, 0.0, 0.0) == pytest.approx(1.3, abs=1e-15)

    def test_reference_value(self):
        assert scaled_length(1.0, math.log(2.0), 0.0) == pytest.approx(
            SCALED_UNIT_BY_LOG2, abs=1e-15
        )

    @given(
        st.floats(min_value=0.1, max_value=3.0),
        st.floats(min_value=-2.0, max_value=2.0),
        st.floats(min_value=-2.0, max_value=2.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_symmetric_and_monotone(self, d, ua, ub):
        l1 = scaled_length(d, ua, ub)
        assert l1 == scaled_length(d, ub, ua)
        assert scaled_length(d, ua + 0.1, ub) > l1
        assert l1 > 0.0

    @given(
        st.floats(min_value=0.1, max_value=3.0),
        st.floats(min_value=-2.0, max_value=2.0),
        st.floats(min_value=-2.0, max_value=2.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_group_property(self, d, ua, ub):
        # scaling twice composes additively in u
        once = scaled_length(d, ua + 0.3, ub - 0.2)
        twice = scaled_length(scaled_length(d, ua, ub), 0.3, -0.2)
        assert once == pytest.approx(twice, rel=1e-13, abs=1e-13)

    def test_overflow_guard(self):
        with pytest.raises(OverflowError):
            scaled_length(1.0, 300.0, 300.0)

    def test_invalid_input(self):
        with pytest.raises(ValueError):
            scaled_length(-1.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            scaled_length(1.0, math.nan, 0.0)


class TestDerivatives:
    def test_offdiag_matches_fd(self, rng):
        for _ in range(100):
            l = random_admissible_lengths(rng)
            a = tri_angles(l)
            assert rel_err(fd_dangle(l, "i", "j"), dangle_du_offdiag(l, a)) < 1e-8

    def test_offdiag_symmetry(self, rng):
        # d a_i / d u_j equals d a_j / d u_i
        for _ in range(50):
            l = random_admissible_lengths(rng)
            a = tri_angles(l)
            assert rel_err(fd_dangle(l, "j", "i"), dangle_du_offdiag(l, a)) < 1e-8

    def test_diag_matches_fd_and_is_negative(self, rng):
        for _ in range(100):
            l = random_admissible_lengths(rng)
            d = dangle_du_diag(l)
            assert d < 0.0
            assert rel_err(fd_dangle(l, "i", "i"), d) < 1e-8

    def test_darea_matches_fd(self, rng):
        for _ in range(100):
            l = random_admissible_lengths(rng)
            a = tri_angles(l)
            for v in ("i", "j", "k"):
                assert rel_err(fd_darea(l, v), darea_du(l, a, v)) < 1e-8

    def test_partials_sum_to_uniform_scaling_derivative(self, rng):
        # d a_i/d u_i + d a_i/d u_j + d a_i/d u_k equals the derivative of a_i
        # under scaling all three factors together
        h = 1e-5
        for _ in range(50):
            l = random_admissible_lengths(rng)
            a = tri_angles(l)
            da_dk = dangle_du_offdiag(
                TriLengths(l_ij=l.l_ik, l_ik=l.l_ij, l_jk=l.l_jk),
                TriAngles(a_i=a.a_i, a_j=a.a_k, a_k=a.a_j),
            )
            total = dangle_du_diag(l) + dangle_du_offdiag(l, a) + da_dk

            def a_i_at(s):
                return tri_angles(
                    TriLengths(
                        scaled_length(l.l_ij, s, s),
                        scaled_length(l.l_ik, s, s),
                        scaled_length(l.l_jk, s, s),
                    )
                ).a_i

            fd = (a_i_at(h) - a_i_at(-h)) / (2.0 * h)
            assert rel_err(fd, total) < 1e-8

    def test_darea_vertex_name_checked(self):
        l = TriLengths(1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            darea_du(l, tri_angles(l), "x")


class TestVectorized:
    def test_mask_matches_scalar(self, rng):
        L = rng.uniform(0.2, 2.0, size=(200, 3))
        mask = admissible_mask(L)
        for row, ok in zip(L, mask):
            assert ok == TriLengths(*row).admissible

    def test_angles_match_scalar(self, rng):
        for _ in range(50):
            l = random_admissible_lengths(rng)
            # row convention: entry c is the length opposite corner c
            row = np.array([[l.l_jk, l.l_ik, l.l_ij]])
            a = angles_from_length_array(row)[0]
            s = tri_angles(l)
            assert np.allclose(a, [s.a_i, s.a_j, s.a_k], atol=1e-14)
