import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mvm.core import Constellation, PairGeometry, random_constellation
from mvm.errprob import (
    GAMMA_ZERO,
    METHODS,
    T_SWITCH,
    BerCurve,
    CurveKind,
    SnrPoint,
    TargetUnreachable,
    db_to_linear,
    evaluate_curve,
    hamming_matrix,
    linear_to_db,
    pairwise_error,
    pairwise_error_asymptotic,
    pairwise_error_exact,
    pairwise_error_matrix,
    pairwise_error_simple,
    read_curves_csv,
    solve_snr_at_target,
    spectral_efficiency,
    union_bound_bit,
    union_bound_symbol,
    welch_rankin_bound,
    write_curves_csv,
)
from mvm.expansion import a_coefficient, asymptotic_coeffs, hankel_coefficient
from mvm.shaping import orthogonal_set
from mvm.specfun import marcum_q1
from oracles import closed_order0, closed_order1, closed_order1_coeffs, pairwise_exact_mp

# 50-digit Neumann-series values
EXACT_REF = [
    (0.5, 20.0, 9.8181347325182224556e-4),
    (0.1, 5.0, 0.042206269711205670656),
    (0.9, 40.0, 0.023497825571429212253),
    (0.5, 200.0, 9.3555199617032059855e-24),
    (0.95, 500.0, 2.9054165539918439541e-7),
    (0.3, 60.0, 6.8129249588576205836e-11),
]


def orthogonal_pair(bits=True):
    c = Constellation.from_rows(np.eye(2))
    return c.with_bits([0, 1]) if bits else c


class TestSnrPoint:
    def test_conversions(self):
        p = SnrPoint.from_bit_db(10.0, 4)
        assert p.gamma_b == pytest.approx(10.0)
        assert p.gamma_s == pytest.approx(40.0)
        assert p.bit_db == pytest.approx(10.0)
        assert p.symbol_db == pytest.approx(10 * math.log10(40.0))
        assert p.sigma2 == pytest.approx(1 / 80.0)

    @given(st.floats(-20, 60), st.integers(1, 12))
    def test_gamma_s_is_k_gamma_b(self, db, k):
        p = SnrPoint.from_symbol_db(db, k)
        assert abs(p.gamma_s - k * p.gamma_b) <= 1e-12 * p.gamma_s

    def test_inconsistent_rejected(self):
        with pytest.raises(ValueError):
            SnrPoint(10.0, 3.0, 2)
        with pytest.raises(ValueError):
            SnrPoint.from_gamma_s(-1.0)

    def test_db_roundtrip(self):
        x = np.array([0.1, 1.0, 123.0])
        np.testing.assert_allclose(db_to_linear(linear_to_db(x)), x, rtol=1e-14)


class TestPairwiseExact:
    @pytest.mark.parametrize("g,gs,ref", EXACT_REF)
    def test_reference(self, g, gs, ref):
        assert pairwise_error_exact(g, gs) == pytest.approx(ref, rel=1e-12)

    def test_orthogonal(self):
        assert pairwise_error_exact(0.0, 10.0) == pytest.approx(0.5 * math.exp(-5.0), rel=1e-15)
        assert pairwise_error_exact(0.5 * GAMMA_ZERO, 10.0) == pytest.approx(0.5 * math.exp(-5.0), rel=1e-12)

    @pytest.mark.parametrize("gs", [0.1, 5.0, 1e3, 1e6])
    def test_identical_is_half(self, gs):
        assert pairwise_error_exact(1.0, gs) == 0.5

    def test_accepts_types(self):
        geom = PairGeometry.from_gamma(0.5)
        assert pairwise_error_exact(geom, SnrPoint.from_gamma_s(20.0)) == pairwise_error_exact(0.5, 20.0)

    @pytest.mark.parametrize("g,gs", [(0.2, 3.0), (0.5, 20.0), (0.7, 12.0), (0.9, 8.0)])
    def test_matches_marcum_form(self, g, gs):
        # direct Marcum minus Bessel form, fine at moderate SNR
        pg = PairGeometry.from_gamma(g)
        direct = marcum_q1(math.sqrt(gs) * pg.rho_minus, math.sqrt(gs) * pg.rho_plus) - 0.5 * math.exp(
            -gs / 2
        ) * np.i0(g * gs / 2)
        assert pairwise_error_exact(g, gs) == pytest.approx(direct, rel=1e-10)

    @given(st.floats(1e-6, 0.999), st.floats(0.1, 2000.0))
    def test_range(self, g, gs):
        p = pairwise_error_exact(g, gs)
        assert 0.0 <= p <= 0.5

    @given(st.floats(0.01, 0.99), st.floats(0.5, 300.0), st.floats(1.001, 1.5))
    def test_decreasing_in_snr(self, g, gs, f):
        a, b = pairwise_error_exact(g, gs), pairwise_error_exact(g, gs * f)
        assert b < a or (a == 0.0 and b == 0.0)

    @given(st.floats(0.01, 0.98), st.floats(0.5, 300.0), st.floats(1e-3, 0.02))
    def test_increasing_in_gamma(self, g, gs, h):
        a, b = pairwise_error_exact(g, gs), pairwise_error_exact(g + h, gs)
        assert b > a or (a == 0.0 and b == 0.0)

    def test_symmetric_in_pair(self, rng):
        c = random_constellation(4, 2, seed=3)
        s, t = c.vectors
        g1 = abs(np.vdot(s, t))
        g2 = abs(np.vdot(t, s))
        assert pairwise_error_exact(g1, 15.0) == pairwise_error_exact(g2, 15.0)

    def test_vectorized(self):
        g = np.array([r[0] for r in EXACT_REF])
        gs = np.array([r[1] for r in EXACT_REF])
        np.testing.assert_allclose(pairwise_error_exact(g, gs), [r[2] for r in EXACT_REF], rtol=1e-12)

    @pytest.mark.parametrize("g,gs", [(0.4, 1e3), (0.99, 3e3), (0.999, 1e4)])
    def test_large_snr_against_mpmath(self, g, gs):
        ref = pairwise_exact_mp(g, gs)
        assert pairwise_error_exact(g, gs) == pytest.approx(ref, rel=1e-10)


class TestCoefficients:
    def test_initial_conditions(self):
        for g in [0.1, 0.5, 0.93]:
            co = asymptotic_coeffs(g, 100.0, 3)
            assert co.e_terms[0] == 0.0
            assert co.f_terms[0] == pytest.approx(math.sqrt(math.pi) * math.sqrt(g / (1 - g)), rel=1e-15)

    @pytest.mark.parametrize("n", range(4))
    @pytest.mark.parametrize("m", [0, 1])
    def test_a_coefficient_gamma_form(self, n, m):
        ref = math.gamma(0.5 + m + n) / math.gamma(0.5 + m - n) / (math.factorial(n) * 2**n)
        assert a_coefficient(n, m) == pytest.approx(ref, rel=1e-14)

    def test_a_coefficient_small_values(self):
        assert a_coefficient(0, 0) == 1.0 and a_coefficient(0, 1) == 1.0
        assert a_coefficient(1, 0) == -1 / 8 and a_coefficient(1, 1) == 3 / 8

    def test_hankel_coefficients(self):
        assert [hankel_coefficient(n) for n in range(3)] == [1.0, 0.25, 9 / 32]

    def test_recursion(self):
        g, gs = 0.6, 80.0
        co = asymptotic_coeffs(g, gs, 4)
        r = (1 - g) / g
        for n in range(1, 5):
            e = (r * co.e_terms[n - 1] - (g * gs / 2) ** (0.5 - n)) / (0.5 - n)
            assert co.e_terms[n] == pytest.approx(e, rel=1e-13)
            assert co.f_terms[n] == pytest.approx(r * co.f_terms[n - 1] / (0.5 - n), rel=1e-13)

    @given(st.floats(0.01, 0.999))
    def test_f0_closed_form(self, g):
        co = asymptotic_coeffs(g, 100.0, 1)
        delta = math.sqrt(1 - g * g)
        assert co.f_primes[0] == pytest.approx(0.5 * math.sqrt(g / (1 - delta)), rel=1e-12)

    @given(st.floats(0.01, 0.999), st.floats(1.0, 1e5))
    def test_order1_closed_forms(self, g, gs):
        co = asymptotic_coeffs(g, gs, 1)
        e2, f2, g1 = co.partial(1)
        f_ref, ee_ref = closed_order1_coeffs(g, gs)
        assert f2 == pytest.approx(f_ref, rel=1e-12, abs=1e-13)
        assert e2 - 0.5 * g1 == pytest.approx(ee_ref, rel=1e-12, abs=1e-13)

    def test_partial_out_of_range(self):
        with pytest.raises(ValueError):
            asymptotic_coeffs(0.5, 10.0, 1).partial(2)


class TestAsymptotic:
    def test_reference_examples(self):
        assert pairwise_error_asymptotic(0.5, 200.0) == pytest.approx(EXACT_REF[3][2], rel=1e-3)
        assert pairwise_error_asymptotic(0.95, 500.0) == pytest.approx(EXACT_REF[4][2], rel=1e-2)

    @given(st.floats(0.05, 0.99), st.floats(10.0, 1e4))
    def test_closed_forms(self, g, gs):
        assert pairwise_error_asymptotic(g, gs, order=0) == pytest.approx(closed_order0(g, gs), rel=1e-10)
        assert pairwise_error_asymptotic(g, gs, order=1) == pytest.approx(closed_order1(g, gs), rel=1e-10)

    def test_order_gap_shrinks(self):
        gaps = [
            abs(pairwise_error_asymptotic(0.5, gs, 1) - pairwise_error_asymptotic(0.5, gs, 0))
            / pairwise_error_exact(0.5, gs)
            for gs in (50.0, 100.0, 200.0, 400.0)
        ]
        assert all(b < a for a, b in zip(gaps, gaps[1:]))

    def test_truncation_effect_vanishes(self):
        rel = []
        # gamma near 1 keeps the values clear of underflow at gs = 1e4
        for gs in (1e2, 1e3, 1e4):
            full = pairwise_error_asymptotic(0.999, gs, 1)
            trunc = pairwise_error_asymptotic(0.999, gs, 1, truncated=True)
            rel.append(abs(trunc - full) / full)
        assert rel[0] > rel[1] > rel[2] > 0.0

    def test_orthogonal_rejected(self):
        with pytest.raises(ValueError):
            pairwise_error_asymptotic(0.0, 100.0)

    @pytest.mark.parametrize("g", np.linspace(0.1, 0.95, 18))
    def test_switch_boundary_continuity(self, g):
        gs = 2 * T_SWITCH / g
        exact = pairwise_error_exact(g, gs)
        assert abs(pairwise_error_asymptotic(g, gs, 1) - exact) / exact <= 1e-2
        below = pairwise_error(g, np.nextafter(gs, 0.0), "auto")
        above = pairwise_error(g, np.nextafter(gs, np.inf), "auto")
        assert abs(above - below) / exact <= 1e-2

    def test_simple(self):
        assert pairwise_error_simple(0.5, 100.0) == pytest.approx(pairwise_error_exact(0.5, 100.0), rel=5e-2)
        for g in (0.3, 0.7):
            d_dd = math.sqrt(2) * math.sqrt(1 - g)
            lead = math.exp(-0.5 * 300.0 * d_dd**2 / 2)
            pref = math.sqrt((1 + g) / (1 - g)) / (2 * math.sqrt(math.pi * g * 300.0))
            assert pairwise_error_simple(g, 300.0) == pytest.approx(pref * lead, rel=1e-14)
        vals = pairwise_error_simple(0.5, np.array([10.0, 20.0, 40.0, 80.0]))
        assert np.all(np.diff(vals) < 0)
        with pytest.raises(ValueError):
            pairwise_error_simple(1.0, 10.0)

    def test_dispatch(self):
        for m in METHODS:
            assert pairwise_error(0.0, 10.0, m) == pytest.approx(0.5 * math.exp(-5.0))
            assert pairwise_error(1.0, 10.0, m) == 0.5
        with pytest.raises(ValueError):
            pairwise_error(0.5, 10.0, "bogus")


class TestUnionBounds:
    def test_orthogonal_pair(self):
        c = orthogonal_pair()
        snr = SnrPoint.from_gamma_s(10.0, 1)
        assert union_bound_symbol(c, snr) == pytest.approx(0.5 * math.exp(-5.0), rel=1e-14)
        assert union_bound_bit(c, snr) == pytest.approx(union_bound_symbol(c, snr), rel=1e-14)

    def test_clipping(self):
        c = random_constellation(2, 32, seed=1)
        snr = SnrPoint.from_gamma_s(0.5, c.k)
        assert union_bound_symbol(c, snr) == 1.0
        assert union_bound_symbol(c, snr, clip=False) > 1.0

    def test_bits_required(self):
        with pytest.raises(ValueError):
            union_bound_bit(orthogonal_pair(bits=False), SnrPoint.from_gamma_s(10.0))

    @given(st.integers(0, 15), st.integers(0, 1000))
    def test_xor_invariance(self, mask, seed):
        c = random_constellation(3, 16, seed=seed)
        labels = np.random.default_rng(seed).permutation(16)
        snr = SnrPoint.from_bit_db(8.0, 4)
        a = union_bound_bit(c.with_bits(labels), snr, clip=False)
        b = union_bound_bit(c.with_bits(labels ^ mask), snr, clip=False)
        assert a == pytest.approx(b, rel=1e-13)

    def test_matrix_symmetric(self):
        c = random_constellation(3, 12, seed=5)
        p = pairwise_error_matrix(c, SnrPoint.from_gamma_s(20.0))
        np.testing.assert_allclose(p, p.T, rtol=1e-14)
        assert np.all(np.diag(p) == 0.0)

    def test_auto_close_to_exact(self):
        c = random_constellation(4, 64, seed=2)
        for db in (15.0, 20.0, 25.0):
            snr = SnrPoint.from_symbol_db(db, 6)
            assert union_bound_symbol(c, snr, "auto") == pytest.approx(union_bound_symbol(c, snr), rel=1e-3)

    def test_hamming(self):
        h = hamming_matrix([0, 1, 2, 3])
        np.testing.assert_array_equal(h, [[0, 1, 1, 2], [1, 0, 2, 1], [1, 2, 0, 1], [2, 1, 1, 0]])


class TestSolve:
    def test_orthogonal_inversion(self):
        c = orthogonal_pair()
        p = solve_snr_at_target(c, 0.5 * math.exp(-5.0), mode="exact")
        assert p.gamma_s == pytest.approx(10.0, rel=1e-5)

    def test_monotone(self):
        c = random_constellation(4, 16, seed=0)
        dbs = [solve_snr_at_target(c, t).symbol_db for t in (1e-2, 1e-4, 1e-6, 1e-9)]
        assert all(b > a for a, b in zip(dbs, dbs[1:]))

    def test_bit_kind(self):
        c = random_constellation(4, 16, seed=0).with_bits(list(range(16)))
        p = solve_snr_at_target(c, 1e-5, kind="bit")
        assert union_bound_bit(c, p, "auto") == pytest.approx(1e-5, rel=1e-4)

    def test_unreachable(self):
        c = orthogonal_pair()
        with pytest.raises(TargetUnreachable):
            solve_snr_at_target(c, 1e-300, bracket=(-10.0, 10.0))
        with pytest.raises(ValueError):
            solve_snr_at_target(c, 0.7)


class TestConstants:
    @pytest.mark.parametrize(
        "n,m,eta", [(16, 256, 0.5), (3, 9, 2 * math.log2(3) / 3), (2, 4, 1.0), (4, 16, 1.0)]
    )
    def test_spectral_efficiency(self, n, m, eta):
        assert spectral_efficiency((n, m)) == pytest.approx(eta, rel=1e-15)

    def test_spectral_efficiency_constellation(self):
        assert spectral_efficiency(orthogonal_set(4)) == 0.5

    def test_welch(self):
        assert welch_rankin_bound(4, 16) == pytest.approx(1 / math.sqrt(5), rel=1e-15)
        assert welch_rankin_bound(2, 4) == pytest.approx(1 / math.sqrt(3), rel=1e-15)
        # approaches 1/sqrt(N) with relative gap (N - 1) / (2 M)
        w = welch_rankin_bound(5, 10**6)
        assert 1 - w * math.sqrt(5) == pytest.approx(4 / (2 * 10**6), rel=1e-5)
        with pytest.raises(ValueError):
            welch_rankin_bound(4, 4)


class TestCurves:
    def test_validation(self):
        with pytest.raises(ValueError):
            BerCurve((1.0, 1.0), (0.1, 0.01), CurveKind.SYMBOL_UNION_BOUND)
        with pytest.raises(ValueError):
            BerCurve((1.0, 2.0), (0.01, 0.1), CurveKind.SYMBOL_UNION_BOUND)
        with pytest.raises(ValueError):
            BerCurve((1.0,), (1.5,), "monteCarlo")
        # Monte-Carlo curves may wiggle
        BerCurve((1.0, 2.0), (0.01, 0.02), "monteCarlo")

    def test_evaluate_and_roundtrip(self, tmp_path):
        c = random_constellation(3, 8, seed=4).with_bits(list(range(8)))
        ser = evaluate_curve(c, np.arange(0.0, 20.0, 2.0), "ser")
        ber = evaluate_curve(c, np.arange(0.0, 20.0, 2.0), "ber")
        assert ser.kind is CurveKind.SYMBOL_UNION_BOUND and ber.kind is CurveKind.BIT_UNION_BOUND
        path = tmp_path / "curves.csv"
        write_curves_csv(path, [ser])
        write_curves_csv(path, [ber], append=True)
        back = read_curves_csv(path)
        assert back == [ser, ber]
        assert path.read_text().count("snr_db") == 1

    def test_bad_header(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError):
            read_curves_csv(path)
