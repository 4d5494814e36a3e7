import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvm.core import random_constellation
from mvm.errprob import SnrPoint, pairwise_error_exact, pairwise_error_matrix, union_bound_bit
from mvm.mapping import (
    T0_FLOOR,
    AnnealSchedule,
    BitMapping,
    anneal_mapping,
    brute_force_mapping,
    canonical_labels,
    default_training_snr,
    gray_code_ring,
    initial_temperature,
    xi_from_matrix,
    xi_objective,
)
from mvm.shaping import distance_matrix, orthogonal_set

SNR8 = SnrPoint.from_bit_db(10.0, 3)


def popcount(x):
    return bin(int(x)).count("1")


def permute_bits(labels, perm):
    out = np.zeros_like(labels)
    for dst, src in enumerate(perm):
        out |= ((labels >> src) & 1) << dst
    return out


class TestBitMapping:
    def test_validation(self):
        with pytest.raises(ValueError):
            BitMapping((0, 1, 2))
        with pytest.raises(ValueError):
            BitMapping((0, 1, 1, 3))

    def test_basic(self):
        b = BitMapping.identity(8)
        assert b.m == 8 and b.k == 3
        assert b.hamming()[0, 7] == 3

    def test_gray_ring(self):
        assert gray_code_ring(4).labels == (0b00, 0b01, 0b11, 0b10)
        for m in (4, 8, 16, 64):
            lab = gray_code_ring(m).labels
            assert all(popcount(lab[i] ^ lab[(i + 1) % m]) == 1 for i in range(m))

    def test_canonical(self):
        assert canonical_labels([5, 4, 7, 6, 1, 0, 3, 2]).labels[0] == 0


class TestXi:
    def test_two_points(self):
        c = orthogonal_set(2)
        snr = SnrPoint.from_gamma_s(9.0, 1)
        for lab in ((0, 1), (1, 0)):
            assert xi_objective(c, lab, snr) == pytest.approx(pairwise_error_exact(0.0, 9.0), rel=1e-15)

    def test_orthogonal_label_independent(self):
        c = orthogonal_set(4)
        snr = SnrPoint.from_bit_db(5.0, 2)
        rng = np.random.default_rng(0)
        vals = {round(xi_objective(c, rng.permutation(4), snr), 15) for _ in range(10)}
        assert len(vals) == 1

    def test_equals_unclipped_bit_bound(self):
        c = random_constellation(3, 16, seed=1)
        lab = np.random.default_rng(1).permutation(16)
        snr = SnrPoint.from_bit_db(7.0, 4)
        assert xi_objective(c, lab, snr) == pytest.approx(
            union_bound_bit(c.with_bits(lab), snr, clip=False), rel=1e-13
        )

    @given(st.integers(0, 1000), st.integers(0, 15), st.permutations(range(4)))
    @settings(max_examples=30)
    def test_xor_and_bit_permutation_invariance(self, seed, mask, perm):
        c = random_constellation(3, 16, seed=seed)
        p = pairwise_error_matrix(c, SnrPoint.from_bit_db(8.0, 4))
        lab = np.random.default_rng(seed).permutation(16)
        base = xi_from_matrix(p, lab)
        assert xi_from_matrix(p, lab ^ mask) == pytest.approx(base, rel=1e-13)
        assert xi_from_matrix(p, permute_bits(lab, perm)) == pytest.approx(base, rel=1e-13)

    def test_matrix_symmetric(self):
        p = pairwise_error_matrix(random_constellation(4, 16, seed=2), SnrPoint.from_bit_db(10.0, 4))
        np.testing.assert_array_equal(p, p.T)
        assert np.all(np.diag(p) == 0)


class TestTemperature:
    def test_orthogonal_zero(self):
        assert initial_temperature(orthogonal_set(4), SnrPoint.from_bit_db(5.0, 2)) == 0.0

    def test_deterministic_and_positive(self, thomson_4_64):
        snr = default_training_snr(6)
        a = initial_temperature(thomson_4_64, snr, seed=3)
        assert a == initial_temperature(thomson_4_64, snr, seed=3)
        assert a > 0

    def test_sample_floor(self):
        with pytest.raises(ValueError):
            initial_temperature(orthogonal_set(4), SnrPoint.from_bit_db(5.0, 2), samples=10)

    def test_schedule(self):
        s = AnnealSchedule(1.0, alpha=0.5, min_temp=0.1)
        np.testing.assert_allclose(s.temperatures(), [1.0, 0.5, 0.25, 0.125])
        r = AnnealSchedule(2.0).resolved(8)
        assert r.iters_per_temp == 64 and r.min_temp == pytest.approx(2e-6)
        t = r.temperatures()
        assert np.all(np.diff(t) < 0) and t[-1] >= r.min_temp
        with pytest.raises(ValueError):
            AnnealSchedule(1.0, alpha=1.0)
        with pytest.raises(ValueError):
            AnnealSchedule(0.0)

    def test_anneal_on_flat_landscape(self):
        # zero temperature spread falls back to the floor and still runs
        res = anneal_mapping(orthogonal_set(4), SnrPoint.from_bit_db(5.0, 2))
        assert res.temperatures[0] == T0_FLOOR
        assert res.xi == pytest.approx(res.start_xi)


class TestAnneal:
    def test_ring_matches_brute_force_and_gray(self, ring8):
        best, xi_opt = brute_force_mapping(ring8, SNR8)
        assert xi_objective(ring8, gray_code_ring(8), SNR8) == pytest.approx(xi_opt, rel=1e-12)
        res = anneal_mapping(ring8, SNR8, sched=None)
        assert res.xi == pytest.approx(xi_opt, rel=1e-12)

    def test_antiprism_neighbor_structure(self, antiprism8):
        best, _ = brute_force_mapping(antiprism8, SNR8)
        lab = best.array()
        d = distance_matrix(antiprism8, "stokes")
        for i in range(8):
            nbrs = np.argsort(d[i])[1:5]  # two short and two long edges
            assert sorted(popcount(lab[i] ^ lab[j]) for j in nbrs) == [1, 1, 1, 2]

    def test_random_brute_force(self):
        c = random_constellation(2, 8, seed=11)
        _, xi_opt = brute_force_mapping(c, SNR8)
        hits = sum(
            math.isclose(anneal_mapping(c, SNR8, sched=_sched(c, s)).xi, xi_opt, rel_tol=1e-12) for s in range(5)
        )
        assert hits >= 4

    def test_never_worse_than_start(self):
        c = random_constellation(3, 16, seed=4)
        snr = SnrPoint.from_bit_db(8.0, 4)
        # a cold, short schedule cannot undo a good start
        gray = gray_code_ring(16)
        res = anneal_mapping(c, snr, sched=AnnealSchedule(1e-3, alpha=0.5, iters_per_temp=5), start=gray)
        assert res.xi <= res.start_xi
        assert res.start_xi == pytest.approx(xi_objective(c, gray, snr))

    def test_best_ever_trace(self):
        c = random_constellation(3, 16, seed=5)
        res = anneal_mapping(c, SnrPoint.from_bit_db(8.0, 4))
        assert np.all(np.diff(res.best_xi) <= 1e-18)
        assert res.xi <= res.current_xi.min() * (1 + 1e-12)
        assert res.xi == pytest.approx(xi_objective(c, res.mapping, SnrPoint.from_bit_db(8.0, 4)), rel=1e-12)

    def test_restarts_deterministic(self):
        c = random_constellation(2, 8, seed=6)
        a = anneal_mapping(c, SNR8, restarts=3)
        b = anneal_mapping(c, SNR8, restarts=3)
        assert a.mapping == b.mapping and a.seed == b.seed
        assert len(a.restarts) == 3
        assert a.xi == min(r.xi for r in a.restarts)

    def test_beats_random_mappings(self, thomson_4_64):
        snr = default_training_snr(6)
        p = pairwise_error_matrix(thomson_4_64, snr)
        rng = np.random.default_rng(0)
        rand = min(xi_from_matrix(p, rng.permutation(64)) for _ in range(100))
        assert anneal_mapping(thomson_4_64, snr).xi < rand

    @pytest.mark.slow
    def test_cross_snr_robustness(self, thomson_4_64):
        c = thomson_4_64
        trained = anneal_mapping(c, default_training_snr(6)).mapping
        ct = c.with_bits(trained.labels)
        for db in (6.0, 8.0, 10.0, 12.0, 14.0):
            local = anneal_mapping(c, SnrPoint.from_bit_db(db, 6)).mapping
            target = union_bound_bit(c.with_bits(local.labels), SnrPoint.from_bit_db(db, 6), clip=False)
            assert _bit_db_at(ct, target, db - 1.0, db + 1.0) - db <= 0.2


def _sched(c, seed):
    return AnnealSchedule(max(initial_temperature(c, SNR8), T0_FLOOR), seed=seed)


def _bit_db_at(c, target, lo, hi):
    """Bit SNR where the unclipped bit bound of ``c`` falls to ``target``."""
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if union_bound_bit(c, SnrPoint.from_bit_db(mid, c.k), clip=False) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
