"""Closed forms against arbitrary-precision oracles; spectra against SVD.

Oracles: mpmath evaluation of the displayed formulas, brute-force subset
enumeration, and full-space dense SVD.  Values frozen in the tests were
produced by those oracles.
"""

import itertools
import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from relbc import quantum
from relbc.bounds import (
    BOUND_ATOL,
    BoundReport,
    SubsetPartition,
    Variant,
    cross_projector_norm,
    etbc_cheat_bound,
    etrbc_admissible_norm_max,
    etrbc_p1_bound,
    etrbc_tail_bound,
    exact_cheat_value,
    half_subsets,
    hoeffding_gamma,
    overlap_tail_fraction,
    product_norm_eig,
    product_norm_svd,
    qdelta_norm_bound,
    subset_overlap_tail,
    threshold_cheat_value,
    threshold_product_norm,
)

mpmath.mp.dps = 50


def full_product_norm(n, j0, j1prime):
    """Oracle: dense full-space product and its SVD, no basis tricks."""
    p0 = quantum.build_test_projector(0, n, j0).matrix
    p1 = quantum.build_test_projector(1, n, j1prime).matrix
    return float(sla.svdvals(p0 @ p1)[0])


class TestEtbcCheatBound:
    def test_frozen_values(self):
        # mpmath oracle: 1 + 2^(1-N) + 2^(-2N)
        assert etbc_cheat_bound(1) == pytest.approx(2.25, abs=1e-15)
        assert etbc_cheat_bound(2) == pytest.approx(1.5625, abs=1e-15)
        assert etbc_cheat_bound(4) == pytest.approx(1.12890625, abs=1e-15)

    def test_against_mpmath(self):
        for n in range(1, 30):
            oracle = float(1 + mpmath.mpf(2) ** (1 - n) + mpmath.mpf(2) ** (-2 * n))
            assert etbc_cheat_bound(n) == pytest.approx(oracle, rel=1e-15)

    def test_limit_one(self):
        assert etbc_cheat_bound(200) == pytest.approx(1.0)


class TestExactCheatValue:
    def test_frozen_small_n(self):
        assert exact_cheat_value(1) == pytest.approx(1.5, abs=1e-9)
        assert exact_cheat_value(2) == pytest.approx(1.25, abs=1e-9)
        assert exact_cheat_value(3) == pytest.approx(1.125, abs=1e-9)

    def test_below_closed_form_bound(self):
        for n in (1, 2, 3):
            assert exact_cheat_value(n) < etbc_cheat_bound(n)

    def test_principal_angle_structure(self):
        """lambda_max(P0 + P1) = 1 + |P0 P1| for projectors."""
        for n in (1, 2, 3):
            assert exact_cheat_value(n) == pytest.approx(
                1.0 + product_norm_svd(n), abs=1e-9
            )

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            exact_cheat_value(5)


class TestProductNorm:
    def test_central_lemma_small_n(self):
        for n in (1, 2, 3):
            assert product_norm_svd(n) == pytest.approx(2.0**-n, abs=1e-9)

    def test_routes_agree(self):
        for n in (1, 2, 3):
            svd = product_norm_svd(n)
            gram = cross_projector_norm(n, range(1, n + 1), range(1, n + 1))
            eig = product_norm_eig(n)
            assert gram == pytest.approx(svd, abs=1e-12)
            assert eig == pytest.approx(svd, abs=1e-10)


class TestCrossProjectorNorm:
    def test_power_law_all_pairs_n2(self):
        subsets = [set(c) for r in (1, 2)
                   for c in itertools.combinations(range(1, 3), r)]
        for j0 in subsets:
            for j1p in subsets:
                k = len(j0 & j1p)
                got = cross_projector_norm(2, j0, j1p)
                assert got == pytest.approx(2.0**-k, abs=1e-9)
                # independent oracle: full-space product SVD
                assert got == pytest.approx(full_product_norm(2, j0, j1p), abs=1e-10)

    def test_power_law_sampled_pairs_n3(self):
        rng = np.random.default_rng(2024)
        subsets = [set(c) for r in (1, 2, 3)
                   for c in itertools.combinations(range(1, 4), r)]
        picks = rng.choice(len(subsets), size=(8, 2))
        for i0, i1 in picks:
            j0, j1p = subsets[int(i0)], subsets[int(i1)]
            k = len(j0 & j1p)
            got = cross_projector_norm(3, j0, j1p)
            assert got == pytest.approx(2.0**-k, abs=1e-9)
            assert got == pytest.approx(full_product_norm(3, j0, j1p), abs=1e-10)

    def test_disjoint_subsets_give_norm_one(self):
        assert cross_projector_norm(2, {1}, {2}) == pytest.approx(1.0, abs=1e-9)

    def test_full_subsets_match_central_lemma(self):
        for n in (1, 2, 3):
            got = cross_projector_norm(n, range(1, n + 1), range(1, n + 1))
            assert got == pytest.approx(2.0**-n, abs=1e-9)

    def test_admissible_max_within_power_bound(self):
        for n in (2, 4):
            assert etrbc_admissible_norm_max(n) <= 2.0 ** (-n / 6.0) + 1e-9


class TestSubsetOverlapTail:
    def enumerate_tail(self, n):
        """Oracle: enumerate every size-N/2 subset pair overlap."""
        full = range(1, n + 1)
        fixed = frozenset(range(1, n // 2 + 1))
        hits = total = 0
        for c in itertools.combinations(full, n // 2):
            total += 1
            if len(fixed & frozenset(c)) > Fraction(n, 3):
                hits += 1
        return Fraction(hits, total)

    def test_frozen_values(self):
        assert overlap_tail_fraction(6) == Fraction(1, 20)   # only J0 itself
        assert subset_overlap_tail(6) == pytest.approx(0.05)
        assert overlap_tail_fraction(2) == Fraction(1, 2)
        assert overlap_tail_fraction(12) == Fraction(37, 924)

    def test_enumeration_matches_closed_form(self):
        for n in (2, 4, 6, 8, 10, 12):
            assert overlap_tail_fraction(n) == self.enumerate_tail(n)

    def test_odd_rejected(self):
        with pytest.raises(ValueError):
            subset_overlap_tail(5)


class TestEtrbcTailBound:
    def test_frozen_n6(self):
        # mpmath oracle: (6/6) * (3 / 2^(10/6))^6 = 3^6 / 2^10
        assert etrbc_tail_bound(6) == pytest.approx(729 / 1024, rel=1e-12)

    def test_against_mpmath(self):
        for n in (6, 8, 10, 12):
            oracle = float(
                mpmath.mpf(n) / 6 * (mpmath.mpf(2) ** (mpmath.mpf(-10) / 6) * 3) ** n
            )
            assert etrbc_tail_bound(n) == pytest.approx(oracle, rel=1e-12)

    def test_dominates_exact_tail(self):
        for n in (6, 8, 10, 12):
            assert subset_overlap_tail(n) <= etrbc_tail_bound(n)


class TestEtrbcP1Bound:
    def test_frozen_p0_one(self):
        # oracle: 1 - 1 + 2^0 + 2^-2 + 729/1024 = 1.9619140625
        assert etrbc_p1_bound(6, 1.0) == pytest.approx(1.9619140625, rel=1e-12)

    def test_vacuous_at_p0_zero(self):
        assert etrbc_p1_bound(6, 0.0) >= 1.0

    def test_affine_slope_minus_one(self):
        b = etrbc_p1_bound
        assert b(8, 0.25) - b(8, 0.75) == pytest.approx(0.5, abs=1e-12)

    def test_p0_range(self):
        with pytest.raises(ValueError):
            etrbc_p1_bound(6, 1.5)


class TestQdeltaBound:
    def test_delta_zero(self):
        for n in (1, 2, 3, 4):
            assert qdelta_norm_bound(n, 0.0) == 2.0**-n

    def test_frozen_values(self):
        # 2^-2 * 3^2 * 2^2 * C(4,3)^2 = 144
        assert qdelta_norm_bound(4, 0.25) == pytest.approx(144.0, rel=1e-12)
        # 2^0 * 3^2 * 2^2 * C(2,1)^2 = 144
        assert qdelta_norm_bound(2, 0.5) == pytest.approx(144.0, rel=1e-12)
        # 2^-1 * 3^2 * 2^2 * C(3,2)^2 = 162
        assert qdelta_norm_bound(3, 1 / 3) == pytest.approx(162.0, rel=1e-12)

    def test_nondecreasing_in_delta(self):
        for n in (2, 3, 4):
            vals = [qdelta_norm_bound(n, d) for d in
                    (k / n for k in range(0, n // 2 + 1))]
            assert vals == sorted(vals)

    def test_non_integer_rejected(self):
        with pytest.raises(ValueError):
            qdelta_norm_bound(3, 0.25)


class TestThresholdProductNorm:
    def test_delta_zero_reproduces_central_lemma(self):
        for n in (2, 3):
            assert threshold_product_norm(n, 0.0) == pytest.approx(2.0**-n, abs=1e-9)

    def test_bounded_by_closed_form(self):
        for n, delta in ((2, 0.5), (3, 1 / 3)):
            norm = threshold_product_norm(n, delta)
            assert norm <= qdelta_norm_bound(n, delta) + BOUND_ATOL

    def test_gram_route_matches_dense(self):
        for n, delta in ((2, 0.5), (3, 1 / 3)):
            dense = threshold_product_norm(n, delta, method="dense")
            gram = threshold_product_norm(n, delta, method="gram")
            assert gram == pytest.approx(dense, abs=1e-10)

    def test_threshold_cheat_identity(self):
        """lambda_max(A + B) = 1 + |A B| also holds for the threshold tests."""
        for n, delta in ((2, 0.5), (3, 1 / 3)):
            assert threshold_cheat_value(n, delta) == pytest.approx(
                1.0 + threshold_product_norm(n, delta), abs=1e-9
            )


class TestHoeffdingGamma:
    def test_frozen_value(self):
        # oracle: exp(-2 * 1000 * 0.05^2) = exp(-5)
        assert hoeffding_gamma(0.1, 0.05, 1000) == pytest.approx(
            math.exp(-5), rel=1e-12
        )

    def test_vanishes_with_n(self):
        assert hoeffding_gamma(0.1, 0.05, 10**6) < 1e-300 or \
            hoeffding_gamma(0.1, 0.05, 10**6) == 0.0

    def test_near_vacuous_limit(self):
        assert hoeffding_gamma(0.05 + 1e-12, 0.05, 10) == pytest.approx(1.0)

    def test_delta_le_epsilon_rejected(self):
        with pytest.raises(ValueError):
            hoeffding_gamma(0.05, 0.05, 10)


class TestReportTypes:
    def test_bound_report_consistency_enforced(self):
        with pytest.raises(ValueError):
            BoundReport(2, 0.0, Variant.ETBC, 0.5, 0.25, 1.25, True)
        with pytest.raises(ValueError):
            BoundReport(2, 0.0, Variant.ETBC, 0.25, 0.5, 0.5, True)

    def test_subset_partition_validation(self):
        SubsetPartition(4, frozenset({1, 3}), frozenset({2, 4}))
        with pytest.raises(ValueError):
            SubsetPartition(4, frozenset({1}), frozenset({2, 3, 4}))
        with pytest.raises(ValueError):
            SubsetPartition(3, frozenset({1}), frozenset({2, 3}))

    def test_half_subsets_count(self):
        assert len(half_subsets(6)) == 20


@given(st.integers(1, 12), st.integers(1, 12))
@settings(max_examples=60, deadline=None)
def test_power_law_prediction_via_per_triple_angles(k, extra):
    """Hypothesis: the cross norm depends only on the overlap size.

    Sampled on N = 2 with the four subset choices relabelled; degenerate
    with the exhaustive N = 2 sweep but keeps the invariant explicit.
    """
    j0 = {1} if k % 2 else {1, 2}
    j1 = {2} if extra % 2 else {1, 2}
    got = cross_projector_norm(2, j0, j1)
    assert got == pytest.approx(2.0 ** -len(set(j0) & set(j1)), abs=1e-9)
