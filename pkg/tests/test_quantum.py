"""Statevector engine: singlets, Bell measurements, reductions, projectors.

Expected values marked as derived were computed with the in-file oracles
(direct projector expectations, amplitude expansion, rank counting) and
frozen.
"""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relbc.quantum import (
    BELL_BASIS,
    BellOutcome,
    DensityMatrix,
    FactoredState,
    HermitianOperator,
    MAX_QUBITS,
    QubitBudgetError,
    QubitLabel,
    Register,
    StateVector,
    bell_measurement,
    bell_probabilities,
    build_test_projector,
    build_threshold_projector,
    expectation,
    operator_norm,
    prepare_singlets,
    reduced_density,
    trace_distance,
    triple_labels,
)

SQ2 = 1 / math.sqrt(2)


def lab(reg, j):
    return QubitLabel(Register[reg], j)


def outcome_expectations(state, a, b):
    """Oracle: the four Bell projector expectations computed directly."""
    out = []
    rest = [l for l in state.labels if l not in (a, b)]
    front = state.reordered((a, b, *rest))
    m = front.amplitudes.reshape(4, -1)
    for k in range(4):
        proj = np.outer(BELL_BASIS[k], BELL_BASIS[k].conj())
        out.append(float(np.real(np.vdot(m, proj @ m))))
    return np.array(out)


class TestPrepareSinglets:
    def test_single_amplitudes(self):
        s = prepare_singlets(1)
        assert np.allclose(s.amplitudes, [0, SQ2, -SQ2, 0])

    def test_two_pairs_norm_and_marginals(self):
        s = prepare_singlets(2)
        assert np.linalg.norm(s.amplitudes) == pytest.approx(1.0)
        for l in s.labels:
            rho = reduced_density(s, [l])
            assert np.allclose(rho.matrix, np.eye(2) / 2, atol=1e-12)

    def test_bell_measurement_is_deterministic_on_singlet(self):
        s = prepare_singlets(1)
        rng = np.random.default_rng(0)
        for _ in range(20):
            out, post = bell_measurement(s, s.labels[0], s.labels[1], rng)
            assert out is BellOutcome.PSI_MINUS
            assert np.allclose(post.amplitudes, s.amplitudes)

    def test_count_guard(self):
        with pytest.raises(QubitBudgetError):
            prepare_singlets(8)
        with pytest.raises(ValueError):
            prepare_singlets(0)


class TestBellMeasurement:
    def test_requires_distinct_qubits(self):
        s = prepare_singlets(1)
        with pytest.raises(ValueError):
            bell_measurement(s, s.labels[0], s.labels[0], np.random.default_rng(0))

    def test_cross_singlet_uniform(self):
        """One qubit from each of two singlets: all four outcomes at 1/4."""
        s = prepare_singlets(2)
        probs = bell_probabilities(s, s.labels[0], s.labels[2])
        assert np.allclose(probs, 0.25)
        oracle = outcome_expectations(s, s.labels[0], s.labels[2])
        assert np.allclose(probs, oracle)

    def test_product_zero_state(self):
        """|00> splits evenly between the two phi outcomes."""
        a, b = lab("W0P", 1), lab("W0Q", 1)
        s = StateVector((a, b), np.array([1, 0, 0, 0], dtype=complex))
        probs = bell_probabilities(s, a, b)
        assert np.allclose(probs, [0.5, 0.5, 0.0, 0.0])

    def test_sampled_frequencies_match_born(self):
        """Frequencies over 10^4 seeded draws within 4 sigma of 1/4 each."""
        s = prepare_singlets(2)
        rng = np.random.default_rng(42)
        trials = 10_000
        counts = np.zeros(4)
        for _ in range(trials):
            out, _ = bell_measurement(s, s.labels[0], s.labels[2], rng)
            counts[out.value] += 1
        sigma = math.sqrt(0.25 * 0.75 / trials)
        assert np.all(np.abs(counts / trials - 0.25) < 4 * sigma)

    def test_post_state_unit_norm(self):
        s = prepare_singlets(2)
        rng = np.random.default_rng(7)
        out, post = bell_measurement(s, s.labels[1], s.labels[3], rng)
        assert np.linalg.norm(post.amplitudes) == pytest.approx(1.0, abs=1e-10)


class TestReducedDensity:
    def test_half_singlet_maximally_mixed(self):
        s = prepare_singlets(1)
        rho = reduced_density(s, [s.labels[0]])
        assert np.allclose(rho.matrix, np.eye(2) / 2, atol=1e-12)

    def test_full_keep_is_outer_product(self):
        s = prepare_singlets(2)
        rho = reduced_density(s, s.labels)
        ordered = s.reordered(sorted(s.labels, key=lambda l: l.sort_key))
        outer = np.outer(ordered.amplitudes, ordered.amplitudes.conj())
        assert np.abs(rho.matrix - outer).max() < 1e-10

    def test_committed_set_uniform_for_both_bits(self):
        """The receiver's N qubits reduce to I/2^N whichever bit was
        committed: the two reductions coincide to machine precision."""
        n = 3
        rhos = []
        for commit_reg in (Register.W0P, Register.W1P):
            state = None
            for reg_p, reg_q in ((Register.W0P, Register.W0Q),
                                 (Register.W1P, Register.W1Q)):
                for j in range(1, n + 1):
                    f = prepare_singlets(1, (QubitLabel(reg_p, j), QubitLabel(reg_q, j)))
                    state = f if state is None else state.tensor(f)
            keep = [QubitLabel(commit_reg, j) for j in range(1, n + 1)]
            rhos.append(reduced_density(state, keep).matrix)
        eye = np.eye(2**n) / 2**n
        assert np.abs(rhos[0] - eye).max() < 1e-12
        assert np.abs(rhos[1] - eye).max() < 1e-12

    def test_empty_keep_rejected(self):
        with pytest.raises(ValueError):
            reduced_density(prepare_singlets(1), [])


class TestTraceDistance:
    def test_identical(self):
        s = prepare_singlets(1)
        r = reduced_density(s, [s.labels[0]])
        assert trace_distance(r, r) == pytest.approx(0.0, abs=1e-14)

    def test_orthogonal_pure(self):
        l = (lab("W0P", 1),)
        r0 = DensityMatrix(l, np.diag([1.0, 0.0]).astype(complex))
        r1 = DensityMatrix(l, np.diag([0.0, 1.0]).astype(complex))
        assert trace_distance(r0, r1) == pytest.approx(1.0)

    def test_mixed_vs_pure(self):
        """Eigenvalues of I/2 - |0><0| are +-1/2, so the distance is 1/2."""
        l = (lab("W0P", 1),)
        r0 = DensityMatrix(l, np.eye(2, dtype=complex) / 2)
        r1 = DensityMatrix(l, np.diag([1.0, 0.0]).astype(complex))
        assert trace_distance(r0, r1) == pytest.approx(0.5)

    def test_label_mismatch(self):
        r0 = DensityMatrix((lab("W0P", 1),), np.eye(2) / 2)
        r1 = DensityMatrix((lab("W0Q", 1),), np.eye(2) / 2)
        with pytest.raises(ValueError):
            trace_distance(r0, r1)


class TestOperatorNorm:
    def test_identity(self):
        op = HermitianOperator(triple_labels(1), np.eye(8, dtype=complex))
        assert operator_norm(op) == pytest.approx(1.0)

    def test_product_of_tests_n1(self):
        p0 = build_test_projector(0, 1, {1})
        p1 = build_test_projector(1, 1, {1})
        assert operator_norm(p0, p1) == pytest.approx(0.5, abs=1e-9)

    def test_product_of_tests_n3(self):
        p0 = build_test_projector(0, 3, range(1, 4))
        p1 = build_test_projector(1, 3, range(1, 4))
        assert operator_norm(p0, p1) == pytest.approx(0.125, abs=1e-9)

    def test_projector_norm_one(self):
        for bit in (0, 1):
            p = build_test_projector(bit, 2, {1, 2})
            assert operator_norm(p) == pytest.approx(1.0, abs=1e-9)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_submultiplicative(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        b = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        a, b = a + a.conj().T, b + b.conj().T
        assert operator_norm(a @ b) <= operator_norm(a) * operator_norm(b) + 1e-9


class TestTestProjector:
    def test_rank_n1(self):
        """Identity on one qubit times a singlet projector has rank 2."""
        p = build_test_projector(0, 1, {1})
        sv = np.linalg.svd(p.matrix, compute_uv=False)
        assert int((sv > 0.5).sum()) == 2
        assert np.allclose(sv[sv > 1e-12], 1.0)

    def test_idempotent(self):
        for bit, n, subset in ((0, 1, {1}), (1, 2, {2}), (0, 3, {1, 3})):
            p = build_test_projector(bit, n, subset)
            assert p.idempotency_defect() < 1e-10

    def test_disjoint_subsets_commute(self):
        p0 = build_test_projector(0, 3, {1})
        p1 = build_test_projector(1, 3, {2, 3})
        comm = p0.matrix @ p1.matrix - p1.matrix @ p0.matrix
        assert np.abs(comm).max() < 1e-10

    def test_empty_subset_rejected(self):
        with pytest.raises(ValueError):
            build_test_projector(0, 2, set())

    def test_subset_outside_range_rejected(self):
        with pytest.raises(ValueError):
            build_test_projector(0, 2, {3})


class TestThresholdProjector:
    def test_delta_zero_equals_full_test(self):
        for bit in (0, 1):
            a = build_threshold_projector(bit, 2, 0.0)
            b = build_test_projector(bit, 2, {1, 2})
            assert np.abs(a.matrix - b.matrix).max() < 1e-12

    def test_rank_n2_half(self):
        """m=2 gives 1 Bell product, m=1 gives 2*3; each tensored with a
        4-dimensional identity: rank (1 + 6) * 4 = 28."""
        p = build_threshold_projector(0, 2, 0.5)
        assert int(round(np.trace(p.matrix).real)) == 28

    def test_idempotent(self):
        p = build_threshold_projector(1, 2, 0.5)
        assert p.idempotency_defect() < 1e-10
        p = build_threshold_projector(0, 3, 1 / 3)
        assert p.idempotency_defect() < 1e-10

    def test_non_integer_delta_n_rejected(self):
        with pytest.raises(ValueError):
            build_threshold_projector(0, 3, 0.5)


class TestStateVectorInvariants:
    def test_norm_enforced(self):
        with pytest.raises(ValueError):
            StateVector((lab("W0P", 1),), np.array([1.0, 1.0]))

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValueError):
            StateVector((lab("W0P", 1), lab("W0P", 1)),
                        np.array([1, 0, 0, 0], dtype=complex))

    def test_qubit_cap(self):
        n = MAX_QUBITS + 1
        labels = tuple(lab("W0P", j) for j in range(1, n + 1))
        amp = np.zeros(2**n)
        amp[0] = 1.0
        with pytest.raises(QubitBudgetError):
            StateVector(labels, amp)

    def test_reorder_roundtrip(self):
        s = prepare_singlets(2)
        back = s.reordered(s.labels[::-1]).reordered(s.labels)
        assert np.allclose(back.amplitudes, s.amplitudes)


class TestExpectation:
    def test_honest_state_passes_own_test(self):
        n = 2
        state = None
        for j in range(1, n + 1):
            for pair in ((lab("W0P", j), lab("W0Q", j)), (lab("W1P", j), lab("W1Q", j))):
                f = prepare_singlets(1, pair)
                state = f if state is None else state.tensor(f)
        p0 = build_test_projector(0, n, range(1, n + 1))
        assert expectation(state, p0) == pytest.approx(1.0, abs=1e-10)
        p1 = build_test_projector(1, n, range(1, n + 1))
        order = []
        for j in range(1, n + 1):
            order += [lab("W1Q", j), lab("W1P", j), lab("W0Q", j)]
        assert expectation(state, p1, order) == pytest.approx(1.0, abs=1e-10)

    def test_cross_test_value(self):
        """An honest commit scores 4^-N on the opposite test."""
        n = 2
        state = None
        for j in range(1, n + 1):
            for pair in ((lab("W0P", j), lab("W0Q", j)), (lab("W1P", j), lab("W1Q", j))):
                f = prepare_singlets(1, pair)
                state = f if state is None else state.tensor(f)
        p1 = build_test_projector(1, n, range(1, n + 1))
        assert expectation(state, p1) == pytest.approx(4.0**-n, abs=1e-10)


class TestFactoredState:
    def test_merge_and_measure_matches_dense(self):
        fs = FactoredState()
        fs.add_factor(prepare_singlets(1, (lab("W0P", 1), lab("W0Q", 1))))
        fs.add_factor(prepare_singlets(1, (lab("W1P", 1), lab("W1Q", 1))))
        rng = np.random.default_rng(5)
        counts = np.zeros(4)
        for _ in range(2000):
            g = FactoredState()
            g.add_factor(prepare_singlets(1, (lab("W0P", 1), lab("W0Q", 1))))
            g.add_factor(prepare_singlets(1, (lab("W1P", 1), lab("W1Q", 1))))
            out = g.bell_measure(lab("W0P", 1), lab("W1Q", 1), rng)
            counts[out.value] += 1
        sigma = math.sqrt(0.25 * 0.75 / 2000)
        assert np.all(np.abs(counts / 2000 - 0.25) < 4 * sigma)

    def test_remainder_collapse_correlates(self):
        """Measuring (W0P, W1Q) projects the partner pair onto the same
        outcome: a second measurement of (W0Q, W1P) reproduces it up to
        the singlet's antisymmetry (both pairs swap one qubit)."""
        rng = np.random.default_rng(11)
        for _ in range(50):
            fs = FactoredState()
            fs.add_factor(prepare_singlets(1, (lab("W0P", 1), lab("W0Q", 1))))
            fs.add_factor(prepare_singlets(1, (lab("W1P", 1), lab("W1Q", 1))))
            first = fs.bell_measure(lab("W0P", 1), lab("W1Q", 1), rng)
            second = fs.bell_measure(lab("W0Q", 1), lab("W1P", 1), rng)
            assert second is first

    def test_factors_stay_small_for_honest_pairs(self):
        fs = FactoredState()
        n = 50
        for j in range(1, n + 1):
            fs.add_factor(prepare_singlets(1, (lab("W0P", j), lab("W0Q", j))))
        rng = np.random.default_rng(3)
        for j in range(1, n + 1):
            out = fs.bell_measure(lab("W0P", j), lab("W0Q", j), rng)
            assert out is BellOutcome.PSI_MINUS
