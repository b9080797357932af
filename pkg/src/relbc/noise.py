"""Error and loss channels, and exact honest-party acceptance statistics.

Per-singlet depolarising noise (trajectory sampling of a uniform Pauli with
probability q) plus Bernoulli loss form the minimal model of independent
imperfections.  Under it one singlet passes its Bell test with probability
(1 - l)(1 - 3q/4), which makes the thresholded acceptance probability an
exact binomial tail and gives every Monte Carlo estimate a closed-form
oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .netsim import CustodyRecord
from .quantum import FactoredState, QubitLabel, StateVector


class LossPolicy(Enum):
    COUNT_AS_FAIL = "COUNT_AS_FAIL"


class LossOutcome(Enum):
    HELD = "HELD"
    LOST = "LOST"


@dataclass(frozen=True)
class NoiseParams:
    depolarizing_q: float = 0.0
    loss_l: float = 0.0
    loss_policy: LossPolicy = LossPolicy.COUNT_AS_FAIL

    def __post_init__(self):
        if not 0.0 <= self.depolarizing_q <= 1.0:
            raise ValueError("depolarizing_q must lie in [0, 1]")
        if not 0.0 <= self.loss_l <= 1.0:
            raise ValueError("loss_l must lie in [0, 1]")


NO_NOISE = NoiseParams()

_PAULIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def apply_depolarizing(
    state: StateVector | FactoredState,
    pair: tuple[QubitLabel, QubitLabel],
    q: float,
    rng: np.random.Generator,
) -> StateVector | FactoredState:
    """With probability q, hit the pair's second qubit with a uniform Pauli.

    Trajectory sampling of the depolarising channel: the identity is drawn
    with the other three Paulis, so q = 1 still leaves a singlet passing its
    Bell test a quarter of the time.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    if rng.random() >= q:
        return state
    gate = _PAULIS[int(rng.integers(0, 4))]
    target = pair[1]
    if isinstance(state, FactoredState):
        state.apply_one_qubit(target, gate)
        return state
    front = state.reordered((target,) + tuple(l for l in state.labels if l != target))
    amp = (gate @ front.amplitudes.reshape(2, -1)).reshape(-1)
    return StateVector(front.labels, amp).reordered(state.labels)


def apply_loss(record: CustodyRecord, l: float, rng: np.random.Generator) -> LossOutcome:
    """Bernoulli loss draw for one stored/transported qubit."""
    if not 0.0 <= l <= 1.0:
        raise ValueError("l must lie in [0, 1]")
    return LossOutcome.LOST if rng.random() < l else LossOutcome.HELD


def required_passes(n_tests: int, epsilon: float) -> int:
    """Threshold ceil((1 - epsilon) * n) with a guard against float fuzz."""
    if not 0.0 <= epsilon < 1.0:
        raise ValueError("epsilon must lie in [0, 1)")
    return math.ceil((1.0 - epsilon) * n_tests - 1e-9)


def honest_acceptance_prob(
    n: int, per_test_pass: float | Fraction, epsilon: float
) -> float | Fraction:
    """Exact binomial tail: P(at least ceil((1-eps)N) of N tests pass).

    Evaluated term by term with exact integer binomials; passing a Fraction
    keeps the whole computation rational.
    """
    p = per_test_pass
    if not 0 <= p <= 1:
        raise ValueError("per_test_pass must lie in [0, 1]")
    k_min = required_passes(n, epsilon)
    total = 0 * p
    for k in range(k_min, n + 1):
        total += math.comb(n, k) * p**k * (1 - p) ** (n - k)
    return total


def singlet_pass_probability(q: float, l: float = 0.0) -> float:
    """Analytic per-test pass probability under depolarising q and loss l.

    The uniform-Pauli trajectory keeps the singlet with probability
    1 - q + q/4; a lost singlet counts as a failed test.
    """
    return (1.0 - l) * (1.0 - 0.75 * q)
