"""Committer cheating strategies and receiver information attacks.

The optimal cheat is the top eigenvector of the summed bit-test projectors;
the coherent-superposition commitment keeps the committed value in a control
qubit; drifting preparation errors give the receiver a pre-unveiling
Helstrom advantage that a single secret batch-swap bit removes.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg as sla

from . import quantum
from .bounds import SPECTRAL_N_MAX
from .quantum import (
    BELL_BASIS,
    BellOutcome,
    DensityMatrix,
    QubitLabel,
    Register,
    StateVector,
    trace_distance,
    triple_labels,
)

log = logging.getLogger(__name__)

EIG_DEGENERACY_ATOL = 1e-9


class StrategyKind(Enum):
    HONEST = "HONEST"
    SUPERPOSITION = "SUPERPOSITION"
    OPTIMAL_CHEAT = "OPTIMAL_CHEAT"
    CUSTOM = "CUSTOM"


class Directive(Enum):
    UNVEIL = "UNVEIL"
    ABSTAIN = "ABSTAIN"


@dataclass(frozen=True)
class AliceStrategy:
    """What the committer prepares and how her agents later act.

    `claim` is the bit value announced at unveiling; honest play defaults it
    to the committed bit, while a cross-unveiling or cheating run sets it
    explicitly.  `directive` is fixed before commitment and shared by all
    unveiling agents (all-or-none).
    """

    kind: StrategyKind
    commit: int | None = None
    alpha: complex | None = None
    beta: complex | None = None
    custom_state: StateVector | None = None
    claim: int | None = None
    directive: Directive = Directive.UNVEIL

    def __post_init__(self):
        if self.kind is StrategyKind.HONEST:
            if self.commit not in (0, 1):
                raise ValueError("honest strategy needs commit in {0, 1}")
        if self.kind is StrategyKind.SUPERPOSITION:
            if self.alpha is None or self.beta is None:
                raise ValueError("superposition strategy needs alpha and beta")
            nrm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
            if abs(nrm - 1.0) > 1e-10:
                raise ValueError(f"|alpha|^2 + |beta|^2 = {nrm} is not 1")
        if self.kind is StrategyKind.CUSTOM and self.custom_state is None:
            raise ValueError("custom strategy needs a state")
        if self.claim not in (None, 0, 1):
            raise ValueError("claim must be 0, 1 or None")

    @classmethod
    def honest(cls, commit: int, claim: int | None = None,
               directive: Directive = Directive.UNVEIL) -> "AliceStrategy":
        return cls(StrategyKind.HONEST, commit=commit, claim=claim, directive=directive)

    @classmethod
    def superposition(cls, alpha: complex, beta: complex,
                      claim: int | None = None) -> "AliceStrategy":
        return cls(StrategyKind.SUPERPOSITION, alpha=alpha, beta=beta, claim=claim)

    @classmethod
    def optimal_cheat(cls, claim: int | None = None) -> "AliceStrategy":
        return cls(StrategyKind.OPTIMAL_CHEAT, claim=claim)

    @classmethod
    def custom(cls, state: StateVector, claim: int | None = None) -> "AliceStrategy":
        return cls(StrategyKind.CUSTOM, custom_state=state, claim=claim)

    def resolved_claim(self) -> int | None:
        if self.claim is not None:
            return self.claim
        if self.kind is StrategyKind.HONEST:
            return self.commit
        return None


class Labeling(Enum):
    SEQUENTIAL = "SEQUENTIAL"
    ODD_EVEN_INTERLEAVE = "ODD_EVEN_INTERLEAVE"
    RANDOM_BATCH_SWAP = "RANDOM_BATCH_SWAP"


@dataclass(frozen=True)
class DriftModel:
    """Predictable preparation drift and the labelling that fights it.

    `rate` is radians per preparation slot: the pair produced in slot s is
    rotated within the Bell plane to cos(rate*s/2)|psi-> + sin(rate*s/2)|phi->,
    an imperfect preparation whose single-qubit marginals vary predictably
    with s.  (A local unitary on one half would leave every marginal
    maximally mixed and leak nothing, so the drift must live in the state,
    not in a local frame.)  `swap_bit` is the single secret bit consumed by
    RANDOM_BATCH_SWAP.
    """

    rate: float = 0.0
    labeling: Labeling = Labeling.SEQUENTIAL
    swap_bit: int | None = None

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be >= 0")
        if self.labeling is Labeling.RANDOM_BATCH_SWAP and self.swap_bit not in (0, 1, None):
            raise ValueError("swap_bit must be 0, 1 or None")


def label_batches(drift: DriftModel, n: int) -> dict[int, QubitLabel]:
    """Map preparation slots 1..2N to the committed-side labels they feed.

    SEQUENTIAL sends the first N slots to register 0; ODD_EVEN_INTERLEAVE
    sends odd slots to register 0 and even to register 1; RANDOM_BATCH_SWAP
    groups sequentially and exchanges the two batches when its one secret
    bit is 1.
    """
    regs = (Register.W0P, Register.W1P)
    out: dict[int, QubitLabel] = {}
    if drift.labeling is Labeling.ODD_EVEN_INTERLEAVE:
        for s in range(1, 2 * n + 1):
            reg = regs[(s + 1) % 2]
            out[s] = QubitLabel(reg, (s + 1) // 2)
        return out
    swap = drift.labeling is Labeling.RANDOM_BATCH_SWAP and drift.swap_bit == 1
    for s in range(1, 2 * n + 1):
        reg_idx = 0 if s <= n else 1
        if swap:
            reg_idx = 1 - reg_idx
        out[s] = QubitLabel(regs[reg_idx], s if s <= n else s - n)
    return out


def drifted_pair_state(slot: int, rate: float) -> np.ndarray:
    """Four amplitudes of the slot-s preparation under Bell-plane drift."""
    theta = rate * slot
    return (
        math.cos(theta / 2.0) * BELL_BASIS[BellOutcome.PSI_MINUS.value]
        + math.sin(theta / 2.0) * BELL_BASIS[BellOutcome.PHI_MINUS.value]
    )


def handed_marginal(slot: int, rate: float) -> np.ndarray:
    """Reduced state of the committed-side half of the slot-s preparation."""
    amp = drifted_pair_state(slot, rate).reshape(2, 2)
    return amp @ amp.conj().T


def _slots_for_register(drift: DriftModel, n: int, register_idx: int,
                        swap_bit: int | None = None) -> list[int]:
    d = drift
    if swap_bit is not None:
        d = DriftModel(drift.rate, drift.labeling, swap_bit)
    assignment = label_batches(d, n)
    reg = (Register.W0P, Register.W1P)[register_idx]
    picked = sorted(
        (lbl.index, s) for s, lbl in assignment.items() if lbl.register is reg
    )
    return [s for _, s in picked]


def _handed_density(drift: DriftModel, n: int, commit: int,
                    swap_bit: int | None = None) -> np.ndarray:
    rho = np.array([[1.0]], dtype=complex)
    for s in _slots_for_register(drift, n, commit, swap_bit):
        rho = np.kron(rho, handed_marginal(s, drift.rate))
    return rho


def bob_early_guess_advantage(n: int, drift: DriftModel) -> float:
    """Helstrom advantage of the receiver's best pre-unveiling guess.

    Half the trace distance between the committed-set reduced states under
    commit-0 and commit-1.  With RANDOM_BATCH_SWAP and no fixed swap_bit the
    two equally likely labelings are averaged, which equalises the marginals
    exactly.
    """
    labels = tuple(QubitLabel(Register.W0P, j) for j in range(1, n + 1))
    if drift.labeling is Labeling.RANDOM_BATCH_SWAP and drift.swap_bit is None:
        rhos = [
            0.5 * _handed_density(drift, n, b, 0) + 0.5 * _handed_density(drift, n, b, 1)
            for b in (0, 1)
        ]
    else:
        rhos = [_handed_density(drift, n, b) for b in (0, 1)]
    r0 = DensityMatrix(labels, rhos[0])
    r1 = DensityMatrix(labels, rhos[1])
    return 0.5 * trace_distance(r0, r1)


def _top_eigenpair(n: int) -> tuple[float, np.ndarray, bool]:
    full = range(1, n + 1)
    s = (
        quantum.test_projector_sparse(0, n, full)
        + quantum.test_projector_sparse(1, n, full)
    ).toarray()
    d = s.shape[0]
    vals, vecs = sla.eigh(s, subset_by_index=(d - 2, d - 1))
    degenerate = abs(vals[1] - vals[0]) <= EIG_DEGENERACY_ATOL
    return float(vals[1]), vecs[:, 1], degenerate


@functools.lru_cache(maxsize=None)
def optimal_cheat_state(n: int) -> StateVector:
    """Committed state maximising p0 + p1: top eigenvector of the summed tests.

    Lives on the 3N verified qubits in canonical triple order.  A degenerate
    top eigenspace is logged and an arbitrary (but deterministic) member
    returned.  Cached: the eigendecomposition is seed-independent.
    """
    if not 1 <= n <= SPECTRAL_N_MAX:
        raise ValueError(f"optimal cheat supported for 1 <= N <= {SPECTRAL_N_MAX}")
    top, vec, degenerate = _top_eigenpair(n)
    if degenerate:
        log.warning("top eigenspace at N=%d is degenerate; returning one member", n)
    vec = vec / np.linalg.norm(vec)
    return StateVector(triple_labels(n), vec.astype(complex))


def superposition_commit_state(n: int, alpha: complex, beta: complex) -> StateVector:
    """Global pure state of a coherent commitment alpha|0> + beta|1>.

    A control qubit selects which register's committed halves were handed
    over; the committer keeps the control and the other register's halves at
    the quantum level.  Labels: CONTROL plus all four W registers.
    """
    nrm = abs(alpha) ** 2 + abs(beta) ** 2
    if abs(nrm - 1.0) > 1e-10:
        raise ValueError(f"|alpha|^2 + |beta|^2 = {nrm} is not 1")
    labels = [QubitLabel(Register.CONTROL, 1)]
    for j in range(1, n + 1):
        for reg in (Register.W0P, Register.W0Q, Register.W1P, Register.W1Q):
            labels.append(QubitLabel(reg, j))
    if len(labels) > quantum.MAX_QUBITS:
        raise quantum.QubitBudgetError(
            f"superposition state needs {len(labels)} qubits (cap {quantum.MAX_QUBITS})"
        )

    def branch(pairings: list[tuple[Register, Register]]) -> np.ndarray:
        amp = np.array([1.0], dtype=complex)
        order: list[QubitLabel] = []
        for j in range(1, n + 1):
            for a, b in pairings:
                amp = np.kron(amp, quantum.SINGLET)
                order += [QubitLabel(a, j), QubitLabel(b, j)]
        st = StateVector(tuple(order), amp).reordered(tuple(labels[1:]))
        return st.amplitudes

    # control 0: handed halves pair with register-0 returns, retained with 1
    b0 = branch([(Register.W0P, Register.W0Q), (Register.W1P, Register.W1Q)])
    # control 1: handed halves pair with register-1 returns, retained with 0
    b1 = branch([(Register.W0P, Register.W1Q), (Register.W1P, Register.W0Q)])
    zero = np.array([1.0, 0.0], dtype=complex)
    one = np.array([0.0, 1.0], dtype=complex)
    amp = alpha * np.kron(zero, b0) + beta * np.kron(one, b1)
    return StateVector(tuple(labels), amp)


def strategy_expectations(state: StateVector, n: int) -> tuple[float, float]:
    """Exact (p0, p1): expectations of both full bit tests on a prepared state."""
    p0 = quantum.build_test_projector(0, n, range(1, n + 1))
    p1 = quantum.build_test_projector(1, n, range(1, n + 1))
    return quantum.expectation(state, p0), quantum.expectation(state, p1)
