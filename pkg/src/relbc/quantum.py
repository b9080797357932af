"""Dense statevector / density-matrix engine over labelled qubit registers.

Conventions
-----------
* A state's qubits are addressed by ``QubitLabel`` (register name + index);
  the first label is the most significant bit of the amplitude index, so a
  two-qubit state stores amplitudes in the order |00>, |01>, |10>, |11>.
* Bell basis order is fixed to (PHI_PLUS, PHI_MINUS, PSI_PLUS, PSI_MINUS);
  measurement sampling walks that order by inverse CDF on one uniform draw.
* Commitment test projectors act on N triples of qubits.  Each triple is
  ordered (receiver-1 qubit, committed qubit, receiver-0 qubit) and triples
  are concatenated in ascending index, so operator matrices are
  bit-reproducible across runs.
* Everything is dense; a hard cap of ``MAX_QUBITS`` qubits per vector keeps
  memory bounded.  The protocol analyses need at most 3N + 1 <= 13 qubits.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps

MAX_QUBITS = 14
NORM_ATOL = 1e-10
HERM_ATOL = 1e-10


class QubitBudgetError(Exception):
    """Raised when an operation would exceed the dense-simulation qubit cap."""


class Register(Enum):
    W0P = "W0P"
    W0Q = "W0Q"
    W1P = "W1P"
    W1Q = "W1Q"
    CONTROL = "CONTROL"


@dataclass(frozen=True)
class QubitLabel:
    register: Register
    index: int

    def __str__(self) -> str:
        return f"{self.register.value}:{self.index}"

    @property
    def sort_key(self) -> tuple[str, int]:
        return (self.register.value, self.index)


def label(register: Register, index: int) -> QubitLabel:
    return QubitLabel(register, index)


def parse_label(text: str) -> QubitLabel:
    reg, _, idx = text.partition(":")
    return QubitLabel(Register(reg), int(idx))


class BellOutcome(Enum):
    PHI_PLUS = 0
    PHI_MINUS = 1
    PSI_PLUS = 2
    PSI_MINUS = 3


_SQ2 = 1.0 / math.sqrt(2.0)

# Rows are the Bell kets in BellOutcome order, columns |00>, |01>, |10>, |11>.
BELL_BASIS = np.array(
    [
        [_SQ2, 0.0, 0.0, _SQ2],
        [_SQ2, 0.0, 0.0, -_SQ2],
        [0.0, _SQ2, _SQ2, 0.0],
        [0.0, _SQ2, -_SQ2, 0.0],
    ],
    dtype=complex,
)

SINGLET = BELL_BASIS[BellOutcome.PSI_MINUS.value]
SINGLET_PROJECTOR = np.outer(SINGLET, SINGLET.conj())


@dataclass
class StateVector:
    """Pure state over an ordered tuple of labelled qubits."""

    labels: tuple[QubitLabel, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        self.labels = tuple(self.labels)
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate qubit labels in state")
        n = len(self.labels)
        if n > MAX_QUBITS:
            raise QubitBudgetError(f"{n} qubits exceeds cap of {MAX_QUBITS}")
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.shape != (2**n,):
            raise ValueError(
                f"amplitude length {self.amplitudes.size} does not match {n} qubits"
            )
        nrm = float(np.linalg.norm(self.amplitudes))
        if not math.isfinite(nrm) or abs(nrm - 1.0) > NORM_ATOL:
            raise ValueError(f"state norm {nrm} deviates from 1 beyond {NORM_ATOL}")

    @property
    def num_qubits(self) -> int:
        return len(self.labels)

    def position(self, lbl: QubitLabel) -> int:
        try:
            return self.labels.index(lbl)
        except ValueError:
            raise KeyError(f"label {lbl} not in state") from None

    def reordered(self, order: Sequence[QubitLabel]) -> "StateVector":
        """Return the same state with its qubits permuted to `order`."""
        order = tuple(order)
        if set(order) != set(self.labels):
            raise ValueError("reorder must use exactly the state's labels")
        if order == self.labels:
            return StateVector(self.labels, self.amplitudes.copy())
        perm = [self.position(l) for l in order]
        n = self.num_qubits
        amp = self.amplitudes.reshape([2] * n).transpose(perm).reshape(-1)
        return StateVector(order, np.ascontiguousarray(amp))

    def tensor(self, other: "StateVector") -> "StateVector":
        if set(self.labels) & set(other.labels):
            raise ValueError("tensor factors share labels")
        if self.num_qubits + other.num_qubits > MAX_QUBITS:
            raise QubitBudgetError(
                f"tensor of {self.num_qubits}+{other.num_qubits} qubits exceeds cap"
            )
        return StateVector(
            self.labels + other.labels, np.kron(self.amplitudes, other.amplitudes)
        )


@dataclass
class DensityMatrix:
    """Mixed state over labelled qubits; Hermitian, unit trace."""

    labels: tuple[QubitLabel, ...]
    matrix: np.ndarray

    def __post_init__(self):
        self.labels = tuple(self.labels)
        d = 2 ** len(self.labels)
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (d, d):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match labels")
        if np.abs(self.matrix - self.matrix.conj().T).max() > HERM_ATOL:
            raise ValueError("density matrix is not Hermitian within tolerance")
        tr = complex(np.trace(self.matrix))
        if abs(tr - 1.0) > 1e-10:
            raise ValueError(f"trace {tr} deviates from 1")

    def min_eigenvalue(self) -> float:
        return float(sla.eigvalsh(self.matrix)[0])


@dataclass
class HermitianOperator:
    """Hermitian operator over labelled qubits (projectors included)."""

    labels: tuple[QubitLabel, ...]
    matrix: np.ndarray

    def __post_init__(self):
        self.labels = tuple(self.labels)
        d = 2 ** len(self.labels)
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (d, d):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match labels")
        if np.abs(self.matrix - self.matrix.conj().T).max() > HERM_ATOL:
            raise ValueError("operator is not Hermitian within tolerance")

    def idempotency_defect(self) -> float:
        """Max-entry deviation of P^2 from P; ~0 for projectors."""
        return float(np.abs(self.matrix @ self.matrix - self.matrix).max())


def prepare_singlets(
    count: int, labels: Sequence[QubitLabel] | None = None
) -> StateVector:
    """Tensor product of `count` singlet pairs (|01> - |10>)/sqrt(2).

    Default labels pair (W0P, j) with (W0Q, j) for j = 1..count.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if 2 * count > MAX_QUBITS:
        raise QubitBudgetError(f"{2 * count} qubits exceeds cap of {MAX_QUBITS}")
    if labels is None:
        labels = []
        for j in range(1, count + 1):
            labels += [QubitLabel(Register.W0P, j), QubitLabel(Register.W0Q, j)]
    labels = tuple(labels)
    if len(labels) != 2 * count:
        raise ValueError("need exactly two labels per singlet")
    amp = np.array([1.0], dtype=complex)
    for _ in range(count):
        amp = np.kron(amp, SINGLET)
    return StateVector(labels, amp)


def _pair_partial(
    state: StateVector, a: QubitLabel, b: QubitLabel
) -> tuple[np.ndarray, tuple[QubitLabel, ...]]:
    """Bell-basis partial inner products <Bell_k| psi> for the pair (a, b).

    Returns a (4, 2^rest) array whose row k is the unnormalised remainder
    vector conditioned on outcome k, plus the remainder's label order.
    """
    if a == b:
        raise ValueError("bell measurement needs two distinct qubits")
    rest = tuple(l for l in state.labels if l not in (a, b))
    front = state.reordered((a, b) + rest)
    m = front.amplitudes.reshape(4, -1)
    return BELL_BASIS.conj() @ m, rest


def bell_probabilities(state: StateVector, a: QubitLabel, b: QubitLabel) -> np.ndarray:
    """Born probabilities of the four Bell outcomes on the pair (a, b)."""
    y, _ = _pair_partial(state, a, b)
    return (np.abs(y) ** 2).sum(axis=1)


def _sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw in index order; rounding residue goes to the last
    outcome of nonzero probability."""
    u = rng.random()
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    return max(i for i, p in enumerate(probs) if p > 0.0)


def bell_measurement(
    state: StateVector, a: QubitLabel, b: QubitLabel, rng: np.random.Generator
) -> tuple[BellOutcome, StateVector]:
    """Projective Bell-basis measurement of (a, b), sampled from `rng`.

    The outcome is drawn by inverse CDF in BellOutcome order from a single
    uniform variate, so replays under a fixed seed are bit-identical.  The
    returned state is the renormalised projection, with (a, b) first.
    """
    y, rest = _pair_partial(state, a, b)
    probs = (np.abs(y) ** 2).sum(axis=1)
    k = _sample_index(probs, rng)
    outcome = BellOutcome(k)
    post_pair = BELL_BASIS[k]
    if rest:
        remainder = y[k] / math.sqrt(probs[k])
        amp = np.kron(post_pair, remainder)
    else:
        amp = post_pair
    return outcome, StateVector((a, b) + rest, amp)


def reduced_density(state: StateVector, keep: Iterable[QubitLabel]) -> DensityMatrix:
    """Partial trace of |psi><psi| onto `keep` (output labels in sorted order)."""
    keep = sorted(set(keep), key=lambda l: l.sort_key)
    if not keep:
        raise ValueError("keep set must be non-empty")
    missing = [l for l in keep if l not in state.labels]
    if missing:
        raise ValueError(f"labels not in state: {missing}")
    rest = tuple(l for l in state.labels if l not in keep)
    front = state.reordered(tuple(keep) + rest)
    m = front.amplitudes.reshape(2 ** len(keep), -1)
    return DensityMatrix(tuple(keep), m @ m.conj().T)


def trace_distance(r: DensityMatrix, s: DensityMatrix) -> float:
    """Half the trace norm of r - s; 0 for identical, 1 for orthogonal states."""
    if r.labels != s.labels:
        raise ValueError("density matrices are over different labels")
    eig = sla.eigvalsh(r.matrix - s.matrix)
    return float(0.5 * np.abs(eig).sum())


def operator_norm(
    op: HermitianOperator | np.ndarray, other: HermitianOperator | np.ndarray | None = None
) -> float:
    """Largest singular value by full dense SVD (of the product, if two given).

    Cost is cubic in dimension; intended for the spectral verifications at
    small qubit counts, not for bulk sweeps.
    """
    a = op.matrix if isinstance(op, HermitianOperator) else np.asarray(op)
    if other is not None:
        b = other.matrix if isinstance(other, HermitianOperator) else np.asarray(other)
        a = a @ b
    return float(sla.svdvals(a)[0])


def expectation(
    state: StateVector,
    op: HermitianOperator,
    order: Sequence[QubitLabel] | None = None,
) -> float:
    """<psi| (op tensor identity) |psi>, aligning op qubits to `order`.

    `order` defaults to the operator's own labels; it must list one state
    label per operator qubit.  Remaining state qubits are untouched.
    """
    order = tuple(order) if order is not None else op.labels
    if len(order) != len(op.labels):
        raise ValueError("order must match the operator's qubit count")
    missing = [l for l in order if l not in state.labels]
    if missing:
        raise ValueError(f"labels not in state: {missing}")
    rest = tuple(l for l in state.labels if l not in order)
    front = state.reordered(order + rest)
    m = front.amplitudes.reshape(2 ** len(order), -1)
    return float(np.real(np.vdot(m, op.matrix @ m)))


# --------------------------------------------------------------------------
# Commitment test projectors.
#
# Per verified triple (ordered: receiver-1 qubit, committed qubit,
# receiver-0 qubit) the bit-0 test projects the (committed, receiver-0)
# pair onto the singlet, leaving the receiver-1 qubit free; the bit-1 test
# mirrors this on the (receiver-1, committed) pair.
# --------------------------------------------------------------------------

H1, H2, H0 = Register.W1Q, Register.W0P, Register.W0Q


def triple_labels(n: int) -> tuple[QubitLabel, ...]:
    """Canonical label order for the N verified triples.

    The committed qubits handed to the receiver are addressed as (W0P, j)
    regardless of strategy; states prepared for analysis use the same
    convention, and run-time alignment may override via `expectation`'s
    `order` argument.
    """
    out: list[QubitLabel] = []
    for j in range(1, n + 1):
        out += [QubitLabel(H1, j), QubitLabel(H2, j), QubitLabel(H0, j)]
    return tuple(out)


_I2 = np.eye(2, dtype=complex)
_I4 = np.eye(4, dtype=complex)

# 8x8 per-triple factors: singlet test on the relevant pair, identity on the
# spectator qubit of the triple.
_TRIPLE_TEST = {
    0: np.kron(_I2, SINGLET_PROJECTOR),
    1: np.kron(SINGLET_PROJECTOR, _I2),
}
_TRIPLE_MISS = {
    0: np.kron(_I2, _I4 - SINGLET_PROJECTOR),
    1: np.kron(_I4 - SINGLET_PROJECTOR, _I2),
}


def _check_subset(n: int, subset: Iterable[int]) -> frozenset[int]:
    sub = frozenset(subset)
    if not sub:
        raise ValueError("subset must be non-empty")
    if not sub <= set(range(1, n + 1)):
        raise ValueError(f"subset {sorted(sub)} not within 1..{n}")
    return sub


def test_projector_sparse(bit: int, n: int, subset: Iterable[int]) -> sps.csr_matrix:
    """Sparse assembly of the bit-test projector (identity off `subset`)."""
    if bit not in (0, 1):
        raise ValueError("bit must be 0 or 1")
    sub = _check_subset(n, subset)
    factor = sps.csr_matrix(_TRIPLE_TEST[bit])
    eye8 = sps.identity(8, dtype=complex, format="csr")
    out = None
    for j in range(1, n + 1):
        f = factor if j in sub else eye8
        out = f if out is None else sps.kron(out, f, format="csr")
    return out


def build_test_projector(bit: int, n: int, subset: Iterable[int]) -> HermitianOperator:
    """Projector testing a purported commitment to `bit` on the given triples.

    For bit 0 every triple in `subset` contributes (identity on the
    receiver-1 qubit) x (singlet projector on committed/receiver-0); for
    bit 1 the singlet test sits on (receiver-1, committed).  Triples outside
    `subset` carry the identity, so the operator acts on the full 8^N space.
    """
    mat = test_projector_sparse(bit, n, subset).toarray()
    return HermitianOperator(triple_labels(n), mat)


def build_threshold_projector(bit: int, n: int, delta: float) -> HermitianOperator:
    """Error-tolerant test: at least (1 - delta)N of the N pairs are singlets.

    Sum over m >= (1 - delta)N of the projector onto Bell-product states of
    the tested pairs having exactly m singlet factors, tensored with the
    identity on the spectator qubit of each triple.  delta * N must be an
    integer; the m-terms are mutually orthogonal so the sum is a projector.
    """
    if bit not in (0, 1):
        raise ValueError("bit must be 0 or 1")
    if not 0 <= delta < 1:
        raise ValueError("delta must satisfy 0 <= delta < 1")
    dn = delta * n
    if abs(dn - round(dn)) > 1e-9:
        raise ValueError(f"delta * N = {dn} is not an integer")
    m_min = n - int(round(dn))
    hit = sps.csr_matrix(_TRIPLE_TEST[bit])
    miss = sps.csr_matrix(_TRIPLE_MISS[bit])
    total = None
    for m in range(m_min, n + 1):
        for hits in itertools.combinations(range(1, n + 1), m):
            term = None
            for j in range(1, n + 1):
                f = hit if j in hits else miss
                term = f if term is None else sps.kron(term, f, format="csr")
            total = term if total is None else total + term
    return HermitianOperator(triple_labels(n), total.toarray())


def test_projector_range_factor(bit: int) -> np.ndarray:
    """Orthonormal basis (8x2 isometry) of one tested triple's range.

    Columns are |b> on the spectator qubit tensored with the singlet on the
    tested pair, in the triple's qubit order.
    """
    cols = []
    for b in (0, 1):
        e = np.zeros(2, dtype=complex)
        e[b] = 1.0
        if bit == 0:
            cols.append(np.kron(e, SINGLET))
        else:
            cols.append(np.kron(SINGLET, e))
    return np.column_stack(cols)


def threshold_range_basis(bit: int, n: int, delta: float) -> np.ndarray:
    """Dense orthonormal basis of the threshold projector's range.

    One column per (Bell-state assignment with enough singlets) x
    (computational word on the spectator qubits).
    """
    dn = delta * n
    if abs(dn - round(dn)) > 1e-9:
        raise ValueError(f"delta * N = {dn} is not an integer")
    m_min = n - int(round(dn))
    eye2 = np.eye(2)
    cols = []
    for assignment in itertools.product(range(4), repeat=n):
        if sum(1 for a in assignment if a == BellOutcome.PSI_MINUS.value) < m_min:
            continue
        for word in itertools.product(range(2), repeat=n):
            v = np.array([1.0], dtype=complex)
            for a, w in zip(assignment, word):
                bell = BELL_BASIS[a]
                spect = eye2[w]
                trip = np.kron(spect, bell) if bit == 0 else np.kron(bell, spect)
                v = np.kron(v, trip)
            cols.append(v)
    return np.column_stack(cols)


class FactoredState:
    """A register state kept as a product of independent dense factors.

    Protocol runs stay tractable at large N because honest preparations are
    products of singlets; factors merge only when an operation couples them,
    and a Bell measurement splits the measured pair back off.
    """

    def __init__(self):
        self._factors: dict[int, StateVector] = {}
        self._where: dict[QubitLabel, int] = {}
        self._next = 0

    @property
    def labels(self) -> set[QubitLabel]:
        return set(self._where)

    def add_factor(self, state: StateVector) -> None:
        if set(state.labels) & set(self._where):
            raise ValueError("factor shares labels with existing state")
        self._factors[self._next] = state
        for l in state.labels:
            self._where[l] = self._next
        self._next += 1

    def factor(self, lbl: QubitLabel) -> StateVector:
        return self._factors[self._where[lbl]]

    def _merge(self, labels: Sequence[QubitLabel]) -> int:
        ids = []
        for l in labels:
            if l not in self._where:
                raise KeyError(f"label {l} not present")
            fid = self._where[l]
            if fid not in ids:
                ids.append(fid)
        if len(ids) == 1:
            return ids[0]
        merged = self._factors[ids[0]]
        for fid in ids[1:]:
            merged = merged.tensor(self._factors[fid])
        keep = ids[0]
        self._factors[keep] = merged
        for fid in ids[1:]:
            del self._factors[fid]
        for l in merged.labels:
            self._where[l] = keep
        return keep

    def apply_one_qubit(self, lbl: QubitLabel, gate: np.ndarray) -> None:
        fid = self._where[lbl]
        st = self._factors[fid]
        front = st.reordered((lbl,) + tuple(l for l in st.labels if l != lbl))
        m = gate @ front.amplitudes.reshape(2, -1)
        self._factors[fid] = StateVector(front.labels, m.reshape(-1))
        for l in front.labels:
            self._where[l] = fid

    def bell_measure(
        self, a: QubitLabel, b: QubitLabel, rng: np.random.Generator
    ) -> BellOutcome:
        """Measure the pair, collapse, and split it back off as its own factor.

        After a projective Bell measurement the global state factorises
        exactly as (Bell state of the pair) x (conditioned remainder), so the
        remainder is the sampled row of the Bell-basis partial inner products.
        """
        fid = self._merge((a, b))
        state = self._factors[fid]
        y, rest = _pair_partial(state, a, b)
        probs = (np.abs(y) ** 2).sum(axis=1)
        k = _sample_index(probs, rng)
        outcome = BellOutcome(k)
        del self._factors[fid]
        self._factors[self._next] = StateVector((a, b), BELL_BASIS[k])
        self._where[a] = self._where[b] = self._next
        self._next += 1
        if rest:
            rest_amp = y[k] / math.sqrt(probs[k])
            self._factors[self._next] = StateVector(rest, rest_amp)
            for l in rest:
                self._where[l] = self._next
            self._next += 1
        return outcome

    def joint(self, order: Sequence[QubitLabel]) -> StateVector:
        """Dense joint state of the factors touching `order`, reordered."""
        fid = self._merge(tuple(order))
        st = self._factors[fid]
        full = tuple(order) + tuple(l for l in st.labels if l not in set(order))
        return st.reordered(full)

    def reduced(self, keep: Sequence[QubitLabel]) -> DensityMatrix:
        st = self.joint(tuple(keep))
        return reduced_density(st, keep)
