"""Closed-form security bounds and their independent spectral verification.

The binding guarantee of the commitment rests on a handful of inequalities:
the product of the two bit-test projectors has operator norm 2^-N, the top
eigenvalue of their sum (the best achievable p0 + p1) is 1 + 2^-N, subset
variants obey a 2^-k law in the overlap k of the tested index sets, the
randomised-distribution variant adds an exactly enumerable hypergeometric
tail, and the error-tolerant tests obey a combinatorial norm bound.  Every
closed form here has a matching numerical route (dense SVD / dense
eigensolver / exact enumeration) so nothing is taken on faith.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable

import numpy as np
import scipy.linalg as sla

from . import quantum

# Largest N for which the 8^N-dimensional spectral computations are run.
SPECTRAL_N_MAX = 4
BOUND_ATOL = 1e-9


class Variant(Enum):
    ETBC = "ETBC"
    ETRBC = "ETRBC"


@dataclass(frozen=True)
class BoundReport:
    """One verified inequality: computed quantity vs its closed-form bound."""

    n: int
    delta: float
    variant: Variant
    computed_norm: float
    closed_form_bound: float
    cheat_value: float
    satisfied: bool

    def __post_init__(self):
        want = self.computed_norm <= self.closed_form_bound + BOUND_ATOL
        if self.satisfied != want:
            raise ValueError("satisfied flag inconsistent with the comparison")
        if self.cheat_value < 1.0 - BOUND_ATOL:
            raise ValueError("cheat value below the honest floor of 1")


@dataclass(frozen=True)
class SubsetPartition:
    """A half/half split of the committed qubit indices 1..N."""

    n: int
    j0: frozenset[int]
    j1: frozenset[int]

    def __post_init__(self):
        if self.n % 2 != 0:
            raise ValueError("partition needs even N")
        full = set(range(1, self.n + 1))
        if len(self.j0) != self.n // 2:
            raise ValueError("j0 must have size N/2")
        if self.j0 | self.j1 != full or self.j0 & self.j1:
            raise ValueError("j0, j1 must partition 1..N")


def etbc_cheat_bound(n: int) -> float:
    """Closed-form ceiling on p0 + p1 for the basic protocol: 1 + 2^(1-N) + 4^-N."""
    if n < 1:
        raise ValueError("N must be >= 1")
    return 1.0 + 2.0 ** (-n + 1) + 2.0 ** (-2 * n)


def _check_spectral_n(n: int) -> None:
    if not 1 <= n <= SPECTRAL_N_MAX:
        raise ValueError(f"spectral route supports 1 <= N <= {SPECTRAL_N_MAX}")


def exact_cheat_value(n: int) -> float:
    """Best achievable p0 + p1: top eigenvalue of the summed test projectors.

    Dense eigensolver on the 8^N space; the two-projector principal-angle
    structure makes the value 1 + 2^-N, which the solver confirms rather
    than assumes.
    """
    _check_spectral_n(n)
    full = range(1, n + 1)
    s = (
        quantum.test_projector_sparse(0, n, full)
        + quantum.test_projector_sparse(1, n, full)
    ).toarray()
    d = s.shape[0]
    return float(sla.eigh(s, eigvals_only=True, subset_by_index=(d - 1, d - 1))[0])


def product_norm_svd(n: int) -> float:
    """|P0 P1| by full-space dense SVD of the 8^N product matrix."""
    _check_spectral_n(n)
    full = range(1, n + 1)
    q = (
        quantum.test_projector_sparse(0, n, full)
        @ quantum.test_projector_sparse(1, n, full)
    ).toarray()
    return float(sla.svdvals(q)[0])


def product_norm_eig(n: int) -> float:
    """|P0 P1| as sqrt of the top eigenvalue of P1 P0 P1 (dense eigensolver)."""
    _check_spectral_n(n)
    full = range(1, n + 1)
    p0 = quantum.test_projector_sparse(0, n, full)
    p1 = quantum.test_projector_sparse(1, n, full)
    h = (p1 @ p0 @ p1).toarray()
    d = h.shape[0]
    top = float(sla.eigh(h, eigvals_only=True, subset_by_index=(d - 1, d - 1))[0])
    return math.sqrt(max(top, 0.0))


def _range_gram(n: int, j0: frozenset[int], j1prime: frozenset[int]) -> np.ndarray:
    """Cross-Gram matrix V0* V1 of orthonormal range bases, per-triple blocks.

    Each projector is a tensor product over triples, so its range basis is
    the matching product of per-triple bases (an 8x2 isometry on tested
    triples, the 8x8 identity elsewhere) and the cross-Gram inherits the
    block structure.  |P0 P1| equals the top singular value of this matrix.
    """
    v0 = quantum.test_projector_range_factor(0)
    v1 = quantum.test_projector_range_factor(1)
    eye8 = np.eye(8, dtype=complex)
    blocks = {
        (True, True): v0.conj().T @ v1,
        (True, False): v0.conj().T,
        (False, True): v1,
        (False, False): eye8,
    }
    gram = np.array([[1.0]], dtype=complex)
    for j in range(1, n + 1):
        gram = np.kron(gram, blocks[(j in j0, j in j1prime)])
    return gram


def cross_projector_norm(n: int, j0: Iterable[int], j1prime: Iterable[int]) -> float:
    """|P0 on j0 times P1 on j1prime| by dense SVD of the range cross-Gram.

    Expected value is 2^-k with k the overlap of the two index sets; the SVD
    verifies this rather than assuming it.
    """
    _check_spectral_n(n)
    j0 = quantum._check_subset(n, j0)
    j1prime = quantum._check_subset(n, j1prime)
    return float(sla.svdvals(_range_gram(n, j0, j1prime))[0])


def overlap_tail_fraction(n: int) -> Fraction:
    """Exact probability that a uniform size-N/2 subset overlaps a fixed one
    in more than N/3 indices; hypergeometric sum in rational arithmetic."""
    if n < 2 or n % 2 != 0:
        raise ValueError("N must be even and >= 2")
    half = n // 2
    cutoff = Fraction(n, 3)
    total = math.comb(n, half)
    hit = sum(
        math.comb(half, k) * math.comb(n - half, half - k)
        for k in range(0, half + 1)
        if Fraction(k) > cutoff
    )
    return Fraction(hit, total)


def subset_overlap_tail(n: int) -> float:
    """Float interface to `overlap_tail_fraction`."""
    return float(overlap_tail_fraction(n))


def etrbc_tail_bound(n: int) -> float:
    """Leading-order ceiling on the overlap tail: (N/6) (3 / 2^(10/6))^N."""
    if n < 6 or n % 2 != 0:
        raise ValueError("N must be even and >= 6")
    return (n / 6.0) * (2.0 ** (-10.0 / 6.0) * 3.0) ** n


def etrbc_p1_bound(n: int, p0: float) -> float:
    """Ceiling on p1 given p0 for the randomised-distribution variant.

    1 - p0 + 2^(-N/6 + 1) + 2^(-N/3) plus the subset tail, with the tail's
    leading-order constant taken as 1.
    """
    if not 0.0 <= p0 <= 1.0:
        raise ValueError("p0 must lie in [0, 1]")
    return 1.0 - p0 + 2.0 ** (-n / 6.0 + 1) + 2.0 ** (-n / 3.0) + etrbc_tail_bound(n)


def qdelta_norm_bound(n: int, delta: float) -> float:
    """Norm ceiling for the product of the two error-tolerant test projectors.

    2^(-N + 2 dN) 3^(2 dN) (dN + 1)^2 C(N, N - dN)^2 with dN = delta * N an
    integer.  Vacuous (> 1) at small N but tends to zero for fixed small
    delta as N grows.
    """
    if not 0.0 <= delta <= 0.5:
        raise ValueError("delta must satisfy 0 <= delta <= 1/2")
    dn = delta * n
    if abs(dn - round(dn)) > 1e-9:
        raise ValueError(f"delta * N = {dn} is not an integer")
    dn = int(round(dn))
    return float(
        Fraction(2) ** (-n + 2 * dn)
        * Fraction(3) ** (2 * dn)
        * Fraction(dn + 1) ** 2
        * Fraction(math.comb(n, n - dn)) ** 2
    )


def hoeffding_gamma(delta: float, epsilon: float, n: int) -> float:
    """Concentration term exp(-2N (delta - epsilon)^2) for the threshold test.

    Standard i.i.d. tail bound; vanishes for fixed delta > epsilon as N
    grows, as the error-tolerant security argument requires.
    """
    if delta <= epsilon:
        raise ValueError("delta must exceed epsilon")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    return math.exp(-2.0 * n * (delta - epsilon) ** 2)


def threshold_product_norm(n: int, delta: float, method: str = "auto") -> float:
    """|P0^delta P1^delta| by dense SVD.

    `method` 'dense' multiplies the full 8^N matrices; 'gram' takes the SVD
    of the cross-Gram of the two ranges' orthonormal bases (equal by
    isometry invariance, far cheaper at N = 4).  'auto' picks dense up to
    N = 3.
    """
    _check_spectral_n(n)
    if method == "auto":
        method = "dense" if n <= 3 else "gram"
    if method == "dense":
        p0 = quantum.build_threshold_projector(0, n, delta).matrix
        p1 = quantum.build_threshold_projector(1, n, delta).matrix
        return float(sla.svdvals(p0 @ p1)[0])
    if method == "gram":
        v0 = quantum.threshold_range_basis(0, n, delta)
        v1 = quantum.threshold_range_basis(1, n, delta)
        return float(sla.svdvals(v0.conj().T @ v1)[0])
    raise ValueError(f"unknown method {method!r}")


def threshold_cheat_value(n: int, delta: float) -> float:
    """Top eigenvalue of the summed error-tolerant test projectors."""
    _check_spectral_n(n)
    s = (
        quantum.build_threshold_projector(0, n, delta).matrix
        + quantum.build_threshold_projector(1, n, delta).matrix
    )
    d = s.shape[0]
    return float(sla.eigh(s, eigvals_only=True, subset_by_index=(d - 1, d - 1))[0])


def half_subsets(n: int) -> list[frozenset[int]]:
    """All size-N/2 subsets of 1..N in deterministic order."""
    if n % 2 != 0:
        raise ValueError("N must be even")
    return [frozenset(c) for c in itertools.combinations(range(1, n + 1), n // 2)]


def etrbc_admissible_norm_max(n: int) -> float:
    """Worst cross norm over half-subset pairs with overlap at most N/3.

    For the randomised variant: the zero-test ran on J0, the one-test on the
    complement of a J0' overlapping J0 in at most N/3 indices.  The 2^-k law
    makes every admissible pair's norm at most 2^-N/6.
    """
    _check_spectral_n(n)
    worst = 0.0
    for j0 in half_subsets(n):
        for j0p in half_subsets(n):
            if len(j0 & j0p) > n / 3.0:
                continue
            j1p = frozenset(range(1, n + 1)) - j0p
            worst = max(worst, cross_projector_norm(n, j0, j1p))
    return worst
