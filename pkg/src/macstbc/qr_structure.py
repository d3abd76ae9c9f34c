"""Q-R structure of the lattice generator.

Numerical side: QR of ``M``, the ``R11 / R12 / R22`` partition and a
tolerance-based classification over random channels.  Exact side:
Hurwitz-Radon orthogonality and the pairing condition on the integer
coefficient matrices, plus a direct polynomial-identity test of whether
the cross Gram matrix forces a diagonal ``R22``.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

from macstbc.design_algebra import ComplexLinearDesign
from macstbc.lattice import (
    ChannelRealization,
    CoefficientMatrixSet,
    build_lattice_generator,
    receive_antennas,
)

__all__ = [
    "ClassificationReport",
    "Proposition1Report",
    "RBlockStructure",
    "RankDeficiencyError",
    "StructureClass",
    "Theorem2Report",
    "ZERO_TOL",
    "check_hurwitz_radon",
    "classify_blocks",
    "classify_design",
    "cross_gram_diagonal",
    "extract_blocks",
    "find_group_partition",
    "qr_decompose",
    "verify_proposition1",
    "verify_theorem2",
]

ZERO_TOL = 1e-9
_RANK_GUARD = 1e-10


class StructureClass(str, enum.Enum):
    REDUCED_ASDC = "ReducedASDC"
    REDUCED_WSDC = "ReducedWSDC"
    UNSTRUCTURED = "Unstructured"

    def __str__(self):
        return self.value


class RankDeficiencyError(np.linalg.LinAlgError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"lattice generator is rank deficient: column {column + 1} "
                         "is dependent on the preceding columns")


def qr_decompose(M, complete=False):
    """Householder QR with a nonnegative diagonal in ``R``.

    Returns the reduced factors (``Q`` is ``n x 4k``, ``R`` square) unless
    ``complete`` is set, in which case ``Q`` is square and ``R`` carries the
    zero rows below the first ``4k``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] < M.shape[1]:
        raise ValueError(f"need a tall or square matrix, got shape {M.shape}")
    Q, R = np.linalg.qr(M, mode="complete" if complete else "reduced")
    n = M.shape[1]
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    Q[:, :n] *= signs
    R[:n] *= signs[:, None]
    scale = max(np.linalg.norm(M), np.finfo(float).tiny)
    small = np.flatnonzero(np.abs(np.diag(R)) <= _RANK_GUARD * scale)
    if small.size:
        raise RankDeficiencyError(int(small[0]))
    return Q, R


def _max_offdiag(block):
    return float(np.abs(block - np.diag(np.diag(block))).max(initial=0.0))


def classify_blocks(R11, R22, scale, tol=ZERO_TOL):
    zero = tol * scale
    d11 = _max_offdiag(R11) < zero
    d22 = _max_offdiag(R22) < zero
    if d11 and d22:
        return StructureClass.REDUCED_ASDC
    if d11:
        return StructureClass.REDUCED_WSDC
    return StructureClass.UNSTRUCTURED


@dataclass(frozen=True, eq=False)
class RBlockStructure:
    R11: np.ndarray
    R12: np.ndarray
    R22: np.ndarray
    classification: StructureClass
    tol: float

    @property
    def k(self) -> int:
        return self.R11.shape[0] // 2

    @property
    def R(self) -> np.ndarray:
        z = np.zeros_like(self.R11)
        return np.block([[self.R11, self.R12], [z, self.R22]])

    @property
    def frobenius(self) -> float:
        return float(np.sqrt(np.sum(self.R11 ** 2) + np.sum(self.R12 ** 2) + np.sum(self.R22 ** 2)))

    @property
    def offdiag11(self) -> float:
        """Largest off-diagonal magnitude of ``R11`` relative to ``||R||_F``."""
        return _max_offdiag(self.R11) / self.frobenius

    @property
    def offdiag22(self) -> float:
        return _max_offdiag(self.R22) / self.frobenius

    @property
    def min_abs12(self) -> float:
        return float(np.abs(self.R12).min()) / self.frobenius

    def zero_pattern(self, tol=None) -> list[str]:
        """Rows of ``R`` drawn with ``.`` for zeros and ``x`` otherwise."""
        tol = self.tol if tol is None else tol
        mask = np.abs(self.R) >= tol * self.frobenius
        return ["".join("x" if v else "." for v in row) for row in mask]


def extract_blocks(R, k, tol=ZERO_TOL) -> RBlockStructure:
    """Split the upper-triangular ``R`` into its three ``2k x 2k`` blocks.

    Rows beyond ``4k`` (complete QR) must be numerically zero and are dropped.
    """
    R = np.asarray(R, dtype=float)
    n = 4 * k
    if R.ndim != 2 or R.shape[1] != n or R.shape[0] < n:
        raise ValueError(f"R must be (>= {n}) x {n} for k={k}, got {R.shape}")
    scale = np.linalg.norm(R)
    if R.shape[0] > n and np.abs(R[n:]).max() > tol * scale:
        raise ValueError("R has nonzero rows below row 4k")
    R = R[:n]
    if np.abs(np.tril(R, -1)).max(initial=0.0) > tol * scale:
        raise ValueError("R is not upper triangular")
    h = 2 * k
    R11, R12, R22 = R[:h, :h].copy(), R[:h, h:].copy(), R[h:, h:].copy()
    cls = classify_blocks(R11, R22, scale, tol)
    for b in (R11, R12, R22):
        b.setflags(write=False)
    return RBlockStructure(R11, R12, R22, cls, tol)


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _random_blocks(design, Nr, rng, tol):
    from macstbc.simulation import sample_channel

    ch = sample_channel(design.Nt, Nr, rng)
    M = build_lattice_generator(design, ch).M
    _, R = qr_decompose(M)
    return extract_blocks(R, design.k, tol)


@dataclass
class ClassificationReport:
    classification: StructureClass
    trials: int
    tol: float
    offdiag11: np.ndarray = field(repr=False)
    offdiag22: np.ndarray = field(repr=False)

    @property
    def max_offdiag11(self) -> float:
        return float(self.offdiag11.max())

    @property
    def max_offdiag22(self) -> float:
        return float(self.offdiag22.max())

    def as_dict(self) -> dict:
        return {
            "classification": str(self.classification),
            "trials": self.trials,
            "tol": self.tol,
            "max_offdiag_r11": self.max_offdiag11,
            "max_offdiag_r22": self.max_offdiag22,
            "min_offdiag_r22": float(self.offdiag22.min()),
        }


def classify_design(design: ComplexLinearDesign, trials=500, tol=ZERO_TOL, seed=None) -> ClassificationReport:
    """Classify the ``R`` structure of ``design`` over random Rayleigh channels.

    ``ReducedASDC`` needs both ``R11`` and ``R22`` diagonal in every trial,
    ``ReducedWSDC`` only ``R11``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = _rng(seed)
    Nr = receive_antennas(design)
    off11 = np.empty(trials)
    off22 = np.empty(trials)
    for n in range(trials):
        blocks = _random_blocks(design, Nr, rng, tol)
        off11[n] = blocks.offdiag11
        off22[n] = blocks.offdiag22
    if off11.max() < tol and off22.max() < tol:
        cls = StructureClass.REDUCED_ASDC
    elif off11.max() < tol:
        cls = StructureClass.REDUCED_WSDC
    else:
        cls = StructureClass.UNSTRUCTURED
    return ClassificationReport(cls, trials, tol, off11, off22)


# -- exact conditions on the coefficient matrices -----------------------------


def _gram_products(cset):
    C = cset.C
    return np.einsum("iab,jac->ijbc", C, C)  # P[i, j] = C_i^T C_j


def check_hurwitz_radon(cset: CoefficientMatrixSet):
    """``(True, None)`` when ``C_i^T C_j + C_j^T C_i = 0`` for all ``i != j``.

    Otherwise ``(False, (i, j))`` with the first violating 1-based pair.
    """
    P = _gram_products(cset)
    n = len(cset)
    for i in range(n):
        for j in range(i + 1, n):
            if (P[i, j] + P[j, i]).any():
                return False, (i + 1, j + 1)
    return True, None


def _pair_ok(P, l, m, g1, g2):
    return np.array_equal(P[l, g1], P[m, g2]) and np.array_equal(P[m, g1], -P[l, g2])


def find_group_partition(cset: CoefficientMatrixSet, l: int, m: int, *, allow_vanishing=False,
                         _products=None):
    """Search a k-group partition for the ordered index pair ``(l, m)``.

    Returns a list of ordered 1-based pairs ``(G(1), G(2))`` such that
    ``C_l^T C_G(1) = C_m^T C_G(2)`` and ``C_m^T C_G(1) = -C_l^T C_G(2)``, or
    ``None`` when no partition exists.  Backtracking always fixes the
    smallest unused index first and tries partners (then orientations) in
    increasing order, so the first partition found is the lexicographically
    smallest one.

    With ``allow_vanishing`` an index ``j`` may also stand alone as a
    1-tuple ``(j,)`` when ``C_l^T C_j = 0`` or ``C_m^T C_j = 0``: its term in
    the ``(l, m)`` entry of the cross Gram product is then identically zero
    and needs no partner.  Designs that stack blocks on disjoint time slots
    (odd ``k``) need this.
    """
    n = len(cset)
    if l == m or not (1 <= l <= n and 1 <= m <= n):
        raise ValueError(f"need distinct indices in 1..{n}, got l={l}, m={m}")
    P = _gram_products(cset) if _products is None else _products
    li, mi = l - 1, m - 1
    vanishing = {j for j in range(n) if not P[li, j].any() or not P[mi, j].any()}

    def search(free):
        if not free:
            return []
        first, rest = free[0], free[1:]
        for idx, other in enumerate(rest):
            remaining = rest[:idx] + rest[idx + 1 :]
            for g1, g2 in ((first, other), (other, first)):
                if _pair_ok(P, li, mi, g1, g2):
                    tail = search(remaining)
                    if tail is not None:
                        return [(g1 + 1, g2 + 1)] + tail
        if allow_vanishing and first in vanishing:
            tail = search(rest)
            if tail is not None:
                return [(first + 1,)] + tail
        return None

    partition = search(tuple(range(n)))
    if partition is not None:
        # self-certify by direct substitution
        for group in partition:
            if len(group) == 2:
                assert _pair_ok(P, li, mi, group[0] - 1, group[1] - 1)
            else:
                assert group[0] - 1 in vanishing
        assert sorted(itertools.chain.from_iterable(partition)) == list(range(1, n + 1))
    return partition


def cross_gram_diagonal(cset: CoefficientMatrixSet):
    """Exact test that the user-1/user-2 cross Gram ``B`` has diagonal ``B^T B``.

    Entry ``(l, m)`` of ``B^T B`` is the quartic
    ``sum_j (h1^T C_j^T C_l h2)(h1^T C_j^T C_m h2)``; it is tested for being
    the zero polynomial through its symmetrized integer coefficient tensor.
    Returns ``(True, None)`` or ``(False, (l, m))``.
    """
    P = _gram_products(cset)
    n = len(cset)
    for l in range(n):
        for m in range(l + 1, n):
            T4 = np.einsum("jab,jcd->abcd", P[:, l], P[:, m])
            S = T4 + T4.transpose(2, 1, 0, 3) + T4.transpose(0, 3, 2, 1) + T4.transpose(2, 3, 0, 1)
            if S.any():
                return False, (l + 1, m + 1)
    return True, None


def _equal_norms(cset):
    P = _gram_products(cset)
    return all(np.array_equal(P[i, i], P[0, 0]) for i in range(len(cset)))


@dataclass
class Theorem2Report:
    """Outcome of the exact conditions.

    ``cond2`` uses pairings that may leave identically vanishing indices
    unpaired; ``cond2_strict`` insists on a partition into exactly ``k``
    pairs.  ``cross_gram_diagonal`` is the direct polynomial test of a
    diagonal ``R22`` (``None`` when ``cond1`` or equal column norms fail).
    """

    cond1: bool
    cond2: bool
    cond2_strict: bool
    hr_witness: tuple | None = None
    partition_failure: tuple | None = None
    partitions: dict = field(default_factory=dict, repr=False)
    cross_gram_diagonal: bool | None = None

    @property
    def exact_class(self) -> StructureClass:
        if not self.cond1:
            return StructureClass.UNSTRUCTURED
        if self.cond2:
            return StructureClass.REDUCED_ASDC
        return StructureClass.REDUCED_WSDC

    def as_dict(self) -> dict:
        return {
            "cond1": self.cond1,
            "cond2": self.cond2,
            "cond2_strict": self.cond2_strict,
            "hr_witness": list(self.hr_witness) if self.hr_witness else None,
            "partition_failure": list(self.partition_failure) if self.partition_failure else None,
            "cross_gram_diagonal": self.cross_gram_diagonal,
            "exact_class": str(self.exact_class),
        }


def verify_theorem2(cset: CoefficientMatrixSet) -> Theorem2Report:
    """Both conditions, in exact integer arithmetic.

    ``cond2`` holds when :func:`find_group_partition` (vanishing indices
    allowed) succeeds for every ordered pair ``l != m``.
    """
    cond1, witness = check_hurwitz_radon(cset)
    P = _gram_products(cset)
    n = len(cset)
    partitions = {}
    failure = None
    strict = True
    for l, m in itertools.permutations(range(1, n + 1), 2):
        if strict and find_group_partition(cset, l, m, _products=P) is None:
            strict = False
        part = find_group_partition(cset, l, m, allow_vanishing=True, _products=P)
        if part is None:
            failure = (l, m)
            break
        partitions[(l, m)] = part
    cond2 = failure is None
    direct = None
    if cond1 and _equal_norms(cset):
        direct, _ = cross_gram_diagonal(cset)
    return Theorem2Report(cond1, cond2, strict and cond2, witness, failure,
                          partitions if cond2 else {}, direct)


@dataclass
class Proposition1Report:
    trials: int
    tol: float
    hits: int
    min_abs12: float

    @property
    def fraction(self) -> float:
        return self.hits / self.trials

    @property
    def holds(self) -> bool:
        return self.fraction < 0.01

    def as_dict(self) -> dict:
        return {"trials": self.trials, "tol": self.tol, "zero_fraction": self.fraction,
                "min_abs_r12": self.min_abs12, "holds": self.holds}


def verify_proposition1(design: ComplexLinearDesign, trials=1000, tol=ZERO_TOL, seed=None,
                        channel=None) -> Proposition1Report:
    """Fraction of channel draws with any ``|R12|`` entry below ``tol * ||R||_F``.

    ``channel`` may be a callable ``rng -> ChannelRealization`` to replace
    the Rayleigh draw (e.g. for degenerate channels).
    """
    if channel is None and trials < 100:
        raise ValueError("need at least 100 trials")
    rng = _rng(seed)
    Nr = receive_antennas(design)
    hits = 0
    smallest = np.inf
    for _ in range(trials):
        if channel is None:
            blocks = _random_blocks(design, Nr, rng, tol)
        else:
            ch = channel(rng)
            if not isinstance(ch, ChannelRealization):
                raise TypeError("channel callable must return a ChannelRealization")
            _, R = qr_decompose(build_lattice_generator(design, ch).M)
            blocks = extract_blocks(R, design.k, tol)
        smallest = min(smallest, blocks.min_abs12)
        hits += blocks.min_abs12 < tol
    return Proposition1Report(trials, tol, hits, float(smallest))
