"""Real lattice generator of the two-user channel and its coefficient matrices.

Real stacking is ``vec(x) = [Re x; Im x]`` everywhere.  Channel variables
are ordered receive antenna outermost; inside antenna ``j`` come the real
parts of ``h_{1..Nt, j}`` followed by the imaginary parts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from macstbc._validation import check_complex_matrix, check_complex_vector
from macstbc.design_algebra import ComplexLinearDesign, DesignError

__all__ = [
    "ChannelRealization",
    "CoefficientMatrixSet",
    "RCReport",
    "RealLatticeGenerator",
    "build_lattice_generator",
    "build_user_matrix",
    "check_rc_monomial",
    "extract_coefficient_matrices",
    "real_stack",
    "receive_antennas",
    "stack_received",
]


def receive_antennas(design: ComplexLinearDesign) -> int:
    """Smallest ``Nr`` giving ``2 T Nr >= 4k``."""
    return math.ceil(2 * design.k / design.T)


def real_stack(x) -> np.ndarray:
    x = np.asarray(x)
    return np.concatenate([x.real, x.imag], axis=0)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Channels of both users, each ``Nt x Nr`` complex."""

    H1: np.ndarray
    H2: np.ndarray

    def __post_init__(self):
        H1 = check_complex_matrix(self.H1, "H1")
        H2 = check_complex_matrix(self.H2, "H2")
        if H1.shape != H2.shape:
            raise ValueError(f"H1 {H1.shape} and H2 {H2.shape} differ in shape")
        for H in (H1, H2):
            H.setflags(write=False)
        object.__setattr__(self, "H1", H1)
        object.__setattr__(self, "H2", H2)

    @property
    def Nt(self) -> int:
        return self.H1.shape[0]

    @property
    def Nr(self) -> int:
        return self.H1.shape[1]

    def scaled(self, alpha: float) -> "ChannelRealization":
        return ChannelRealization(alpha * self.H1, alpha * self.H2)

    def channel_vectors(self):
        """Real channel vectors ``(h1, h2)`` of length ``2 Nt Nr`` in the module ordering."""
        return _channel_vector(self.H1), _channel_vector(self.H2)


def _channel_vector(H):
    return np.concatenate([real_stack(H[:, j]) for j in range(H.shape[1])])


@dataclass(frozen=True, eq=False)
class RealLatticeGenerator:
    M: np.ndarray
    Nr: int
    k: int

    def __post_init__(self):
        M = np.array(self.M, dtype=float)
        M.setflags(write=False)
        object.__setattr__(self, "M", M)

    @property
    def user1(self) -> np.ndarray:
        return self.M[:, : 2 * self.k]

    @property
    def user2(self) -> np.ndarray:
        return self.M[:, 2 * self.k :]

    @property
    def shape(self):
        return self.M.shape

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.M, dtype=dtype)


def build_user_matrix(design: ComplexLinearDesign, h) -> np.ndarray:
    """``2T x 2k`` real matrix of one user seen at one receive antenna."""
    h = check_complex_vector(h, "h", size=design.Nt)
    T, k = design.T, design.k
    hA = (h @ design.A.reshape(design.Nt, -1)).reshape(T, k)
    hB = (h @ design.B.reshape(design.Nt, -1)).reshape(T, k)
    out = np.empty((2 * T, 2 * k))
    out[:T, :k] = hA.real + hB.real
    out[:T, k:] = hB.imag - hA.imag
    out[T:, :k] = hA.imag + hB.imag
    out[T:, k:] = hA.real - hB.real
    return out


def build_lattice_generator(design: ComplexLinearDesign, ch: ChannelRealization) -> RealLatticeGenerator:
    """Stack ``[H1~(j) H2~(j)]`` over receive antennas ``j`` into ``M``."""
    Nr = receive_antennas(design)
    if ch.Nt != design.Nt:
        raise ValueError(f"channel has {ch.Nt} transmit antennas, design has {design.Nt}")
    if ch.Nr != Nr:
        raise ValueError(f"design needs Nr={Nr} receive antennas, channel has {ch.Nr}")
    rows = [
        np.hstack([build_user_matrix(design, ch.H1[:, j]), build_user_matrix(design, ch.H2[:, j])])
        for j in range(Nr)
    ]
    return RealLatticeGenerator(np.vstack(rows), Nr=Nr, k=design.k)


def stack_received(Y) -> np.ndarray:
    """Real vector ``y`` from the ``T x Nr`` complex received matrix (antenna outermost)."""
    Y = np.asarray(Y)
    return np.concatenate([real_stack(Y[:, j]) for j in range(Y.shape[1])])


@dataclass(frozen=True, eq=False)
class CoefficientMatrixSet:
    """Integer matrices ``C_1 .. C_2k`` with ``M[:, i] = C_i h1`` and ``M[:, 2k+i] = C_i h2``."""

    C: np.ndarray
    Nt: int
    Nr: int

    def __post_init__(self):
        C = np.array(self.C, dtype=np.int64)
        if C.ndim != 3:
            raise ValueError("C must be a (2k, 2TNr, 2NtNr) stack")
        C.setflags(write=False)
        object.__setattr__(self, "C", C)

    def __len__(self):
        return self.C.shape[0]

    def __getitem__(self, i):
        return self.C[i]

    def __iter__(self):
        return iter(self.C)

    @property
    def k(self) -> int:
        return self.C.shape[0] // 2

    @property
    def is_zero(self) -> bool:
        return not self.C.any()

    def generator(self, ch: ChannelRealization) -> np.ndarray:
        """Rebuild ``M`` from the coefficient matrices."""
        h1, h2 = ch.channel_vectors()
        return np.hstack([(self.C @ h1).T, (self.C @ h2).T])


def extract_coefficient_matrices(design: ComplexLinearDesign, Nr: int | None = None) -> CoefficientMatrixSet:
    """Exact ``C_i`` by one-hot channel probes.

    Raises :class:`DesignError` naming the first entry that is not a
    single signed variable.
    """
    bad = design.monomial_violation()
    if bad is not None:
        t, i = bad
        raise DesignError(
            f"design entry (row {t + 1}, column {i + 1}) = {design.pattern()[t][i]} is not monomial")
    Nr = receive_antennas(design) if Nr is None else int(Nr)
    Nt, T, k = design.Nt, design.T, design.k
    n_vars = 2 * Nt * Nr
    C = np.zeros((2 * k, 2 * T * Nr, n_vars))
    for v in range(n_vars):
        j, rem = divmod(v, 2 * Nt)
        h = np.zeros(Nt, dtype=complex)
        h[rem % Nt] = 1 if rem < Nt else 1j
        block = build_user_matrix(design, h)
        C[:, 2 * T * j : 2 * T * (j + 1), v] = block.T
    Ci = np.rint(C)
    if not np.array_equal(Ci, C):
        raise DesignError("coefficient matrices are not integral")
    return CoefficientMatrixSet(Ci.astype(np.int64), Nt=Nt, Nr=Nr)


@dataclass
class RCReport:
    row_monomial: bool
    column_monomial: bool
    entries_unit: bool
    p1: bool
    p2: bool
    p3: bool
    violations: list = field(default_factory=list)

    @property
    def rc_monomial(self) -> bool:
        return self.row_monomial and self.column_monomial

    def as_dict(self) -> dict:
        return {
            "row_monomial": self.row_monomial,
            "column_monomial": self.column_monomial,
            "p1": self.p1,
            "p2": self.p2,
            "p3": self.p3,
            "rc_monomial": self.rc_monomial,
            "violations": [list(v) for v in self.violations],
        }


def check_rc_monomial(cset: CoefficientMatrixSet) -> RCReport:
    """Scan every ``C_i`` for row/column monomiality and properties (p.1)-(p.3).

    Violations are ``(matrix, "row" | "column", index)`` triples, 1-based.
    With the same ``C_i`` serving both users, (p.1) and (p.2) coincide: every
    generator entry must be a single signed channel variable.
    """
    C = cset.C
    nz = C != 0
    violations = []
    row_ok = col_ok = p3 = True
    for i in range(C.shape[0]):
        per_row = nz[i].sum(axis=1)
        per_col = nz[i].sum(axis=0)
        for r in np.flatnonzero(per_row > 1):
            violations.append((i + 1, "row", int(r) + 1))
            row_ok = False
        for c in np.flatnonzero(per_col > 1):
            violations.append((i + 1, "column", int(c) + 1))
            col_ok = False
        if not np.all(per_col == 1):
            p3 = False
    unit = bool(np.all(np.abs(C) <= 1))
    p12 = unit and row_ok
    return RCReport(row_ok, col_ok, unit, p12, p12, p3, violations)
