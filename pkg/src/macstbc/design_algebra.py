"""Linear complex designs for the two-user MAC codes.

A design in ``k`` complex variables is stored as a coefficient tensor
``F`` of shape ``(T, Nt, 2k)`` over the extended variable vector
``w = [x_1 .. x_k, x_1^* .. x_k^*]``::

    X[t, i] = sum_v F[t, i, v] * w[v]

so the column representation matrices are ``A_i = F[:, i, :k]`` and
``B_i = F[:, i, k:]``.  Variables are 1-based in every user-facing
function (``x_1 .. x_k``) and 0-based in array indices.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

__all__ = [
    "ComplexLinearDesign",
    "DesignError",
    "build_design",
    "build_square_cod",
    "design_case",
    "evaluate",
    "from_pattern",
    "is_square_cod",
    "make_alamouti_block",
    "named_design",
    "rate",
    "spatial_multiplexing",
    "NAMED_DESIGNS",
]

_UNITS = (1, -1, 1j, -1j)


class DesignError(ValueError):
    """Invalid design parameters or a design lacking a required property."""


@dataclass(frozen=True, eq=False)
class ComplexLinearDesign:
    """Immutable ``T x Nt`` linear design in ``k`` complex variables."""

    coeffs: np.ndarray
    name: str = ""
    _monomial: bool = field(init=False, repr=False)

    def __post_init__(self):
        F = np.array(self.coeffs, dtype=complex)
        if F.ndim != 3 or F.shape[2] % 2 or min(F.shape) == 0:
            raise DesignError(f"coefficient tensor must be (T, Nt, 2k), got {F.shape}")
        F.setflags(write=False)
        object.__setattr__(self, "coeffs", F)
        object.__setattr__(self, "_monomial", _entry_monomial(F) is None)

    @classmethod
    def from_representation(cls, A, B, name=""):
        """Build from column representation matrices ``A_i, B_i`` (each ``T x k``)."""
        A = np.asarray(A, dtype=complex)
        B = np.asarray(B, dtype=complex)
        if A.shape != B.shape or A.ndim != 3:
            raise DesignError("A and B must both have shape (Nt, T, k)")
        F = np.concatenate([A, B], axis=2).transpose(1, 0, 2)
        return cls(F, name=name)

    @property
    def T(self) -> int:
        return self.coeffs.shape[0]

    @property
    def Nt(self) -> int:
        return self.coeffs.shape[1]

    @property
    def k(self) -> int:
        return self.coeffs.shape[2] // 2

    @property
    def A(self) -> np.ndarray:
        """``(Nt, T, k)`` stack of the matrices multiplying ``x``."""
        return self.coeffs[:, :, : self.k].transpose(1, 0, 2)

    @property
    def B(self) -> np.ndarray:
        """``(Nt, T, k)`` stack of the matrices multiplying ``x^*``."""
        return self.coeffs[:, :, self.k :].transpose(1, 0, 2)

    @property
    def is_monomial(self) -> bool:
        """Each entry is 0 or a unit multiple of a single ``x_j`` or ``x_j^*``."""
        return self._monomial

    @property
    def rate(self) -> Fraction:
        return Fraction(self.k, self.T)

    def monomial_violation(self):
        """``(t, i)`` of the first non-monomial entry (0-based), or ``None``."""
        return _entry_monomial(self.coeffs)

    def conj_transpose(self) -> "ComplexLinearDesign":
        """Design of ``X^H`` (an ``Nt x T`` design in the same variables)."""
        k = self.k
        F = self.coeffs.transpose(1, 0, 2)
        swapped = np.concatenate([F[:, :, k:], F[:, :, :k]], axis=2)
        return ComplexLinearDesign(np.conj(swapped))

    def drop_last_column(self) -> "ComplexLinearDesign":
        if self.Nt < 2:
            raise DesignError("cannot drop the only column")
        return ComplexLinearDesign(self.coeffs[:, :-1, :], name=self.name)

    def __repr__(self):
        label = f"{self.name!r}, " if self.name else ""
        return f"ComplexLinearDesign({label}T={self.T}, Nt={self.Nt}, k={self.k})"

    def pattern(self) -> list[list[str]]:
        """Human-readable entries such as ``'-x2*'``; inverse of :func:`from_pattern`."""
        return [[_entry_str(self.coeffs[t, i], self.k) for i in range(self.Nt)]
                for t in range(self.T)]

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "T": self.T,
            "Nt": self.Nt,
            "k": self.k,
            "A": _complex_to_json(self.A),
            "B": _complex_to_json(self.B),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc: dict) -> "ComplexLinearDesign":
        try:
            T, Nt, k = int(doc["T"]), int(doc["Nt"]), int(doc["k"])
            A = _complex_from_json(doc["A"])
            B = _complex_from_json(doc["B"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DesignError(f"malformed design document: {exc}") from exc
        if A.shape != (Nt, T, k) or B.shape != (Nt, T, k):
            raise DesignError(
                f"A/B shapes {A.shape}, {B.shape} disagree with (Nt, T, k)=({Nt}, {T}, {k})")
        return cls.from_representation(A, B, name=doc.get("name", ""))

    @classmethod
    def from_json(cls, text: str) -> "ComplexLinearDesign":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class CodewordMatrix:
    entries: np.ndarray

    def __post_init__(self):
        E = np.array(self.entries, dtype=complex)
        E.setflags(write=False)
        object.__setattr__(self, "entries", E)

    @property
    def shape(self):
        return self.entries.shape

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def _entry_monomial(F):
    for t in range(F.shape[0]):
        for i in range(F.shape[1]):
            nz = np.flatnonzero(F[t, i])
            if len(nz) > 1 or (len(nz) == 1 and not any(F[t, i, nz[0]] == u for u in _UNITS)):
                return (t, i)
    return None


def _entry_str(row, k):
    terms = []
    for v in np.flatnonzero(row):
        c = row[v]
        var = f"x{v % k + 1}" + ("*" if v >= k else "")
        if c == 1:
            terms.append(var)
        elif c == -1:
            terms.append("-" + var)
        elif c == 1j:
            terms.append("j" + var)
        elif c == -1j:
            terms.append("-j" + var)
        else:
            terms.append(f"({c:g}){var}")
    if not terms:
        return "0"
    return "+".join(terms).replace("+-", "-")


def _complex_to_json(arr):
    def conv(z):
        return [_num(z.real), _num(z.imag)]

    return [[[conv(z) for z in row] for row in mat] for mat in arr]


def _num(v):
    v = float(v)
    return int(v) if v.is_integer() else v


def _complex_from_json(data):
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 4 or arr.shape[-1] != 2:
        raise ValueError("expected nested [Nt][T][k][re, im] lists")
    return arr[..., 0] + 1j * arr[..., 1]


_TOKEN = re.compile(r"^\s*([+-]?)\s*(j?)\s*x(\d+)\s*(\*?)\s*$")


def from_pattern(rows, k=None, name="") -> ComplexLinearDesign:
    """Parse a monomial design written as strings, e.g. ``[["x1", "-x2*"], ["x2", "x1*"]]``.

    Entries are ``0`` or ``[+-][j]x<n>[*]``.  ``k`` defaults to the largest
    variable index seen.
    """
    parsed = []
    top = 0
    for row in rows:
        prow = []
        for entry in row:
            entry = str(entry).strip()
            if entry in ("0", ""):
                prow.append(None)
                continue
            m = _TOKEN.match(entry)
            if not m:
                raise DesignError(f"cannot parse design entry {entry!r}")
            sign, jflag, idx, star = m.groups()
            idx = int(idx)
            if idx < 1:
                raise DesignError("variables are numbered from x1")
            coef = (-1 if sign == "-" else 1) * (1j if jflag else 1)
            prow.append((idx, bool(star), coef))
            top = max(top, idx)
        parsed.append(prow)
    if len({len(r) for r in parsed}) != 1:
        raise DesignError("ragged design pattern")
    k = top if k is None else k
    if top > k:
        raise DesignError(f"pattern uses x{top} but k={k}")
    F = np.zeros((len(parsed), len(parsed[0]), 2 * k), dtype=complex)
    for t, prow in enumerate(parsed):
        for i, item in enumerate(prow):
            if item is not None:
                idx, star, coef = item
                F[t, i, idx - 1 + (k if star else 0)] = coef
    return ComplexLinearDesign(F, name=name)


# -- constructions -------------------------------------------------------


def _alamouti_coeffs(m, k):
    """Coefficients of the 2x2 Alamouti block on ``x_{2m+1}, x_{2m+2}`` inside a k-variable design."""
    p, q = 2 * m, 2 * m + 1
    F = np.zeros((2, 2, 2 * k), dtype=complex)
    F[0, 0, p] = 1          # x_{2m+1}
    F[0, 1, k + q] = -1     # -x_{2m+2}^*
    F[1, 0, q] = 1          # x_{2m+2}
    F[1, 1, k + p] = 1      # x_{2m+1}^*
    return F


def make_alamouti_block(m: int) -> ComplexLinearDesign:
    """Alamouti block ``[[x_{2m+1}, -x_{2m+2}^*], [x_{2m+2}, x_{2m+1}^*]]``.

    The returned design carries all ``2m + 2`` variables so that blocks for
    different ``m`` can be stacked; only the last two are active.
    """
    if int(m) != m or m < 0:
        raise DesignError(f"block index must be a nonnegative integer, got {m}")
    m = int(m)
    return ComplexLinearDesign(_alamouti_coeffs(m, 2 * m + 2), name=f"alamouti[{m}]")


def _kron_identity(F, a):
    T, Nt, V = F.shape
    out = np.einsum("tiv,sr->tsirv", F, np.eye(a))
    return out.reshape(T * a, Nt * a, V)


def _case1_coeffs(nt, n_pairs, k):
    a = nt // 2
    blocks = [_kron_identity(_alamouti_coeffs(m, k), a) for m in range(n_pairs)]
    return np.concatenate(blocks, axis=0)


def design_case(Nt: int, k: int) -> int:
    """Which of the four constructions handles ``(Nt, k)``: 1..4."""
    return 1 + (k % 2) + 2 * (Nt % 2)


def build_design(Nt: int, k: int) -> ComplexLinearDesign:
    """Reduced-ASDC design for ``Nt`` antennas in ``k`` complex variables.

    Even ``Nt = 2a``: ``b = k // 2`` stacked blocks ``Omega_m (x) I_a``, plus
    ``x_k I_Nt`` below when ``k`` is odd.  Odd ``Nt``: the design for
    ``Nt + 1`` antennas with its last column removed.
    """
    if int(Nt) != Nt or int(k) != k:
        raise DesignError("Nt and k must be integers")
    Nt, k = int(Nt), int(k)
    if Nt < 2 or k < 2:
        raise DesignError(f"need Nt >= 2 and k >= 2, got Nt={Nt}, k={k}")
    case = design_case(Nt, k)
    name = f"case{case}(Nt={Nt},k={k})"
    if Nt % 2:
        even = build_design(Nt + 1, k)
        return ComplexLinearDesign(even.coeffs[:, :-1, :], name=name)
    F = _case1_coeffs(Nt, k // 2, k)
    if k % 2:
        tail = np.zeros((Nt, Nt, 2 * k), dtype=complex)
        tail[np.arange(Nt), np.arange(Nt), k - 1] = 1
        F = np.concatenate([F, tail], axis=0)
    return ComplexLinearDesign(F, name=name)


def build_square_cod(a: int) -> ComplexLinearDesign:
    """Square complex orthogonal design for ``2**a`` antennas in ``a + 1`` variables.

    Doubling recursion ``G <- [[G, -x^* I], [x I, G^H]]`` started from ``[x_1]``;
    one step gives the Alamouti design.
    """
    if int(a) != a or a < 1:
        raise DesignError(f"COD exponent must be a positive integer, got {a}")
    a = int(a)
    k = a + 1
    G = np.zeros((1, 1, 2 * k), dtype=complex)
    G[0, 0, 0] = 1
    for step in range(1, a + 1):
        n = G.shape[0]
        Gh = ComplexLinearDesign(G).conj_transpose().coeffs
        eye = np.eye(n)
        new_var = np.zeros(2 * k)
        new_var[step] = 1
        new_conj = np.zeros(2 * k)
        new_conj[k + step] = 1
        top = np.concatenate([G, -np.einsum("ts,v->tsv", eye, new_conj)], axis=1)
        bottom = np.concatenate([np.einsum("ts,v->tsv", eye, new_var), Gh], axis=1)
        G = np.concatenate([top, bottom], axis=0)
    return ComplexLinearDesign(G, name=f"cod(Nt={2 ** a})")


def spatial_multiplexing(Nt: int = 2, T: int | None = None) -> ComplexLinearDesign:
    """Uncoded design: every entry its own variable, numbered down the columns."""
    T = Nt if T is None else T
    k = T * Nt
    F = np.zeros((T, Nt, 2 * k), dtype=complex)
    for i in range(Nt):
        for t in range(T):
            F[t, i, i * T + t] = 1
    return ComplexLinearDesign(F, name=f"spatial(Nt={Nt},T={T})")


def evaluate(design: ComplexLinearDesign, x) -> CodewordMatrix:
    """Codeword matrix obtained by substituting the complex vector ``x``."""
    x = np.asarray(x, dtype=complex).ravel()
    if x.shape[0] != design.k:
        raise DesignError(f"expected {design.k} variables, got {x.shape[0]}")
    w = np.concatenate([x, np.conj(x)])
    return CodewordMatrix(design.coeffs @ w)


def rate(design: ComplexLinearDesign) -> Fraction:
    return design.rate


# -- exact orthogonality check ---------------------------------------------


def _gaussian_int(arr):
    re_, im_ = np.rint(arr.real), np.rint(arr.imag)
    if not (np.array_equal(re_, arr.real) and np.array_equal(im_, arr.imag)):
        raise DesignError("exact check needs Gaussian-integer coefficients")
    return re_.astype(np.int64), im_.astype(np.int64)


def is_square_cod(design: ComplexLinearDesign) -> bool:
    """Exact test of ``X^H X = (|x_1|^2 + ... + |x_k|^2) I``.

    Each entry of ``X^H X`` is a quadratic form in ``w = [x; x^*]``; its
    symmetrized integer coefficient matrix is compared with that of
    ``sum_j x_j x_j^*``.
    """
    if design.T != design.Nt:
        return False
    k = design.k
    Fr, Fi = _gaussian_int(design.coeffs)
    swap = np.r_[k : 2 * k, 0:k]
    # conj(X[t,p]) = sum_u conj(F[t,p,swap[u]]) w_u
    Cr, Ci = Fr[:, :, swap], -Fi[:, :, swap]
    # K[p,q,u,v] = sum_t Cbar[t,p,u] F[t,q,v]
    Kr = np.einsum("tpu,tqv->pquv", Cr, Fr) - np.einsum("tpu,tqv->pquv", Ci, Fi)
    Ki = np.einsum("tpu,tqv->pquv", Cr, Fi) + np.einsum("tpu,tqv->pquv", Ci, Fr)
    Sr = Kr + Kr.transpose(0, 1, 3, 2)
    Si = Ki + Ki.transpose(0, 1, 3, 2)
    target = np.zeros((2 * k, 2 * k), dtype=np.int64)
    target[np.arange(k), k + np.arange(k)] = 1
    target[k + np.arange(k), np.arange(k)] = 1
    n = design.Nt
    expected = np.einsum("pq,uv->pquv", np.eye(n, dtype=np.int64), target)
    return bool(np.array_equal(Sr, expected) and not Si.any())


# -- named built-ins ---------------------------------------------------------

NAMED_DESIGNS = ("alamouti", "case1", "case2", "case3", "case4", "cod", "spatial")


def named_design(name: str, nt: int | None = None, k: int | None = None) -> ComplexLinearDesign:
    """Resolve one of :data:`NAMED_DESIGNS` with optional antenna/variable counts."""
    name = name.lower()
    if name == "alamouti":
        if nt not in (None, 2) or k not in (None, 2):
            raise DesignError("alamouti is fixed at Nt=2, k=2")
        d = build_design(2, 2)
        return ComplexLinearDesign(d.coeffs, name="alamouti")
    if name.startswith("case") and name in NAMED_DESIGNS:
        want = int(name[-1])
        defaults = {1: (2, 2), 2: (2, 3), 3: (3, 2), 4: (3, 3)}[want]
        nt = defaults[0] if nt is None else nt
        k = defaults[1] if k is None else k
        got = design_case(nt, k)
        if got != want:
            raise DesignError(f"(Nt={nt}, k={k}) belongs to case{got}, not {name}")
        return build_design(nt, k)
    if name == "cod":
        nt = 4 if nt is None else nt
        a = int(round(math.log2(nt))) if nt > 0 else 0
        if nt < 2 or 2 ** a != nt:
            raise DesignError(f"square COD needs Nt a power of two >= 2, got {nt}")
        if k not in (None, a + 1):
            raise DesignError(f"square COD for Nt={nt} has k={a + 1}")
        return build_square_cod(a)
    if name == "spatial":
        nt = 2 if nt is None else nt
        d = spatial_multiplexing(nt)
        if k not in (None, d.k):
            raise DesignError(f"spatial multiplexing for Nt={nt} has k={d.k}")
        return d
    raise DesignError(f"unknown design {name!r}; choose from {', '.join(NAMED_DESIGNS)}")
