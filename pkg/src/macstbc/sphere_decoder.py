"""Joint ML detection of both users' PAM coordinates.

Three exact decoders share one contract (same ``z_hat`` up to measure-zero
floating-point ties, which resolve to the lexicographically smallest
``z``):

* :func:`ml_bruteforce` scans every PAM vector of the full lattice.
* :func:`sphere_decode_generic` runs depth-first Schnorr-Euchner
  enumeration on the full upper-triangular ``R``.
* :func:`decode_conditional` enumerates only user-2 candidates and
  recovers user 1 by per-coordinate quantization, which is possible once
  ``R11`` is diagonal.

Counters (:class:`DecodeStats`), one unit each:

``quantizer_calls``  one :func:`pam_quantize` call
``sort_calls``       one ordering of a list of PAM levels
``sort_comparisons`` one pairwise comparison inside such an ordering
``metric_evals``     adding one coordinate's squared residual to a partial
                     metric (brute force: ``n`` per full candidate)
``nodes_visited``    one tentative coordinate assignment in a search tree
``candidates``       one complete candidate reaching the final metric
"""
from __future__ import annotations

import functools
import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from macstbc._validation import (
    check_qam_order,
    check_real_vector,
    check_upper_triangular,
    snr_scale,
)
from macstbc.design_algebra import ComplexLinearDesign, named_design
from macstbc.lattice import (
    ChannelRealization,
    build_lattice_generator,
    stack_received,
)
from macstbc.qr_structure import (
    RBlockStructure,
    RankDeficiencyError,
    StructureClass,
    ZERO_TOL,
    extract_blocks,
    qr_decompose,
)

__all__ = [
    "BRUTEFORCE_LIMIT",
    "DecodeResult",
    "DecodeStats",
    "DecoderRefusal",
    "JointMLDecoder",
    "PamConstellation",
    "decode_conditional",
    "ml_bruteforce",
    "pam_quantize",
    "sphere_decode_generic",
]

BRUTEFORCE_LIMIT = 2 ** 24


class DecoderRefusal(ValueError):
    """The conditional decoder needs a diagonal ``R11``."""


@dataclass(frozen=True)
class PamConstellation:
    """Real ``sqrt(M)``-PAM factor of a unit-energy square ``M``-QAM."""

    M: int

    def __post_init__(self):
        check_qam_order(self.M)

    @property
    def side(self) -> int:
        return math.isqrt(self.M)

    @property
    def scale(self) -> float:
        return math.sqrt(3.0 / (2.0 * (self.M - 1)))

    @property
    def levels(self) -> np.ndarray:
        s = self.side
        return self.scale * np.arange(-(s - 1), s, 2, dtype=float)

    def index_of(self, values) -> np.ndarray:
        """Level indices of exact constellation values (inverse of ``levels[idx]``)."""
        idx = np.rint((np.asarray(values) / self.scale + self.side - 1) / 2).astype(int)
        return np.clip(idx, 0, self.side - 1)

    def to_qam(self, z) -> np.ndarray:
        """Complex symbols from a real ``[Re; Im]`` stacked vector."""
        z = np.asarray(z, dtype=float)
        h = z.shape[-1] // 2
        return z[..., :h] + 1j * z[..., h:]


def pam_quantize(v: float, c: PamConstellation) -> float:
    """Nearest PAM level; out-of-range values clip, midpoints go to the larger level."""
    s = c.side
    u = (v / c.scale + (s - 1)) / 2.0
    i = min(max(math.floor(u + 0.5), 0), s - 1)
    return c.scale * (2 * i - (s - 1))


@dataclass
class DecodeStats:
    quantizer_calls: int = 0
    sort_calls: int = 0
    sort_comparisons: int = 0
    metric_evals: int = 0
    nodes_visited: int = 0
    candidates: int = 0

    def as_dict(self) -> dict:
        return asdict(self)

    def __add__(self, other: "DecodeStats") -> "DecodeStats":
        return DecodeStats(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))


@dataclass
class DecodeResult:
    z_hat: np.ndarray
    metric: float
    stats: DecodeStats


def _ordered(levels, cost, stats):
    """Sort ``levels`` by ``cost`` (ties by level), counting comparisons."""
    def cmp(a, b):
        stats.sort_comparisons += 1
        ka, kb = (cost(a), a), (cost(b), b)
        return (ka > kb) - (ka < kb)

    stats.sort_calls += 1
    return sorted(levels, key=functools.cmp_to_key(cmp))


def _better(metric, z, best_metric, best_z):
    return metric < best_metric or (metric == best_metric and tuple(z) < tuple(best_z))


# -- brute force ---------------------------------------------------------------


def ml_bruteforce(M_gen, y, c: PamConstellation, rho: float, Nt: int, chunk=1 << 16) -> DecodeResult:
    """Exhaustive ML over every PAM vector, scanned in lexicographic order."""
    M_gen = np.asarray(M_gen, dtype=float)
    n = M_gen.shape[1]
    y = check_real_vector(y, "y", size=M_gen.shape[0])
    total = c.side ** n
    if total > BRUTEFORCE_LIMIT:
        raise ValueError(f"brute force would enumerate {total} > {BRUTEFORCE_LIMIT} points")
    s = snr_scale(rho, Nt)
    levels = c.levels
    stats = DecodeStats()
    G = s * M_gen
    best_metric, best_idx = math.inf, -1
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        digits = np.stack(np.unravel_index(idx, (c.side,) * n), axis=1)
        residual = y[:, None] - G @ levels[digits].T
        metrics = np.einsum("ij,ij->j", residual, residual)
        pos = int(np.argmin(metrics))
        if metrics[pos] < best_metric:
            best_metric, best_idx = float(metrics[pos]), int(idx[pos])
        stats.metric_evals += idx.size * n
        stats.candidates += idx.size
    z = levels[np.array(np.unravel_index(best_idx, (c.side,) * n))]
    return DecodeResult(z, best_metric, stats)


# -- generic sphere decoder ------------------------------------------------------


def sphere_decode_generic(R_full, y_tilde, c: PamConstellation, rho: float, Nt: int) -> DecodeResult:
    """Depth-first Schnorr-Euchner search on the full triangular system.

    The radius starts infinite; the first leaf sets it.  Levels at each
    node are visited in order of increasing partial metric, so a level whose
    partial metric exceeds the current best ends that node.
    """
    R = check_upper_triangular(R_full, "R_full", tol=1e-12)
    n = R.shape[0]
    y = check_real_vector(y_tilde, "y_tilde", size=n)
    scale = max(np.linalg.norm(R), np.finfo(float).tiny)
    small = np.flatnonzero(np.abs(np.diag(R)) <= 1e-10 * scale)
    if small.size:
        raise RankDeficiencyError(int(small[0]))
    s = snr_scale(rho, Nt)
    G = (s * R).tolist()
    yl = y.tolist()
    levels = c.levels.tolist()
    stats = DecodeStats()
    z = [0.0] * n
    best = {"metric": math.inf, "z": None}

    def descend(i, partial):
        row = G[i]
        r = yl[i] - sum(row[j] * z[j] for j in range(i + 1, n))
        g = row[i]
        ordered = _ordered(levels, lambda a: (r - g * a) ** 2, stats)
        for a in ordered:
            stats.nodes_visited += 1
            stats.metric_evals += 1
            m = partial + (r - g * a) ** 2
            if m > best["metric"]:
                break
            z[i] = a
            if i == 0:
                stats.candidates += 1
                if best["z"] is None or _better(m, z, best["metric"], best["z"]):
                    best["metric"], best["z"] = m, list(z)
            else:
                descend(i - 1, m)
        z[i] = 0.0

    descend(n - 1, 0.0)
    return DecodeResult(np.array(best["z"]), best["metric"], stats)


# -- conditional decoder -----------------------------------------------------------


def decode_conditional(blocks: RBlockStructure, y_tilde, c: PamConstellation, rho: float, Nt: int) -> DecodeResult:
    """Enumerate user-2 candidates ``a``; decode user 1 by quantization given ``a``.

    With ``R22`` diagonal (reduced ASDC) each user-2 coordinate is ordered
    once by its own cost, i.e. ``2k`` sorts of ``sqrt(M)`` levels, and the
    candidates come from a depth-first walk over those fixed orders.  With
    only ``R11`` diagonal (reduced WSDC) the user-2 candidates come from a
    Schnorr-Euchner walk over ``R22``, ordering levels afresh at every node.
    Both walks prune a branch once its user-2 partial metric exceeds the
    best total metric found so far.
    """
    if blocks.classification == StructureClass.UNSTRUCTURED:
        raise DecoderRefusal("R11 is not diagonal; use sphere_decode_generic instead")
    h = blocks.R11.shape[0]
    y = check_real_vector(y_tilde, "y_tilde", size=2 * h)
    s = snr_scale(rho, Nt)
    d11 = (s * np.diag(blocks.R11)).tolist()
    if min(d11) <= 0:
        raise RankDeficiencyError(int(np.argmin(d11)))
    G12 = (s * blocks.R12).tolist()
    G22 = (s * blocks.R22).tolist()
    y1, y2 = y[:h].tolist(), y[h:].tolist()
    levels = c.levels.tolist()
    stats = DecodeStats()
    a = [0.0] * h
    best = {"metric": math.inf, "z": None}

    def leaf(metric2):
        stats.candidates += 1
        metric = metric2
        x1 = [0.0] * h
        for i in range(h):
            r = y1[i] - sum(G12[i][j] * a[j] for j in range(h))
            x1[i] = pam_quantize(r / d11[i], c)
            stats.quantizer_calls += 1
            stats.metric_evals += 1
            metric += (r - d11[i] * x1[i]) ** 2
        z = x1 + a
        if best["z"] is None or _better(metric, z, best["metric"], best["z"]):
            best["metric"], best["z"] = metric, z

    if blocks.classification == StructureClass.REDUCED_ASDC:
        g = [G22[i][i] for i in range(h)]
        orders = [_ordered(levels, lambda v, i=i: (y2[i] - g[i] * v) ** 2, stats) for i in range(h)]

        def walk(i, partial):
            for v in orders[i]:
                stats.nodes_visited += 1
                stats.metric_evals += 1
                m = partial + (y2[i] - g[i] * v) ** 2
                if m > best["metric"]:
                    break
                a[i] = v
                if i == h - 1:
                    leaf(m)
                else:
                    walk(i + 1, m)

        walk(0, 0.0)
    else:
        def walk(i, partial):
            row = G22[i]
            r = y2[i] - sum(row[j] * a[j] for j in range(i + 1, h))
            g = row[i]
            for v in _ordered(levels, lambda v: (r - g * v) ** 2, stats):
                stats.nodes_visited += 1
                stats.metric_evals += 1
                m = partial + (r - g * v) ** 2
                if m > best["metric"]:
                    break
                a[i] = v
                if i == 0:
                    leaf(m)
                else:
                    walk(i - 1, m)
            a[i] = 0.0

        walk(h - 1, 0.0)
    return DecodeResult(np.array(best["z"]), best["metric"], stats)


# -- estimator ------------------------------------------------------------------------


class JointMLDecoder(BaseEstimator):
    """Joint ML detector for both users of a fixed design.

    ``fit`` takes a :class:`~macstbc.lattice.ChannelRealization` (or an
    ``(H1, H2)`` pair) and factors the lattice generator; ``predict`` maps
    received ``T x Nr`` matrices to stacked PAM vectors ``z_hat``.

    Parameters
    ----------
    design : str or ComplexLinearDesign
        A design object or a built-in name (see ``named_design``).
    qam : int
        Square QAM size used by both users.
    snr_db : float
        Average receive SNR in dB.
    method : {"conditional", "generic", "bruteforce"}
    tol : float
        Relative zero tolerance for classifying ``R``.
    nt, k : int, optional
        Antenna and variable counts when ``design`` is a name.
    """

    def __init__(self, design="alamouti", qam=4, snr_db=10.0, method="conditional", tol=ZERO_TOL,
                 nt=None, k=None):
        self.design = design
        self.qam = qam
        self.snr_db = snr_db
        self.method = method
        self.tol = tol
        self.nt = nt
        self.k = k

    def _resolve_design(self):
        if isinstance(self.design, ComplexLinearDesign):
            return self.design
        return named_design(str(self.design), self.nt, self.k)

    def fit(self, X, y=None):
        if self.method not in ("conditional", "generic", "bruteforce"):
            raise ValueError(f"unknown method {self.method!r}")
        design = self._resolve_design()
        ch = X if isinstance(X, ChannelRealization) else ChannelRealization(*X)
        self.design_ = design
        self.constellation_ = PamConstellation(self.qam)
        self.rho_ = 10.0 ** (self.snr_db / 10.0)
        self.lattice_ = build_lattice_generator(design, ch)
        self.Q_, R = qr_decompose(self.lattice_.M)
        self.blocks_ = extract_blocks(R, design.k, self.tol)
        if self.method == "conditional" and self.blocks_.classification == StructureClass.UNSTRUCTURED:
            raise DecoderRefusal(f"{design!r} gives an unstructured R; conditional decoding is impossible")
        return self

    def _received(self, Y):
        Y = np.asarray(Y)
        d = self.design_
        if Y.ndim == 1:
            y = check_real_vector(Y, "y", size=2 * d.T * self.lattice_.Nr)
        elif Y.shape == (d.T, self.lattice_.Nr):
            y = stack_received(Y)
        else:
            raise ValueError(f"received matrix must be {d.T}x{self.lattice_.Nr}, got {Y.shape}")
        return y

    def decode(self, Y) -> DecodeResult:
        """Decode one received matrix (or stacked real vector ``y``)."""
        check_is_fitted(self, "blocks_")
        y = self._received(Y)
        Nt = self.design_.Nt
        c = self.constellation_
        if self.method == "bruteforce":
            return ml_bruteforce(self.lattice_.M, y, c, self.rho_, Nt)
        y_tilde = self.Q_.T @ y
        if self.method == "generic":
            return sphere_decode_generic(self.blocks_.R, y_tilde, c, self.rho_, Nt)
        return decode_conditional(self.blocks_, y_tilde, c, self.rho_, Nt)

    def predict(self, X):
        """``z_hat`` for one received matrix, or a stack of them along axis 0."""
        X = np.asarray(X)
        d = self.design_
        single = X.ndim == 1 or (X.ndim == 2 and X.shape == (d.T, self.lattice_.Nr))
        if single:
            return self.decode(X).z_hat
        return np.stack([self.decode(Y).z_hat for Y in X])

    def predict_symbols(self, X):
        """Complex QAM estimates ``(x1_hat, x2_hat)``."""
        z = self.predict(X)
        k = self.design_.k
        c = self.constellation_
        return c.to_qam(z[..., : 2 * k]), c.to_qam(z[..., 2 * k :])
