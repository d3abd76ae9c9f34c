"""Input checks shared by the estimators and module functions."""
from __future__ import annotations

import numbers

import numpy as np


def check_complex_matrix(a, name="array", shape=None):
    arr = np.asarray(a, dtype=complex)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name} must have shape {tuple(shape)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr.copy()


def check_complex_vector(v, name="vector", size=None):
    arr = np.asarray(v, dtype=complex).ravel()
    if size is not None and arr.shape[0] != size:
        raise ValueError(f"{name} must have {size} entries, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_real_vector(v, name="vector", size=None):
    arr = np.asarray(v, dtype=float).ravel()
    if size is not None and arr.shape[0] != size:
        raise ValueError(f"{name} must have {size} entries, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_upper_triangular(R, name="R", tol=0.0):
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError(f"{name} must be square, got shape {R.shape}")
    lower = np.tril(R, -1)
    if np.abs(lower).max(initial=0.0) > tol * max(np.linalg.norm(R), 1.0):
        raise ValueError(f"{name} is not upper triangular")
    return np.triu(R)


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_qam_order(M):
    M = check_positive_int(M, "QAM order", minimum=4)
    root = int(round(M ** 0.5))
    if root * root != M:
        raise ValueError(f"QAM order must be a perfect square, got {M}")
    return M


def snr_scale(rho, Nt):
    """Amplitude factor ``sqrt(rho / (2 Nt))`` for linear SNR ``rho``."""
    if not np.isfinite(rho) or rho < 0:
        raise ValueError(f"SNR must be finite and nonnegative, got {rho}")
    return float(np.sqrt(rho / (2.0 * Nt)))
