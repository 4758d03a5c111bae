"""Vandermonde matrices, their Lagrange-form inverse and matrix exponentials."""

import numpy as np

from . import _kernels as kn
from .errors import DegeneracyError, NumericFailure


def _roots_of(frame_or_roots):
    k = getattr(frame_or_roots, "roots", frame_or_roots)
    return np.ascontiguousarray(k, dtype=complex)


def vandermonde(fr):
    """(D, C) with D[i, j] = k_j^i and C[i, j] = i k_j^(i-1), 0-based rows."""
    return kn.vandermonde(_roots_of(fr))


def vandermonde_inverse(fr):
    """Gamma = D^-1; row i holds the monomial coefficients of the i-th Lagrange polynomial."""
    k = _roots_of(fr)
    gap, ia, ib = kn.min_gap(k)
    if not gap > 0:
        raise DegeneracyError(getattr(fr, "x", None), (int(ia), int(ib)), float(gap))
    return kn.vandermonde_inverse(k)


def _check_finite(E):
    if not np.all(np.isfinite(E)):
        raise NumericFailure("matrix exponential overflowed")
    return E


def mat_exp(M):
    M = np.ascontiguousarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("mat_exp needs a square matrix")
    if not np.all(np.isfinite(M)):
        raise NumericFailure("matrix exponential of a non-finite matrix")
    with np.errstate(all="ignore"):
        return _check_finite(kn.mat_exp(M))


def mat_exp_2x2(M):
    M = np.ascontiguousarray(M, dtype=complex)
    if M.shape != (2, 2):
        raise ValueError("mat_exp_2x2 needs a 2x2 matrix")
    return kn.mat_exp_2x2(M)


def series_exp(M, terms=40):
    """Plain truncated Taylor series; only trustworthy for small ||M||."""
    M = np.asarray(M, dtype=complex)
    E = np.eye(M.shape[0], dtype=complex)
    term = np.eye(M.shape[0], dtype=complex)
    for q in range(1, terms):
        term = term @ M / q
        E = E + term
    return E
