"""Characteristic roots k_i(x) with a continuity-stable ordering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as kn
from .coeffs import eval_coeff_derivs, eval_coeffs
from .errors import DegeneracyError, NumericFailure

RESIDUAL_TOL = 1e-10


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RootFrame:
    """Ordered roots and their x-derivatives at one point."""

    x: float
    roots: np.ndarray
    droots: np.ndarray
    gap: float

    def __post_init__(self):
        object.__setattr__(self, "roots", _frozen(self.roots))
        object.__setattr__(self, "droots", _frozen(self.droots))

    @classmethod
    def from_roots(cls, roots, x=0.0, droots=None):
        """Frame with given roots (zero derivatives unless provided)."""
        roots = np.asarray(roots, dtype=complex)
        if droots is None:
            droots = np.zeros_like(roots)
        gap, _, _ = kn.min_gap(np.ascontiguousarray(roots))
        return cls(float(np.real(x)), roots, droots, float(gap))

    @property
    def n(self):
        return self.roots.shape[0]

    @property
    def K(self):
        return np.diag(self.roots)

    @property
    def dK(self):
        return np.diag(self.droots)

    def permuted(self, perm):
        perm = np.asarray(perm)
        return RootFrame(self.x, self.roots[perm], self.droots[perm], self.gap)

    def __repr__(self):
        return f"RootFrame(x={self.x!r}, roots={self.roots!r}, gap={self.gap:.3e})"


def poly_residuals(coeffvec, roots):
    """|p(k_i)| / (1 + max_m |a_m k_i^m|) for each root, with a_n = 1."""
    a = np.append(np.asarray(coeffvec, dtype=complex), 1.0)
    pw = np.asarray(roots, dtype=complex)[:, None] ** np.arange(a.size)[None, :]
    terms = a[None, :] * pw
    return np.abs(terms.sum(axis=1)) / (1.0 + np.abs(terms).max(axis=1))


def roots_at(coeffvec, x=None):
    """All n roots of k^n + a_{n-1} k^{n-1} + ... + a_0, lexicographically ordered."""
    a = np.ascontiguousarray(coeffvec, dtype=complex)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("coefficient vector must be 1-D and nonempty")
    if not np.all(np.isfinite(a)):
        raise NumericFailure("non-finite characteristic coefficients", x)
    k = kn.poly_roots(a)
    k = k[kn.lex_order(k)]
    if not np.all(np.isfinite(k)) or poly_residuals(a, k).max() > RESIDUAL_TOL:
        raise NumericFailure("characteristic root finder did not converge", x)
    return k


def _raise_for(status, x, k, gap, ia, ib):
    if status == kn.NONFINITE:
        raise NumericFailure("characteristic root finder did not converge", x)
    pair = (int(ia), int(ib)) if ia >= 0 else None
    if status == kn.DEGENERATE_SLOPE:
        raise DegeneracyError(x, pair, gap,
                              f"root derivative undefined at x={x!r} (p'(k) ~ 0)")
    raise DegeneracyError(x, pair, gap)


def frame_at(p, x, prev=None):
    """Frame at x from coefficient values; complex x is allowed."""
    a = np.ascontiguousarray(eval_coeffs(p, x), dtype=complex)
    da = np.ascontiguousarray(eval_coeff_derivs(p, x), dtype=complex)
    if prev is None:
        zero = np.zeros(p.n, dtype=complex)
        k, dk, gap, st, ia, ib = kn.make_frame(a, da, zero, zero, 0j, False,
                                               p.options.degeneracy_eps)
    else:
        k, dk, gap, st, ia, ib = kn.make_frame(
            a, da, np.ascontiguousarray(prev.roots), np.ascontiguousarray(prev.droots),
            complex(x) - complex(prev.x), True, p.options.degeneracy_eps)
    if st != kn.OK:
        _raise_for(st, x, k, gap, ia, ib)
    return k, dk, float(gap)


def track_frame(prev, p, x):
    """Frame at x; continues prev's slot order when prev is given."""
    k, dk, gap = frame_at(p, x, prev)
    return RootFrame(float(np.real(x)), k, dk, gap)


def frames_along(p, xs, start):
    """Continue ``start`` (a frame at xs[0]) through all xs; returns (K, dK, gaps)."""
    xs = np.ascontiguousarray(xs, dtype=complex)
    A = np.ascontiguousarray(eval_coeffs(p, xs).T)
    dA = np.ascontiguousarray(eval_coeff_derivs(p, xs).T)
    K, dK, gaps, st, bad, ia, ib = kn.track_path(
        xs, A, dA, np.ascontiguousarray(start.roots), np.ascontiguousarray(start.droots),
        p.options.degeneracy_eps)
    if st != kn.OK:
        xb = xs[bad]
        _raise_for(st, xb.real if xb.imag == 0 else xb, K[bad], None, ia, ib)
    return K, dK, gaps


def phase_vector(fr):
    """Phi_i = x k_i(x)."""
    return fr.x * fr.roots
