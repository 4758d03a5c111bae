"""Envelopes, reconstruction of f and its derivatives, fundamental bases, Wronskians."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .charroots import track_frame
from .coeffs import eval_coeffs
from .errors import DegeneracyError, NumericFailure
from .linalg import vandermonde, vandermonde_inverse
from .propagate import find_singularities, integrate_coeff, sweep


@dataclass(frozen=True, eq=False)
class Envelope:
    x: float
    F: np.ndarray

    def __post_init__(self):
        F = np.array(self.F, dtype=complex)
        if not np.all(np.isfinite(F)):
            raise NumericFailure("non-finite envelope", self.x)
        F.setflags(write=False)
        object.__setattr__(self, "F", F)


@dataclass(eq=False)
class SolutionGrid:
    """Sampled solution. ``derivs[m]`` is f^(m) on xs (row 0 repeats values)."""

    xs: np.ndarray
    values: np.ndarray
    derivs: np.ndarray | None = None
    envelopes: list | None = None
    roots: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.xs.size > 1 and not np.all(np.diff(self.xs) > 0):
            raise ValueError("grid xs must be strictly increasing")
        if self.values.shape != self.xs.shape:
            raise ValueError("values and xs differ in length")


def ic_to_envelope(p, x0, derivs, frame=None):
    """F with D(x0) exp(x0 K) F = (f, f', ..., f^(n-1)) at x0."""
    fr = frame if frame is not None else track_frame(None, p, x0)
    derivs = np.asarray(derivs, dtype=complex)
    if derivs.shape[0] != p.n:
        raise ValueError(f"need {p.n} initial values, got {derivs.shape[0]}")
    scale = 1.0 + float(np.max(np.abs(fr.roots)))
    if not fr.gap >= p.options.degeneracy_eps * scale:
        raise DegeneracyError(x0, gap=fr.gap, message=(
            f"root frame at x0={x0!r} is degenerate; choose a different starting point"))
    G = vandermonde_inverse(fr)
    F = np.exp(-fr.x * fr.roots) * (G @ derivs)
    return Envelope(float(x0), F)


def reconstruct(e, fr, m=0):
    """f^(m)(x) = exp(Phi)^t K^m F."""
    n = fr.n
    if not 0 <= m < n:
        raise ValueError(f"derivative order {m} outside 0..{n - 1}")
    if abs(e.x - fr.x) > 1e-12 * max(1.0, abs(fr.x)):
        raise ValueError(f"envelope at x={e.x} but frame at x={fr.x}")
    return complex(np.sum(np.exp(fr.x * fr.roots) * fr.roots ** m * e.F))


def _phase_powers(x, roots, count):
    # rows m = 0..count-1 of exp(x k_i) k_i^m
    return np.exp(x * roots)[None, :] * roots[None, :] ** np.arange(count)[:, None]


def propagate_envelopes(p, x0, F0, xs, method=None):
    """Envelopes at every xs from F0 (n,) or (n, columns) at x0."""
    xs = np.asarray(xs, dtype=float)
    F0 = np.asarray(F0, dtype=complex)
    fr0 = track_frame(None, p, x0)
    singular = find_singularities(p, (min(x0, xs.min()), max(x0, xs.max())))
    frames = [None] * xs.size
    frozen = np.zeros(xs.size, dtype=bool)
    Fs = np.empty((xs.size,) + F0.shape, dtype=complex)
    jumps = []
    for side in (xs >= x0, xs < x0):
        idx = np.nonzero(side)[0]
        if not idx.size:
            continue
        sw = sweep(p, x0, fr0, xs[idx], method, singular)
        for j, i in enumerate(idx):
            Fs[i] = sw.Qs[j] @ F0
            frames[i] = sw.frames[j]
            frozen[i] = sw.frozen[j]
        jumps += sw.jumps
    return Fs, frames, frozen, singular, jumps, fr0


def _check_grid(p, xs):
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1 or xs.size == 0:
        raise ValueError("grid must be a nonempty 1-D sequence")
    if xs.size > 1 and not np.all(np.diff(xs) > 0):
        raise ValueError("grid must be strictly increasing")
    lo, hi = p.domain
    if xs[0] < lo - 1e-12 or xs[-1] > hi + 1e-12:
        raise ValueError(f"grid leaves the domain [{lo}, {hi}]")
    return xs


def fornberg_weights(z, x, m):
    """Finite-difference weights for derivatives 0..m at z from nodes x."""
    x = np.asarray(x, dtype=float)
    npts = x.size
    c = np.zeros((npts, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, npts):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def fd_residual(p, xs, values):
    """ODE residual |L f| from centred finite differences, relative to max_x sum_m |a_m f^(m)|.

    Points without a full centred stencil get NaN.
    """
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=complex)
    n = p.n
    r = max(1, (n + 1) // 2)
    out = np.full(xs.size, np.nan)
    if xs.size < 2 * r + 1:
        return out
    a = eval_coeffs(p, xs)
    size = np.zeros(xs.size)
    for i in range(r, xs.size - r):
        sl = slice(i - r, i + r + 1)
        w = fornberg_weights(xs[i], xs[sl], n)
        d = w.T @ values[sl]
        terms = np.append(a[:, i] * d[:n], d[n])
        out[i] = abs(np.sum(terms))
        size[i] = np.sum(np.abs(terms))
    # one scale for the whole grid so zeros of f do not blow up the ratio
    scale = size.max()
    return out / scale if scale > 0 else out


def solve_grid(p, x0, derivs, xs, with_derivs=False, method=None, residual=True):
    """Solve from classical initial data at x0 and sample f on xs."""
    xs = _check_grid(p, xs)
    env0 = ic_to_envelope(p, x0, derivs)
    Fs, frames, frozen, sings, jumps, _ = propagate_envelopes(p, x0, env0.F, xs, method)
    count = p.n if with_derivs else 1
    D = np.empty((count, xs.size), dtype=complex)
    roots = np.empty((xs.size, p.n), dtype=complex)
    gaps = np.empty(xs.size)
    for i, fr in enumerate(frames):
        D[:, i] = _phase_powers(xs[i], fr.roots, count) @ Fs[i]
        roots[i] = fr.roots
        gaps[i] = fr.gap
    diag = {
        "gap": gaps,
        "frozen": frozen,
        "singularities": sings,
        "jumps": [(j.x_from, j.x_to) for j in jumps],
    }
    if residual:
        diag["residual"] = fd_residual(p, xs, D[0])
    return SolutionGrid(
        xs=xs,
        values=D[0].copy(),
        derivs=D if with_derivs else None,
        envelopes=[Envelope(float(x), F) for x, F in zip(xs, Fs)],
        roots=roots,
        diagnostics=diag,
    )


def fundamental_basis(p, x0, xs, F0=None, method=None):
    """n solutions g_i from the unit envelopes e_i (or the columns of F0) at x0."""
    xs = _check_grid(p, xs)
    n = p.n
    F0 = np.eye(n, dtype=complex) if F0 is None else np.asarray(F0, dtype=complex)
    Fs, frames, frozen, sings, _, _ = propagate_envelopes(p, x0, F0, xs, method)
    W = np.empty((xs.size, n, n), dtype=complex)
    for i, fr in enumerate(frames):
        W[i] = _phase_powers(xs[i], fr.roots, n) @ Fs[i]
    wdet = np.linalg.det(W)
    if not np.all(np.isfinite(wdet)) or np.any(np.abs(wdet) == 0):
        bad = int(np.argmax(~np.isfinite(wdet) | (np.abs(wdet) == 0)))
        raise NumericFailure("fundamental solutions are not independent", float(xs[bad]))
    gaps = np.array([fr.gap for fr in frames])
    basis = []
    for c in range(F0.shape[1]):
        basis.append(SolutionGrid(
            xs=xs,
            values=W[:, 0, c].copy(),
            derivs=W[:, :, c].T.copy(),
            envelopes=[Envelope(float(x), F[:, c]) for x, F in zip(xs, Fs)],
            roots=np.array([fr.roots for fr in frames]),
            diagnostics={"gap": gaps, "frozen": frozen, "singularities": sings,
                         "wronskian": wdet},
        ))
    return basis


def wronskian(basis):
    """det[g_i^(j)] on the common grid."""
    for g in basis:
        if g.derivs is None or g.derivs.shape[0] < len(basis):
            raise ValueError("basis solutions need derivatives up to order n-1")
    n = len(basis)
    W = np.stack([g.derivs[:n] for g in basis], axis=-1)  # (n, len, n)
    return np.linalg.det(np.moveaxis(W, 1, 0))


def wronskian_abel(p, basis, x_ref):
    """Compare W(x) with W(x_ref) exp(-int_{x_ref}^x a_{n-1}) on the basis grid."""
    xs = basis[0].xs
    W = wronskian(basis)
    i0 = int(np.argmin(np.abs(xs - x_ref)))
    integ = np.array([integrate_coeff(p, p.n - 1, xs[i0], x) for x in xs])
    predicted = W[i0] * np.exp(-integ)
    rel = np.abs(W - predicted) / np.abs(predicted)
    return {
        "xs": xs,
        "wronskian": W,
        "predicted": predicted,
        "anchor": float(xs[i0]),
        "max_rel_deviation": float(np.max(rel)),
    }
