"""Reference solver: the companion first-order system integrated by RK4.

Shares nothing with the transfer-matrix path except coefficient evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._jit import njit
from .coeffs import eval_coeffs
from .errors import OracleConvergenceError


@dataclass(frozen=True)
class CompanionState:
    x: float
    y: np.ndarray


def companion_rhs(p, s):
    """y_i' = y_{i+1}; y_n' = -sum_m a_m(x) y_{m+1}."""
    a = eval_coeffs(p, s.x)
    y = np.asarray(s.y, dtype=complex)
    out = np.empty_like(y)
    out[:-1] = y[1:]
    out[-1] = -np.dot(a, y)
    return out


@njit
def _rhs(a, Y):
    n = Y.shape[0]
    out = np.empty_like(Y)
    for i in range(n - 1):
        out[i] = Y[i + 1]
    last = np.zeros(Y.shape[1], dtype=np.complex128)
    for m in range(n):
        last -= a[m] * Y[m]
    out[n - 1] = last
    return out


@njit
def _rk4_companion(nodes, A, Y0, record):
    """Integrate across ``nodes``; A rows are coefficients at nodes and midpoints."""
    nsteps = nodes.shape[0] - 1
    Y = Y0.copy()
    out = np.empty((record.shape[0], Y0.shape[0], Y0.shape[1]), dtype=np.complex128)
    r = 0
    if r < record.shape[0] and record[r] == 0:
        out[r] = Y
        r += 1
    for s in range(nsteps):
        h = nodes[s + 1] - nodes[s]
        a0 = A[2 * s]
        am = A[2 * s + 1]
        a1 = A[2 * s + 2]
        k1 = _rhs(a0, Y)
        k2 = _rhs(am, Y + (0.5 * h) * k1)
        k3 = _rhs(am, Y + (0.5 * h) * k2)
        k4 = _rhs(a1, Y + h * k3)
        Y = Y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        while r < record.shape[0] and record[r] == s + 1:
            out[r] = Y
            r += 1
    return out


def _one_side(p, x0, Y0, targets, nsub_per_unit):
    """Companion states at targets (all on one side of x0, sorted away from x0)."""
    bps = np.concatenate([[x0], targets])
    pieces = []
    rec = []
    count = 0
    for u, v in zip(bps[:-1], bps[1:]):
        m = max(1, math.ceil(abs(v - u) * nsub_per_unit - 1e-9)) if v != u else 0
        pieces.append(np.linspace(u, v, m + 1)[1:] if m else np.empty(0))
        count += m
        rec.append(count)
    nodes = np.concatenate([[x0]] + pieces)
    pts = np.empty(2 * nodes.size - 1)
    pts[0::2] = nodes
    pts[1::2] = 0.5 * (nodes[:-1] + nodes[1:])
    A = np.ascontiguousarray(eval_coeffs(p, pts).T)
    return _rk4_companion(nodes, A, Y0, np.asarray(rec, dtype=np.int64))


def _integrate(p, x0, Y0, xs, nsub_per_unit):
    out = np.empty((xs.size,) + Y0.shape, dtype=complex)
    right = np.nonzero(xs >= x0)[0]
    left = np.nonzero(xs < x0)[0]
    if right.size:
        idx = right[np.argsort(xs[right])]
        out[idx] = _one_side(p, x0, Y0, xs[idx], nsub_per_unit)
    if left.size:
        idx = left[np.argsort(-xs[left])]
        out[idx] = _one_side(p, x0, Y0, xs[idx], nsub_per_unit)
    return out


@dataclass
class OracleResult:
    """States y(x) = (f, f', ..., f^(n-1)) at each grid point for every initial vector."""

    xs: np.ndarray
    states: np.ndarray  # (len(xs), n, columns)
    steps_per_unit: float
    change: float

    def values(self, column=0):
        return self.states[:, 0, column]

    def derivs(self, column=0):
        return self.states[:, :, column].T


def oracle_states(p, x0, derivs, xs, rtol=1e-10, start_steps=64, max_halvings=14):
    """Step-halving RK4 on the companion system until successive results agree to rtol.

    ``derivs`` may be one initial vector (n,) or a matrix (n, columns). Agreement
    is measured relative to the largest state magnitude of each column on the grid.
    """
    Y0 = np.asarray(derivs, dtype=complex)
    if Y0.ndim == 1:
        Y0 = Y0[:, None]
    Y0 = np.ascontiguousarray(Y0)
    xs = np.asarray(xs, dtype=float)
    span = max(np.max(np.abs(xs - x0)) if xs.size else 0.0, 1e-300)
    per_unit = start_steps / span
    prev = _integrate(p, x0, Y0, xs, per_unit)
    change = np.inf
    for _ in range(max_halvings):
        per_unit *= 2
        cur = _integrate(p, x0, Y0, xs, per_unit)
        if not np.all(np.isfinite(cur)):
            raise OracleConvergenceError("oracle solution overflowed", float(x0))
        scale = np.max(np.abs(cur), axis=(0, 1))
        scale = np.where(scale > 0, scale, 1.0)
        change = float(np.max(np.abs(cur - prev) / scale[None, None, :]))
        if change <= rtol:
            return OracleResult(xs, cur, per_unit, change)
        prev = cur
    raise OracleConvergenceError(
        f"oracle did not reach rtol={rtol:g} (last change {change:.2e}) at the step floor "
        f"{1 / per_unit:.3e}")


def oracle_solve(p, x0, derivs, xs, rtol=1e-10):
    """Reference f and derivatives on xs as a SolutionGrid."""
    from .solution import SolutionGrid

    res = oracle_states(p, x0, derivs, xs, rtol)
    order = np.argsort(xs)
    st = res.states[order, :, 0]
    return SolutionGrid(
        xs=np.asarray(xs, dtype=float)[order],
        values=st[:, 0],
        derivs=st.T.copy(),
        diagnostics={"oracle_change": res.change, "oracle_steps_per_unit": res.steps_per_unit},
    )
