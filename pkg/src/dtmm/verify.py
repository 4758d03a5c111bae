"""Named identity checks scoped to one problem (used by ``dtmm verify``)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .charroots import track_frame
from .linalg import mat_exp, mat_exp_2x2, vandermonde, vandermonde_inverse
from .propagate import (
    CANONICAL_JUMPS,
    find_singularities,
    propagate_exp,
    propagate_ode,
    propagate_robust,
    singular_jump,
    transfer_det_formula,
)
from .solution import fornberg_weights, fundamental_basis, solve_grid, wronskian_abel


@dataclass
class CheckResult:
    name: str
    passed: bool
    deviation: float
    tolerance: float
    detail: str = ""


def smooth_segment(p, margin=0.1):
    """Longest subinterval of the domain without singular points, trimmed near them."""
    lo, hi = p.domain
    sings = [s.xi for s in find_singularities(p)]
    edges = [lo] + sings + [hi]
    best = None
    for i in range(len(edges) - 1):
        a, b = edges[i], edges[i + 1]
        length = b - a
        if i > 0:
            a += margin * length
        if i < len(edges) - 2:
            b -= margin * length
        if best is None or b - a > best[1] - best[0]:
            best = (a, b)
    return best


def check_vandermonde_inverse(p, points=5, tol=1e-9):
    a, b = smooth_segment(p)
    dev = 0.0
    for x in np.linspace(a, b, points):
        fr = track_frame(None, p, x)
        G = vandermonde_inverse(fr)
        D, _ = vandermonde(fr)
        dev = max(dev, float(np.max(np.abs(G @ D - np.eye(p.n)))))
    return CheckResult("vandermonde_inverse", dev < tol, dev, tol, f"{points} frames on [{a:.6g}, {b:.6g}]")


def derivative_ratios(p, x, h, x0=None):
    """Error ratios err(h)/err(h/2) of centred differences against the analytic derivatives."""
    n = p.n
    ratios = []
    if n < 2:
        return ratios
    r = max(1, n // 2)
    offsets = np.arange(-2 * r, 2 * r + 1) * (h / 2)
    xs = x + offsets
    x0 = xs[0] if x0 is None else x0
    sol = solve_grid(p, x0, _generic_ic(n), xs, with_derivs=True, residual=False)
    mid = 2 * r
    for m in range(1, n):
        rm = max(1, (m + 1) // 2)
        errs = []
        for stride in (2, 1):
            idx = mid + stride * np.arange(-rm, rm + 1)
            w = fornberg_weights(x, xs[idx], m)[:, m]
            errs.append(abs(w @ sol.values[idx] - sol.derivs[m, mid]))
        ratios.append(errs[0] / errs[1] if errs[1] > 0 else np.inf)
    return ratios


def _generic_ic(n):
    # no vanishing derivatives, so no finite-difference error term cancels by accident
    return 1.0 / (1.0 + np.arange(n)) + 0.3j


def check_reconstructed_derivatives(p):
    a, b = smooth_segment(p)
    x = 0.5 * (a + b)
    fr = track_frame(None, p, x)
    h = min(0.05 / (1 + np.max(np.abs(fr.roots))), 0.1 * (b - a))
    ratios = derivative_ratios(p, x, h, x0=a)
    if not ratios:
        return CheckResult("reconstructed_derivatives", True, 0.0, 0.0, "n = 1: nothing to check")
    dev = float(max(abs(q - 4.0) for q in ratios))
    return CheckResult("reconstructed_derivatives", dev <= 0.5, dev, 0.5,
                       "h-halving ratios " + ", ".join(f"{q:.3f}" for q in ratios))


def check_transfer_algebra(p, tol=1e-6):
    a, b = smooth_segment(p)
    m = a + 0.4 * (b - a)
    q_ab = propagate_ode(p, a, b).Q
    q_ba = propagate_ode(p, b, a).Q
    q_am = propagate_ode(p, a, m)
    q_mb = propagate_ode(p, m, b, start=q_am.frame_to).Q
    scale = max(1.0, float(np.max(np.abs(q_ab))))
    inv = float(np.max(np.abs(q_ab @ q_ba - np.eye(p.n)))) / scale
    dec = float(np.max(np.abs(q_mb @ q_am.Q - q_ab))) / scale
    dev = max(inv, dec)
    return CheckResult("transfer_algebra", dev < tol, dev, tol,
                       f"inversion {inv:.2e}, decomposition {dec:.2e}")


def check_abel_wronskian(p, tol=1e-6):
    a, b = smooth_segment(p)
    xs = np.linspace(a, b, 21)
    basis = fundamental_basis(p, a, xs)
    rep = wronskian_abel(p, basis, a)
    dev = rep["max_rel_deviation"]
    return CheckResult("abel_wronskian", dev < tol, dev, tol, f"on [{a:.6g}, {b:.6g}]")


def check_det_formula(p, tol=1e-6):
    a, b = smooth_segment(p)
    tm = propagate_ode(p, a, b)
    ref = transfer_det_formula(p, tm.frame_from, tm.frame_to)
    dev = abs(tm.det - ref) / abs(ref)
    return CheckResult("det_formula", dev < tol, dev, tol,
                       f"det Q = {tm.det:.10g}, closed form {ref:.10g}")


def check_det_exp_identity(p, tol=1e-6):
    # H = D exp(xK): det exp(int H^-1 H') = det H(x2) / det H(x1), and H^-1 H' = -(jump integrand)
    a, b = smooth_segment(p)
    tm, te = propagate_exp(p, a, b)
    lhs = np.linalg.det(mat_exp(-te.J))

    def det_h(fr):
        D, _ = vandermonde(fr)
        return np.linalg.det(D) * np.exp(fr.x * np.sum(fr.roots))

    rhs = det_h(tm.frame_to) / det_h(tm.frame_from)
    dev = float(abs(lhs - rhs) / abs(rhs))
    return CheckResult("det_exp_identity", dev < tol, dev, tol, "")


def check_exp_2x2(p, tol=1e-12):
    if p.n != 2:
        return CheckResult("exp_2x2", True, 0.0, tol, "n != 2: not applicable")
    a, b = smooth_segment(p)
    _, te = propagate_exp(p, a, b)
    ref = mat_exp(te.M)
    dev = float(np.max(np.abs(mat_exp_2x2(te.M) - ref)) / np.max(np.abs(ref)))
    return CheckResult("exp_2x2", dev < tol, dev, tol, "exact 2x2 exponential vs scaling and squaring")


def check_singularity_jump_limit(p, tol=5e-2):
    sings = [s for s in find_singularities(p) if s.kind in CANONICAL_JUMPS]
    if not sings:
        return CheckResult("singularity_jump_limit", True, 0.0, tol, "no classified singular points")
    worst = 0.0
    notes = []
    ok = True
    for s in sings:
        ref = CANONICAL_JUMPS[s.kind]
        d1 = float(np.max(np.abs(singular_jump(p, s).Q - ref)))
        q = p.with_options(jump_half_width=p.jump_half_width / 4)
        d2 = float(np.max(np.abs(singular_jump(q, s).Q - ref)))
        ok = ok and d1 < tol and d2 <= d1
        worst = max(worst, d1)
        notes.append(f"xi={s.xi:.6g} type {s.kind}: {d1:.2e} -> {d2:.2e}")
    return CheckResult("singularity_jump_limit", ok, worst, tol, "; ".join(notes))


CHECKS = {
    "vandermonde_inverse": check_vandermonde_inverse,
    "reconstructed_derivatives": check_reconstructed_derivatives,
    "transfer_algebra": check_transfer_algebra,
    "abel_wronskian": check_abel_wronskian,
    "det_formula": check_det_formula,
    "det_exp_identity": check_det_exp_identity,
    "exp_2x2": check_exp_2x2,
    "singularity_jump_limit": check_singularity_jump_limit,
}


def run_checks(p, names=None):
    return [CHECKS[name](p) for name in (names or CHECKS)]


def robust_inverse_deviation(p, x1, x2):
    """max |Q(x1->x2) Q(x2->x1) - I| through propagate_robust."""
    fwd = propagate_robust(p, x1, x2)
    back = propagate_robust(p, x2, x1, start=fwd.frame_to)
    return float(np.max(np.abs(back.Q @ fwd.Q - np.eye(p.n))))
