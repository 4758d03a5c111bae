"""Differential transfer matrices: kernel, propagation, determinants, singular points."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as kn
from .charroots import RootFrame, _raise_for, frames_along, track_frame
from .coeffs import eval_coeff_derivs, eval_coeffs
from .errors import DegeneracyError, EntirelyDegenerateError, NumericFailure
from .jump import TransferMatrix, identity_transfer, jump_between, root_differences
from .linalg import mat_exp

# max step / distance-to-singularity ratio inside graded segments
GRADE = 0.05
GL_ORDER = 8
# resampling density inside each candidate bracket of the singularity scan
SUBSAMPLE = 64

CANONICAL_JUMPS = {
    "A": np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]]) / 2,
    "B": np.array([[1 - 1j, 1 + 1j], [1 + 1j, 1 - 1j]]) / 2,
    "C": np.eye(2, dtype=complex),
}


@dataclass(frozen=True, eq=False)
class TransferExponent:
    """M = integral of U; J is the jump part and T = integral of K (diagonal)."""

    M: np.ndarray
    J: np.ndarray
    T: np.ndarray
    x_from: float
    x_to: float


@dataclass(frozen=True)
class SingularityReport:
    xi: float
    kind: str
    gap_at_xi: float


# -- kernel ------------------------------------------------------------------

def _check_frame(p, fr):
    scale = 1.0 + float(np.max(np.abs(fr.roots)))
    if not fr.gap >= p.options.degeneracy_eps * scale:
        raise DegeneracyError(fr.x, gap=fr.gap)


def kernel_at(p, fr):
    """U(x) = -x K' - exp(-xK) D^-1 C K' exp(xK) at the frame's point."""
    _check_frame(p, fr)
    return kn.kernel(float(fr.x), np.ascontiguousarray(fr.roots),
                     np.ascontiguousarray(fr.droots))


def kernel_general(fr):
    """Kernel through the full Vandermonde construction for any n (no fast path)."""
    return kn.kernel_general(float(fr.x), np.ascontiguousarray(fr.roots),
                             np.ascontiguousarray(fr.droots))


def kernel_sqrt_form(x, a0, da0):
    """n = 2, a1 = 0 kernel for the ordering k1 = -j sqrt(a0), k2 = +j sqrt(a0)."""
    k = np.sqrt(complex(a0) + 0j)
    dk = complex(da0) / (2 * k)
    c = dk / (2 * k)
    return c * np.array([[-1 + 2j * k * x, np.exp(2j * x * k)],
                         [np.exp(-2j * x * k), -1 - 2j * k * x]])


# -- node placement -------------------------------------------------------

def march_nodes(a, b, step, anchors=(), grade=GRADE):
    """Step ends from a to b; near any anchor the step is at most grade * distance."""
    a = float(a)
    b = float(b)
    length = abs(b - a)
    if length == 0:
        return np.array([a])
    anchors = np.asarray(anchors, dtype=float)
    if anchors.size:
        nearest = np.min(np.minimum(np.abs(anchors - a), np.abs(anchors - b)))
        inside = np.any((anchors - a) * (anchors - b) < 0)
    if not anchors.size or (not inside and grade * nearest >= step):
        m = max(1, math.ceil(length / step - 1e-9))
        return np.linspace(a, b, m + 1)
    d = 1.0 if b > a else -1.0
    floor = 1e-12 * max(1.0, abs(a), abs(b))
    out = [a]
    x = a
    while True:
        h = min(step, max(grade * np.min(np.abs(anchors - x)), floor))
        rem = abs(b - x)
        if rem <= h * (1 + 1e-9):
            out.append(b)
            return np.array(out)
        if rem < 1.5 * h:
            h = rem / 2
        x = x + d * h
        out.append(x)


def _stage_points(nodes):
    pts = np.empty(2 * nodes.size - 1)
    pts[0::2] = nodes
    pts[1::2] = 0.5 * (nodes[:-1] + nodes[1:])
    return pts


def _coeff_table(p, xs):
    A = np.ascontiguousarray(eval_coeffs(p, xs).T)
    dA = np.ascontiguousarray(eval_coeff_derivs(p, xs).T)
    return A, dA


def _rk4(p, nodes, frame0):
    """Transfer matrices from nodes[0] to every node, with the continued frames."""
    pts = _stage_points(nodes)
    A, dA = _coeff_table(p, pts)
    Qs, Ks, dKs, gaps, st, bad, ia, ib = kn.rk4_transfer(
        pts, A, dA, np.ascontiguousarray(frame0.roots),
        np.ascontiguousarray(frame0.droots), p.options.degeneracy_eps)
    if st != kn.OK:
        _raise_for(st, float(pts[bad]), None, None, ia, ib)
    if not np.all(np.isfinite(Qs)):
        i = int(np.argmax(~np.all(np.isfinite(Qs), axis=(1, 2))))
        raise NumericFailure("transfer matrix overflowed", float(nodes[i]))
    return Qs, Ks, dKs


def _start_frame(p, x, start):
    if start is None:
        return track_frame(None, p, x)
    if abs(start.x - x) > 1e-12 * max(1.0, abs(x)):
        raise ValueError(f"start frame is at x={start.x}, expected {x}")
    return start


# -- propagation ------------------------------------------------------------

def propagate_ode(p, x1, x2, start=None, anchors=()):
    """Integrate dQ/dx = U Q, Q(x1) = I, by classical RK4 with step options.step.

    ``anchors`` are singular points outside [x1, x2]; steps are graded near them.
    """
    fr0 = _start_frame(p, x1, start)
    if x1 == x2:
        return identity_transfer(x1, p.n, fr0)
    nodes = march_nodes(x1, x2, p.step, anchors)
    Qs, Ks, dKs = _rk4(p, nodes, fr0)
    fr1 = RootFrame.from_roots(Ks[-1], x2, dKs[-1])
    return TransferMatrix(float(x1), float(x2), Qs[-1], fr0, fr1)


def _gl_panels(edges):
    t, w = np.polynomial.legendre.leggauss(GL_ORDER)
    u = edges[:-1, None]
    v = edges[1:, None]
    xs = (0.5 * (u + v) + 0.5 * (v - u) * t[None, :]).ravel()
    ws = (0.5 * (v - u) * w[None, :]).ravel()
    return xs, ws


def _exp_pieces(p, x1, x2, fr0, anchors):
    """Quadrature nodes/weights and tracked frames at those nodes."""
    edges = march_nodes(x1, x2, abs(x2 - x1) / p.options.quadrature_points, anchors)
    qx, qw = _gl_panels(edges)
    track = march_nodes(x1, x2, p.step, anchors)
    d = 1.0 if x2 > x1 else -1.0
    allx = np.concatenate([track, qx])
    order = np.argsort(d * allx, kind="stable")
    allx = allx[order]
    K, dK, _ = frames_along(p, allx, fr0)
    pos = np.empty(allx.size, dtype=np.int64)
    pos[order] = np.arange(allx.size)
    qi = pos[track.size:]
    end = pos[track.size - 1]
    return qx, qw, K[qi], dK[qi], RootFrame.from_roots(K[end], x2, dK[end])


def propagate_exp(p, x1, x2, start=None, anchors=()):
    """Q = exp(M), M = integral of U by composite Gauss-Legendre quadrature.

    Exact when U commutes with M; the determinant is exact regardless.
    Returns (TransferMatrix, TransferExponent).
    """
    fr0 = _start_frame(p, x1, start)
    n = p.n
    if x1 == x2:
        z = np.zeros((n, n), dtype=complex)
        return identity_transfer(x1, n, fr0), TransferExponent(z, z.copy(), z.copy(), x1, x2)
    qx, qw, K, dK, fr1 = _exp_pieces(p, x1, x2, fr0, anchors)
    U = kn.kernels_along(qx.astype(complex), K, dK)
    G = kn.jump_integrands(qx.astype(complex), K, dK)
    M = np.einsum("s,sij->ij", qw, U)
    J = np.einsum("s,sij->ij", qw, G)
    T = np.diag(qw @ K)
    Q = mat_exp(M)
    tm = TransferMatrix(float(x1), float(x2), Q, fr0, fr1)
    return tm, TransferExponent(M, J, T, float(x1), float(x2))


def integrate_coeff(p, m, x1, x2, panels=64):
    """integral_{x1}^{x2} a_m(x) dx by composite Gauss-Legendre."""
    if x1 == x2 or p.coeffs[m].is_zero:
        return 0j
    xs, ws = _gl_panels(np.linspace(x1, x2, panels + 1))
    return complex(ws @ p.coeffs[m](xs))


def transfer_det_formula(p, fr1, fr2):
    """det Q from the root frames at both ends.

    exp(x1 S(x1) - x2 S(x2) + int S dx) * prod_{i>j}(k_i - k_j)(x1) / (same at x2),
    with S the root sum; the exponential factor drops out when a_{n-1} = 0.
    """
    for fr in (fr1, fr2):
        _check_frame(p, fr)
    ratio = root_differences(fr1.roots) / root_differences(fr2.roots)
    if p.coeffs[-1].is_zero:
        return complex(ratio)
    s1 = complex(np.sum(fr1.roots))
    s2 = complex(np.sum(fr2.roots))
    int_s = -integrate_coeff(p, p.n - 1, fr1.x, fr2.x, max(64, p.options.quadrature_points))
    return complex(np.exp(fr1.x * s1 - fr2.x * s2 + int_s) * ratio)


def step_halving_error(p, x1, x2, start=None):
    """Max entrywise change of propagate_ode when the step is halved."""
    coarse = propagate_ode(p, x1, x2, start).Q
    fine = propagate_ode(p.with_options(step=p.step / 2), x1, x2, start).Q
    return float(np.max(np.abs(fine - coarse)))


# -- singular points ----------------------------------------------------------------

def _rel_gap(p, x):
    a = np.ascontiguousarray(eval_coeffs(p, x), dtype=complex)
    k = kn.poly_roots(a)
    g, _, _ = kn.min_gap(k)
    return g / (1.0 + kn.max_abs(k)), g


def _golden_min(f, a, b):
    # run to machine precision: a sqrt-type cusp needs |x - xi| ~ eps^2 to show a tiny gap
    invphi = (math.sqrt(5) - 1) / 2
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = f(c)
    fd = f(d)
    for _ in range(200):
        if abs(b - a) <= 4 * np.finfo(float).eps * max(1.0, abs(a), abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    cands = [(f(a), a), (fc, c), (fd, d), (f(b), b)]
    return min(cands)[1]


def classify(p, xi):
    """Type A/B/C by the sign of a0 - a1^2/4 on both sides (n = 2 only)."""
    if p.n != 2:
        return "unclassified"
    dx = p.jump_half_width
    a = eval_coeffs(p, np.array([xi - dx, xi + dx]))
    q = a[0] - a[1] ** 2 / 4
    if np.any(np.abs(q.imag) > 1e-12 * (1 + np.abs(q))):
        return "unclassified"
    left, right = q.real
    if left < 0 < right:
        return "A"
    if left > 0 > right:
        return "B"
    return "C"


def find_singularities(p, interval=None):
    """Isolated points in the interval where two characteristic roots coincide."""
    lo, hi = interval if interval is not None else p.domain
    lo, hi = float(min(lo, hi)), float(max(lo, hi))
    if lo == hi:
        return []
    m = max(2, math.ceil((hi - lo) / p.step - 1e-9))
    xs = np.linspace(lo, hi, m + 1)
    A = np.ascontiguousarray(eval_coeffs(p, xs).T)
    gaps, scale = kn.scan_gaps(A)
    rel = gaps / scale
    eps = p.options.degeneracy_eps
    below = rel < eps
    run = below[:-1] & below[1:]
    if run.any():
        i = int(np.argmax(run))
        j = i
        while j + 1 < below.size and below[j + 1]:
            j += 1
        raise EntirelyDegenerateError(float(xs[i]), float(xs[j]))

    def f(x):
        return _rel_gap(p, x)[0]

    cands = []
    last = rel.size - 1
    for i in range(rel.size):
        left_ok = i == 0 or rel[i] < rel[i - 1]
        right_ok = i == last or rel[i] <= rel[i + 1]
        if not (left_ok and right_ok):
            continue
        # a bracket can hide two close collisions: resample it before refining
        sub = np.linspace(xs[max(i - 1, 0)], xs[min(i + 1, last)], SUBSAMPLE + 1)
        sg, ss = kn.scan_gaps(np.ascontiguousarray(eval_coeffs(p, sub).T))
        sr = sg / ss
        for j in range(1, SUBSAMPLE):
            if sr[j] < sr[j - 1] and sr[j] <= sr[j + 1]:
                cands.append(_golden_min(f, float(sub[j - 1]), float(sub[j + 1])))
        if sr[0] < sr[1] and sr[0] < eps:
            cands.append(float(sub[0]))
        if sr[-1] < sr[-2] and sr[-1] < eps:
            cands.append(float(sub[-1]))
    found = []
    for xi in sorted(cands):
        r, g = _rel_gap(p, xi)
        if r < eps and not any(abs(xi - s.xi) < 1e-9 for s in found):
            found.append(SingularityReport(xi, classify(p, xi), float(g)))
    return found


def _labelled_pair(a):
    # n = 2 labelling k = -a1/2 -+ j sqrt(a0 - a1^2/4), principal root
    r = np.sqrt(complex(a[0] - a[1] ** 2 / 4) + 0j)  # + 0j drops a -0 imaginary part
    return np.array([-a[1] / 2 - 1j * r, -a[1] / 2 + 1j * r], dtype=complex)


def _frame_from_roots(p, x, k):
    a = np.ascontiguousarray(eval_coeffs(p, x), dtype=complex)
    da = np.ascontiguousarray(eval_coeff_derivs(p, x), dtype=complex)
    k = np.ascontiguousarray(k, dtype=complex)
    fr = RootFrame.from_roots(k, x)
    if fr.gap < p.options.degeneracy_eps * (1 + np.max(np.abs(k))):
        raise DegeneracyError(x, gap=fr.gap, message=(
            f"frame at x={x!r} is still degenerate; increase jump_half_width"))
    dk, st = kn.root_slopes(k, a, da)
    if st != kn.OK:
        raise DegeneracyError(x, gap=fr.gap)
    return RootFrame(x, k, dk, fr.gap)


def semicircle_path(xi, dx, direction, points=257):
    """Upper half-plane arc from xi - direction*dx to xi + direction*dx."""
    theta = np.linspace(0.0, np.pi, points)
    xs = xi - direction * dx * np.exp(-1j * direction * theta)
    xs[0] = xi - direction * dx
    xs[-1] = xi + direction * dx
    return xs


def singular_jump(p, s, near=None, direction=1):
    """Finite jump over the singular point s between xi -+ jump_half_width.

    ``near`` is the tracked frame on the departure side; the arrival frame
    inherits its slot order. For n = 2 both sides use the labelling
    k = -a1/2 -+ j sqrt(a0 - a1^2/4); otherwise the roots are continued
    around xi through the upper half plane.
    """
    direction = 1 if direction >= 0 else -1
    dx = p.jump_half_width
    xn = float(s.xi - direction * dx)
    xf = float(s.xi + direction * dx)
    if near is not None and abs(near.x - xn) > 1e-12 * max(1.0, abs(xn)):
        raise ValueError(f"near frame is at x={near.x}, expected {xn}")
    if p.n == 2:
        kn_p = _labelled_pair(eval_coeffs(p, xn))
        kf_p = _labelled_pair(eval_coeffs(p, xf))
        if near is None:
            near = _frame_from_roots(p, xn, kn_p)
            perm = np.arange(2)
        else:
            perm = kn.match_roots(np.ascontiguousarray(near.roots), kn_p)
        far = _frame_from_roots(p, xf, kf_p[perm])
    else:
        if near is None:
            near = track_frame(None, p, xn)
        K, _, _ = frames_along(p, semicircle_path(s.xi, dx, direction), near)
        far = _frame_from_roots(p, xf, K[-1])
    _check_frame(p, near)
    Q = jump_between(near, xn, far, xf)
    return TransferMatrix(xn, xf, Q, near, far)


# -- sweeps across singular points -----------------------------------------------------

@dataclass
class Sweep:
    """Transfer matrices from x0 to each target plus the frames there."""

    Qs: list
    frames: list
    frozen: np.ndarray
    singularities: list
    jumps: list


def _advance(p, x_from, fr, stops, anchors, method):
    """Transfer from x_from to every point of ``stops`` (monotone, past x_from)."""
    bps = [x_from] + list(stops)
    if method == "ode":
        pieces = [march_nodes(bps[i], bps[i + 1], p.step, anchors) for i in range(len(bps) - 1)]
        idx = np.cumsum([len(pc) - 1 for pc in pieces])
        nodes = np.concatenate([pieces[0]] + [pc[1:] for pc in pieces[1:]])
        Qs, Ks, dKs = _rk4(p, nodes, fr)
        return [(Qs[i], RootFrame.from_roots(Ks[i], stops[j], dKs[i]))
                for j, i in enumerate(idx)]
    out = []
    Q = np.eye(p.n, dtype=complex)
    for i in range(len(bps) - 1):
        tm, _ = propagate_exp(p, bps[i], bps[i + 1], fr, anchors)
        Q = tm.Q @ Q
        fr = tm.frame_to
        out.append((Q, fr))
    return out


def sweep(p, x0, frame0, targets, method=None, singularities=None):
    """Transfers from x0 to targets lying on one side of x0, jumping over singular points.

    Targets inside a jump band get the transfer to the nearer band edge and
    that edge's roots (constant-medium reconstruction); they are flagged in
    ``frozen``.
    """
    method = method or p.options.method
    targets = [float(t) for t in targets]
    n = p.n
    if not targets:
        return Sweep([], [], np.zeros(0, bool), [], [])
    far_end = max(targets, key=lambda t: abs(t - x0))
    d = 1.0 if far_end >= x0 else -1.0
    if any(d * (t - x0) < 0 for t in targets):
        raise ValueError("sweep targets must all lie on one side of x0")
    order = sorted(range(len(targets)), key=lambda i: d * targets[i])
    Qs = [None] * len(targets)
    frames = [None] * len(targets)
    frozen = np.zeros(len(targets), dtype=bool)
    dx = p.jump_half_width
    if singularities is None:
        sings = find_singularities(p, (x0, far_end)) if far_end != x0 else []
    else:
        sings = [s for s in singularities if d * (s.xi - x0) >= 0 and d * (far_end - s.xi) >= 0]
    sings = sorted(sings, key=lambda s: d * s.xi)
    for a, b in zip(sings, sings[1:]):
        if abs(b.xi - a.xi) < 2 * dx:
            raise DegeneracyError(b.xi, message=(
                f"singular points at {a.xi!r} and {b.xi!r} are closer than 2*jump_half_width"))
    anchors = [s.xi for s in sings]
    Q = np.eye(n, dtype=complex)
    fr = frame0
    xc = float(x0)
    k = 0
    jumps = []

    def record(i, Qt, frt, fz=False):
        Qs[i] = Qt
        frames[i] = frt
        frozen[i] = fz

    while k < len(order) and targets[order[k]] == xc:
        record(order[k], Q.copy(), fr)
        k += 1
    for s in sings:
        near = s.xi - d * dx
        far = s.xi + d * dx
        if d * (near - xc) < 0:
            raise DegeneracyError(xc, message=(
                f"x={xc!r} lies within jump_half_width of the singular point {s.xi!r}; "
                "start from a point further away"))
        stops = []
        while k < len(order) and d * (targets[order[k]] - near) <= 0:
            stops.append(order[k])
            k += 1
        pts = [targets[i] for i in stops]
        if not pts or pts[-1] != near:
            if k < len(order):
                pts.append(near)
        if pts:
            res = _advance(p, xc, fr, pts, anchors, method)
            for i, (Qt, frt) in zip(stops, res):
                record(i, Qt @ Q, frt)
            Q = res[-1][0] @ Q
            fr = res[-1][1]
            xc = pts[-1]
        if k >= len(order):
            break
        # inside the band
        while k < len(order) and d * (targets[order[k]] - s.xi) <= 0:
            t = targets[order[k]]
            record(order[k], Q.copy(), RootFrame(t, fr.roots, fr.droots, fr.gap), True)
            k += 1
        jm = singular_jump(p, s, fr, int(d))
        jumps.append(jm)
        Q = jm.Q @ Q
        fr = jm.frame_to
        xc = far
        while k < len(order) and d * (targets[order[k]] - far) < 0:
            t = targets[order[k]]
            record(order[k], Q.copy(), RootFrame(t, fr.roots, fr.droots, fr.gap), True)
            k += 1
        while k < len(order) and targets[order[k]] == far:
            record(order[k], Q.copy(), fr)
            k += 1
    if k < len(order):
        stops = order[k:]
        res = _advance(p, xc, fr, [targets[i] for i in stops], anchors, method)
        for i, (Qt, frt) in zip(stops, res):
            record(i, Qt @ Q, frt)
    return Sweep(Qs, frames, frozen, sings, jumps)


def propagate_robust(p, x1, x2, start=None, method=None):
    """Transfer from x1 to x2, propagating smooth segments and jumping over singular points."""
    fr0 = _start_frame(p, x1, start)
    if x1 == x2:
        return identity_transfer(x1, p.n, fr0)
    sw = sweep(p, x1, fr0, [x2], method)
    return TransferMatrix(float(x1), float(x2), sw.Qs[0], fr0, sw.frames[0])
