"""Numeric inner loops.

Every function here is written in the numba-compatible subset of numpy so
the same source runs compiled (default) or interpreted
(``DTMM_DISABLE_JIT=1``). Arrays are complex128 unless noted; errors are
reported through integer status codes and turned into exceptions by the
calling modules.
"""

import math

import numpy as np

from ._jit import njit

OK = 0
DEGENERATE_GAP = 1
DEGENERATE_SLOPE = 2
NONFINITE = 3

# |p'(k)| below this is treated as a root collision
SLOPE_FLOOR = 1e-14


# -- characteristic polynomial ------------------------------------------------

@njit
def horner(a, k):
    """p(k) and p'(k) for p(k) = k^n + a[n-1] k^(n-1) + ... + a[0]."""
    n = a.shape[0]
    p = 1.0 + 0.0j
    dp = 0.0 + 0.0j
    for m in range(n - 1, -1, -1):
        dp = dp * k + p
        p = p * k + a[m]
    return p, dp


@njit
def poly_roots(a):
    n = a.shape[0]
    out = np.empty(n, dtype=np.complex128)
    if n == 1:
        out[0] = -a[0]
        return out
    comp = np.zeros((n, n), dtype=np.complex128)
    for i in range(n - 1):
        comp[i + 1, i] = 1.0
    for i in range(n):
        comp[i, n - 1] = -a[i]
    ev = np.linalg.eigvals(comp)
    for i in range(n):
        k = ev[i]
        p, dp = horner(a, k)
        for _ in range(4):
            if dp == 0:
                break
            kn = k - p / dp
            pn, dpn = horner(a, kn)
            if abs(pn) < abs(p):
                k, p, dp = kn, pn, dpn
            else:
                break
        out[i] = k
    return out


@njit
def min_gap(k):
    n = k.shape[0]
    g = np.inf
    ia = -1
    ib = -1
    for i in range(n):
        for j in range(i + 1, n):
            d = abs(k[i] - k[j])
            if d < g:
                g = d
                ia = i
                ib = j
    return g, ia, ib


@njit
def max_abs(k):
    m = 0.0
    for i in range(k.shape[0]):
        v = abs(k[i])
        if v > m:
            m = v
    return m


@njit
def lex_order(k):
    """Indices sorting roots by real part, then imaginary part.

    Real parts within a small relative tolerance count as equal so that
    eigensolver noise cannot decide the order of a conjugate pair.
    """
    n = k.shape[0]
    tol = 1e-9 * (1.0 + max_abs(k))
    idx = np.arange(n)
    for i in range(1, n):
        cur = idx[i]
        j = i - 1
        while j >= 0:
            prev = idx[j]
            dr = k[cur].real - k[prev].real
            if abs(dr) > tol:
                before = dr < 0
            else:
                before = k[cur].imag < k[prev].imag
            if not before:
                break
            idx[j + 1] = prev
            j -= 1
        idx[j + 1] = cur
    return idx


@njit
def _assignment_cost(pred, k, perm):
    c = 0.0
    for i in range(pred.shape[0]):
        c += abs(pred[i] - k[perm[i]])
    return c


@njit
def match_roots(pred, k):
    """perm with k[perm[i]] the continuation of slot i (min total distance)."""
    n = k.shape[0]
    perm = np.empty(n, dtype=np.int64)
    used = np.zeros(n, dtype=np.bool_)
    conflict = False
    for i in range(n):
        best = -1
        bd = np.inf
        for j in range(n):
            d = abs(pred[i] - k[j])
            if d < bd:
                bd = d
                best = j
        if used[best]:
            conflict = True
        used[best] = True
        perm[i] = best
    if not conflict:
        return perm
    if n <= 8:
        # Heap's algorithm over all permutations
        p = np.arange(n)
        c = np.zeros(n, dtype=np.int64)
        best_perm = p.copy()
        best_cost = _assignment_cost(pred, k, p)
        i = 1
        while i < n:
            if c[i] < i:
                if i % 2 == 0:
                    t = p[0]
                    p[0] = p[i]
                    p[i] = t
                else:
                    t = p[c[i]]
                    p[c[i]] = p[i]
                    p[i] = t
                cost = _assignment_cost(pred, k, p)
                if cost < best_cost:
                    best_cost = cost
                    best_perm[:] = p
                c[i] += 1
                i = 1
            else:
                c[i] = 0
                i += 1
        return best_perm
    # large n: repeatedly take the globally closest free pair
    taken_slot = np.zeros(n, dtype=np.bool_)
    taken_root = np.zeros(n, dtype=np.bool_)
    for _ in range(n):
        bd = np.inf
        bi = -1
        bj = -1
        for i in range(n):
            if taken_slot[i]:
                continue
            for j in range(n):
                if taken_root[j]:
                    continue
                d = abs(pred[i] - k[j])
                if d < bd:
                    bd = d
                    bi = i
                    bj = j
        taken_slot[bi] = True
        taken_root[bj] = True
        perm[bi] = bj
    return perm


@njit
def root_slopes(k, a, da):
    """k_i' = -(sum_m a_m' k_i^m) / p'(k_i); status DEGENERATE_SLOPE if p'(k_i) ~ 0."""
    n = k.shape[0]
    dk = np.empty(n, dtype=np.complex128)
    status = OK
    for i in range(n):
        num = 0.0 + 0.0j
        kp = 1.0 + 0.0j
        for m in range(n):
            num += da[m] * kp
            kp *= k[i]
        _, den = horner(a, k[i])
        if abs(den) < SLOPE_FLOOR:
            status = DEGENERATE_SLOPE
            dk[i] = 0.0
        else:
            dk[i] = -num / den
    return dk, status


@njit
def make_frame(a, da, prev_k, prev_dk, dx, seeded, eps_rel):
    """Roots at one point, ordered by lexicographic seed or by continuation.

    With ``seeded`` true the roots are matched to the linear prediction
    prev_k + dx * prev_dk. Returns (k, dk, gap, status, ia, ib).
    """
    raw = poly_roots(a)
    n = raw.shape[0]
    k = np.empty(n, dtype=np.complex128)
    for i in range(n):
        if not (np.isfinite(raw[i].real) and np.isfinite(raw[i].imag)):
            return raw, raw, np.nan, NONFINITE, -1, -1
    if seeded:
        pred = np.empty(n, dtype=np.complex128)
        for i in range(n):
            pred[i] = prev_k[i] + dx * prev_dk[i]
        perm = match_roots(pred, raw)
    else:
        perm = lex_order(raw)
    for i in range(n):
        k[i] = raw[perm[i]]
    gap, ia, ib = min_gap(k)
    if gap < eps_rel * (1.0 + max_abs(k)):
        return k, np.zeros(n, dtype=np.complex128), gap, DEGENERATE_GAP, ia, ib
    dk, st = root_slopes(k, a, da)
    if st != OK:
        return k, dk, gap, st, ia, ib
    return k, dk, gap, OK, -1, -1


@njit
def scan_gaps(A):
    """Min pairwise root distance and root scale at each row of A (m, n)."""
    m = A.shape[0]
    gaps = np.empty(m)
    scale = np.empty(m)
    for r in range(m):
        k = poly_roots(A[r])
        g, _, _ = min_gap(k)
        gaps[r] = g
        scale[r] = 1.0 + max_abs(k)
    return gaps, scale


@njit
def track_path(xs, A, dA, k0, dk0, eps_rel):
    """Continue the frame (k0, dk0) at xs[0] through xs[1:] (xs may be complex).

    Returns (K, dK, gaps, status, bad_index, ia, ib).
    """
    m = xs.shape[0]
    n = k0.shape[0]
    K = np.empty((m, n), dtype=np.complex128)
    dK = np.empty((m, n), dtype=np.complex128)
    gaps = np.empty(m)
    K[0] = k0
    dK[0] = dk0
    g0, _, _ = min_gap(k0)
    gaps[0] = g0
    for i in range(1, m):
        k, dk, g, st, ia, ib = make_frame(A[i], dA[i], K[i - 1], dK[i - 1],
                                          xs[i] - xs[i - 1], True, eps_rel)
        if st != OK:
            return K, dK, gaps, st, i, ia, ib
        K[i] = k
        dK[i] = dk
        gaps[i] = g
    return K, dK, gaps, OK, -1, -1, -1


# -- Vandermonde machinery ---------------------------------------------------

@njit
def vandermonde(k):
    """D[i, j] = k_j^i and C[i, j] = i k_j^(i-1) (0-based rows)."""
    n = k.shape[0]
    D = np.empty((n, n), dtype=np.complex128)
    C = np.zeros((n, n), dtype=np.complex128)
    for j in range(n):
        p = 1.0 + 0.0j
        for i in range(n):
            D[i, j] = p
            if i + 1 < n:
                C[i + 1, j] = (i + 1) * p
            p *= k[j]
    return D, C


@njit
def vandermonde_inverse(k):
    """Rows are monomial coefficients of the Lagrange basis polynomials."""
    n = k.shape[0]
    G = np.zeros((n, n), dtype=np.complex128)
    poly = np.empty(n, dtype=np.complex128)
    for i in range(n):
        poly[:] = 0.0
        poly[0] = 1.0
        deg = 0
        denom = 1.0 + 0.0j
        for j in range(n):
            if j == i:
                continue
            # poly *= (t - k_j)
            deg += 1
            for r in range(deg, 0, -1):
                poly[r] = poly[r - 1] - k[j] * poly[r]
            poly[0] = -k[j] * poly[0]
            denom *= k[i] - k[j]
        for r in range(n):
            G[i, r] = poly[r] / denom
    return G


@njit
def kernel_general(x, k, dk):
    """U = -x K' - exp(-xK) D^-1 C K' exp(xK)."""
    n = k.shape[0]
    D, C = vandermonde(k)
    G = vandermonde_inverse(k)
    GC = G @ C
    U = np.empty((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            U[i, j] = -np.exp(x * (k[j] - k[i])) * GC[i, j] * dk[j]
        U[i, i] -= x * dk[i]
    return U


@njit
def kernel_n2(x, k, dk):
    """Closed form of the 2x2 kernel for an arbitrary root labelling."""
    U = np.empty((2, 2), dtype=np.complex128)
    d = k[0] - k[1]
    U[0, 0] = -(x + 1.0 / d) * dk[0]
    U[0, 1] = -dk[1] / d * np.exp(-x * d)
    U[1, 0] = dk[0] / d * np.exp(x * d)
    U[1, 1] = -(x - 1.0 / d) * dk[1]
    return U


@njit
def kernel(x, k, dk):
    n = k.shape[0]
    if n == 1:
        U = np.empty((1, 1), dtype=np.complex128)
        U[0, 0] = -x * dk[0]
        return U
    if n == 2:
        return kernel_n2(x, k, dk)
    return kernel_general(x, k, dk)


@njit
def kernels_along(xs, K, dK):
    m = xs.shape[0]
    n = K.shape[1]
    out = np.empty((m, n, n), dtype=np.complex128)
    for i in range(m):
        out[i] = kernel(xs[i], K[i], dK[i])
    return out


@njit
def jump_integrands(xs, K, dK):
    """-exp(-xK) D^-1 d/dx[D exp(xK)] from D' = C K' (no use of the kernel routine)."""
    m = xs.shape[0]
    n = K.shape[1]
    out = np.empty((m, n, n), dtype=np.complex128)
    for s in range(m):
        x = xs[s]
        k = K[s]
        dk = dK[s]
        D, C = vandermonde(k)
        G = vandermonde_inverse(k)
        H1 = np.empty((n, n), dtype=np.complex128)
        for i in range(n):
            for j in range(n):
                H1[i, j] = (C[i, j] * dk[j] + D[i, j] * (k[j] + x * dk[j])) * np.exp(x * k[j])
        R = G @ H1
        for i in range(n):
            for j in range(n):
                out[s, i, j] = -np.exp(-x * k[i]) * R[i, j]
    return out


# -- transfer-matrix stepping ----------------------------------------------------

@njit
def rk4_transfer(pts, A, dA, k0, dk0, eps_rel):
    """Classical RK4 for dQ/dx = U(x) Q, Q(pts[0]) = I.

    ``pts`` interleaves step ends (even indices) and midpoints (odd); A and
    dA hold coefficients and their derivatives at every entry of ``pts``.
    Frames are continued through every node. Returns
    (Qs, Ks, dKs, gaps, status, bad_index, ia, ib) with one record per step end.
    """
    nsteps = (pts.shape[0] - 1) // 2
    n = k0.shape[0]
    Qs = np.empty((nsteps + 1, n, n), dtype=np.complex128)
    Ks = np.empty((nsteps + 1, n), dtype=np.complex128)
    dKs = np.empty((nsteps + 1, n), dtype=np.complex128)
    gaps = np.empty(nsteps + 1)
    Q = np.eye(n, dtype=np.complex128)
    Qs[0] = Q
    Ks[0] = k0
    dKs[0] = dk0
    g0, _, _ = min_gap(k0)
    gaps[0] = g0
    kc = k0.copy()
    dkc = dk0.copy()
    U0 = kernel(pts[0], kc, dkc)
    for s in range(nsteps):
        x0 = pts[2 * s]
        xm = pts[2 * s + 1]
        x1 = pts[2 * s + 2]
        h = x1 - x0
        km, dkm, gm, st, ia, ib = make_frame(A[2 * s + 1], dA[2 * s + 1], kc, dkc,
                                             xm - x0, True, eps_rel)
        if st != OK:
            return Qs, Ks, dKs, gaps, st, 2 * s + 1, ia, ib
        k1, dk1, g1, st, ia, ib = make_frame(A[2 * s + 2], dA[2 * s + 2], km, dkm,
                                             x1 - xm, True, eps_rel)
        if st != OK:
            return Qs, Ks, dKs, gaps, st, 2 * s + 2, ia, ib
        Um = kernel(xm, km, dkm)
        U1 = kernel(x1, k1, dk1)
        s1 = U0 @ Q
        s2 = Um @ (Q + (0.5 * h) * s1)
        s3 = Um @ (Q + (0.5 * h) * s2)
        s4 = U1 @ (Q + h * s3)
        Q = Q + (h / 6.0) * (s1 + 2.0 * s2 + 2.0 * s3 + s4)
        Qs[s + 1] = Q
        Ks[s + 1] = k1
        dKs[s + 1] = dk1
        gaps[s + 1] = min(gm, g1)
        kc = k1
        dkc = dk1
        U0 = U1
    return Qs, Ks, dKs, gaps, OK, -1, -1, -1


# -- matrix exponentials -----------------------------------------------------------

@njit
def mat_exp(M):
    """Scaling and squaring around a Taylor kernel (||A||_1 <= 1/2)."""
    n = M.shape[0]
    norm = 0.0
    for j in range(n):
        col = 0.0
        for i in range(n):
            col += abs(M[i, j])
        if col > norm:
            norm = col
    s = 0
    if norm > 0.5:
        s = int(math.ceil(math.log2(norm / 0.5)))
    A = M / (2.0 ** s)
    E = np.eye(n, dtype=np.complex128)
    term = np.eye(n, dtype=np.complex128)
    for q in range(1, 40):
        term = (term @ A) / q
        E = E + term
        tmax = 0.0
        for i in range(n):
            for j in range(n):
                v = abs(term[i, j])
                if v > tmax:
                    tmax = v
        if tmax < 1e-20:
            break
    for _ in range(s):
        E = E @ E
    return E


@njit
def mat_exp_2x2(M):
    """exp(M) = exp(tr/2) (cos(d) I + sinc(d) A), A = M - tr/2 I, d^2 = det A."""
    half = 0.5 * (M[0, 0] + M[1, 1])
    a00 = M[0, 0] - half
    a11 = M[1, 1] - half
    a01 = M[0, 1]
    a10 = M[1, 0]
    d2 = a00 * a11 - a01 * a10
    if abs(d2) < 1e-8:
        c = 1.0 - d2 / 2.0 + d2 * d2 / 24.0 - d2 * d2 * d2 / 720.0
        sc = 1.0 - d2 / 6.0 + d2 * d2 / 120.0 - d2 * d2 * d2 / 5040.0
    else:
        d = np.sqrt(d2)
        c = np.cos(d)
        sc = np.sin(d) / d
    f = np.exp(half)
    E = np.empty((2, 2), dtype=np.complex128)
    E[0, 0] = f * (c + sc * a00)
    E[0, 1] = f * sc * a01
    E[1, 0] = f * sc * a10
    E[1, 1] = f * (c + sc * a11)
    return E
